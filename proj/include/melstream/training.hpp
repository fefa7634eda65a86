// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melstream/features.hpp"
#include "melstream/model.hpp"
#include "melstream/params.hpp"
#include "melstream/pipeline.hpp"
#include "melstream/synthdata.hpp"

namespace melstream::training {

enum class Target { kDirectPath, kReverberantClean };

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double segment_seconds = 3.0;
  double lr_init = 1e-4;
  double lr_peak = 1e-3;
  double warmup_epochs = 30;
  double lr_final = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global L2; <= 0 disables
  std::uint64_t seed = 0;
  std::size_t average_last_k = 10;
  double smoothing_frames = features::kDefaultSmoothingFrames;  // L of the online normalizer
  Target target = Target::kDirectPath;

  void validate() const;
};

/// Full-length schedule: 200 epochs, 1e-4 -> 1e-3 over 30 warmup epochs, cosine
/// back to 1e-4, last 10 epochs averaged.
TrainConfig full_schedule();

/// Reduced configuration sized for a single laptop core: same topology and
/// context as the full model with a narrow hidden width and one block, and a
/// 20-epoch schedule with a short warmup.
model::ModelConfig desk_model(model::Mode mode);
TrainConfig desk_schedule();

double mse_loss(const Matrix& pred, const Matrix& target);

struct LossAndGrads {
  double loss = 0.0;
  GradientSet grads;
};

/// Loss and exact gradients of mse_loss(forward(params, framed), target).
LossAndGrads backward(const model::ModelConfig& cfg, const Parameters& params,
                      const features::FramedInput& framed, const Matrix& target);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_array;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences of the loss for every
/// entry of every parameter array. Relative error is
/// |a - n| / max(|a|, |n|, floor). With `corrupt_weights` the analytic side is
/// evaluated on a perturbed copy of the weights (a test hook that must fail).
GradCheckResult gradient_check(const model::ModelConfig& cfg, const Parameters& params,
                               const features::FramedInput& framed, const Matrix& target,
                               double h = 1e-5, double floor = 1e-6,
                               bool corrupt_weights = false);

/// Tiny double-precision setup used by the gradient check probe: F = 4,
/// D = 6, one block, T = 3, random input and target.
struct TinyProblem {
  model::ModelConfig cfg;
  Parameters params;
  features::FramedInput framed;
  Matrix input;
  Matrix target;
};
TinyProblem tiny_problem(model::Mode mode, std::uint64_t seed);

OptimizerState make_optimizer_state(const Parameters& params);

/// Bias-corrected Adam update.
void adam_step(Parameters& params, const GradientSet& grads, OptimizerState& opt, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Scales grads in place so the global L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_grad_norm(GradientSet& grads, double max_norm);

/// Linear warmup lr_init -> lr_peak over [0, warmup], then cosine decay to
/// lr_final at `epochs`.
double lr_at(double epoch, const TrainConfig& tc);

/// Arithmetic mean per array over congruent checkpoints (optimizer arrays
/// are dropped).
ModelBundle average_checkpoints(const std::vector<std::filesystem::path>& paths);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

std::string format_log_line(const EpochLog& e);

struct TrainResult {
  std::vector<EpochLog> log;
  std::filesystem::path final_checkpoint;
  std::filesystem::path averaged_checkpoint;  // empty when not produced
  double unprocessed_val_mse = 0.0;
  double global_mean = 0.0;
};

/// Example in the normalized network domain.
struct Example {
  features::FramedInput framed;
  Matrix input;
  Matrix target;
};

/// Mean loss over examples, accumulated in index order.
double evaluate_loss(const model::ModelConfig& cfg, const Parameters& params,
                     const std::vector<Example>& examples);

/// Plain optimization loop over fixed examples: each step uses one batch of
/// `batch` consecutive examples (cycling) at constant lr. Returns the
/// pre-update batch loss of every step.
std::vector<double> fit_steps(const model::ModelConfig& cfg, Parameters& params,
                              OptimizerState& opt, const std::vector<Example>& examples,
                              std::size_t steps, std::size_t batch, double lr,
                              double clip_norm = 5.0);

/// Full run: writes ckpt_epoch_NNN.mfsn per epoch, final.mfsn, loss.log and,
/// when average_last_k > 0, averaged.mfsn under out_dir.
TrainResult train(const TrainConfig& tc, const model::ModelConfig& mcfg,
                  const FrontendConfig& frontend, const synthdata::CorpusManifest& corpus,
                  const std::filesystem::path& out_dir);

}  // namespace melstream::training
