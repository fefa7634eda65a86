// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace melstream::nn {

// Row-major affine map applied to `rows` input rows:
//   y[r, :] = bias + sum_k x[r, k] * w[k, :]
// Each output row depends only on its input row and is accumulated in a fixed
// order, so results do not depend on how many rows are batched together.
void affine(const double* x, std::size_t rows, std::size_t in, const double* w,
            const double* bias, std::size_t out, double* y);

// y[r, :] += sum_k x[r, k] * w[k, :]
void matmul_accumulate(const double* x, std::size_t rows, std::size_t in, const double* w,
                       std::size_t out, double* y);

// Backward helpers for y = x w + b.
//   dx[r, k] += sum_j dy[r, j] * w[k, j]
void affine_backward_input(const double* dy, std::size_t rows, std::size_t out,
                           const double* w, std::size_t in, double* dx);
//   dw[k, j] += sum_r x[r, k] * dy[r, j];  db[j] += sum_r dy[r, j]
void affine_backward_params(const double* x, const double* dy, std::size_t rows,
                            std::size_t in, std::size_t out, double* dw, double* db);

double sigmoid(double x);
// tanh evaluated through a single exp; used for every LSTM nonlinearity.
double tanh_act(double x);

/// Weights of one LSTM direction. Gate order along the 4H axis: input,
/// forget, candidate, output.
struct LstmWeights {
  const double* w_ih = nullptr;  // input_dim x 4H
  const double* w_hh = nullptr;  // H x 4H
  const double* bias = nullptr;  // 4H
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
};

struct LstmGradRefs {
  double* w_ih = nullptr;
  double* w_hh = nullptr;
  double* bias = nullptr;
};

/// Per-step activations kept for backpropagation. Indexed by the
/// sequence position (not processing order).
struct LstmTrace {
  std::vector<double> gates;  // steps x rows x 4H, post-activation
  std::vector<double> cells;  // steps x rows x H
};

/// Scratch buffers for one batch of `rows` independent sequences.
struct LstmScratch {
  std::vector<double> h;      // rows x H, running hidden state
  std::vector<double> c;      // rows x H, running cell state
  std::vector<double> gates;  // rows x 4H
  void resize(std::size_t rows, std::size_t hidden);
  void reset();
};

/// Advances `rows` independent cells by one step. x is rows x input_dim.
/// h and c are updated in place; gates receives the activated gates.
void lstm_step(const LstmWeights& w, const double* x, std::size_t rows, double* h,
               double* c, double* gates);

enum class Direction { kForward, kBackward };

/// Runs `rows` independent sequences of length `steps`. x is laid out
/// steps x rows x input_dim and the result steps x rows x H is written to
/// `out` (stride `out_stride` between rows, offset by the caller). Starting
/// state is taken from `scratch` (zeros after reset()).
void lstm_scan(const LstmWeights& w, const double* x, std::size_t steps, std::size_t rows,
               Direction dir, LstmScratch& scratch, double* out, std::size_t out_stride,
               LstmTrace* trace);

/// Reverse-mode pass for lstm_scan from zero initial state. dh is
/// steps x rows x H (read with stride dh_stride). Accumulates into grads and
/// into dx (steps x rows x input_dim).
void lstm_scan_backward(const LstmWeights& w, const double* x, std::size_t steps,
                        std::size_t rows, Direction dir, const LstmTrace& trace,
                        const double* h_seq, std::size_t h_stride, const double* dh,
                        std::size_t dh_stride, LstmGradRefs grads, double* dx);

/// Single-sequence convenience form: input is L x input_dim, returns L x H.
/// h0/c0 may be empty for zero initial state.
std::vector<double> lstm_sequence(const LstmWeights& w, std::span<const double> input,
                                  std::size_t length, Direction dir,
                                  std::span<const double> h0 = {},
                                  std::span<const double> c0 = {});

/// Bidirectional: each output row is [forward_h, backward_h].
std::vector<double> bilstm_sequence(const LstmWeights& fwd, const LstmWeights& bwd,
                                    std::span<const double> input, std::size_t length);

}  // namespace melstream::nn
