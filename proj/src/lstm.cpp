// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "melstream/error.hpp"

namespace melstream::nn {

void affine(const double* x, std::size_t rows, std::size_t in, const double* w,
            const double* bias, std::size_t out, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* yr = y + r * out;
    if (bias != nullptr) {
      std::copy(bias, bias + out, yr);
    } else {
      std::fill(yr, yr + out, 0.0);
    }
  }
  matmul_accumulate(x, rows, in, w, out, y);
}

void matmul_accumulate(const double* x, std::size_t rows, std::size_t in, const double* w,
                       std::size_t out, double* y) {
  // Four input terms per pass over the output row; each y element still
  // receives its terms one at a time in increasing k.
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in;
    double* yr = y + r * out;
    std::size_t k = 0;
    for (; k + 4 <= in; k += 4) {
      const double a0 = xr[k], a1 = xr[k + 1], a2 = xr[k + 2], a3 = xr[k + 3];
      const double* w0 = w + k * out;
      const double* w1 = w0 + out;
      const double* w2 = w1 + out;
      const double* w3 = w2 + out;
      for (std::size_t j = 0; j < out; ++j) {
        yr[j] = (((yr[j] + a0 * w0[j]) + a1 * w1[j]) + a2 * w2[j]) + a3 * w3[j];
      }
    }
    for (; k < in; ++k) {
      const double a = xr[k];
      const double* wk = w + k * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += a * wk[j];
    }
  }
}

void affine_backward_input(const double* dy, std::size_t rows, std::size_t out,
                           const double* w, std::size_t in, double* dx) {
  // Row-axpy form over w transposed (out x in) so the inner loop is contiguous.
  thread_local std::vector<double> wt;
  wt.resize(in * out);
  for (std::size_t k = 0; k < in; ++k) {
    for (std::size_t j = 0; j < out; ++j) wt[j * in + k] = w[k * out + j];
  }
  matmul_accumulate(dy, rows, out, wt.data(), in, dx);
}

void affine_backward_params(const double* x, const double* dy, std::size_t rows,
                            std::size_t in, std::size_t out, double* dw, double* db) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* g0 = dy + r * out;
    const double* g1 = g0 + out;
    const double* g2 = g1 + out;
    const double* g3 = g2 + out;
    const double* x0 = x + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double a0 = x0[k], a1 = x0[in + k], a2 = x0[2 * in + k], a3 = x0[3 * in + k];
      double* dwk = dw + k * out;
      for (std::size_t j = 0; j < out; ++j) {
        dwk[j] = (((dwk[j] + a0 * g0[j]) + a1 * g1[j]) + a2 * g2[j]) + a3 * g3[j];
      }
    }
    if (db != nullptr) {
      for (std::size_t j = 0; j < out; ++j) db[j] = (((db[j] + g0[j]) + g1[j]) + g2[j]) + g3[j];
    }
  }
  for (; r < rows; ++r) {
    const double* xr = x + r * in;
    const double* g = dy + r * out;
    for (std::size_t k = 0; k < in; ++k) {
      const double a = xr[k];
      double* dwk = dw + k * out;
      for (std::size_t j = 0; j < out; ++j) dwk[j] += a * g[j];
    }
    if (db != nullptr) {
      for (std::size_t j = 0; j < out; ++j) db[j] += g[j];
    }
  }
}

double tanh_act(double x) {
  const double e = std::exp(-2.0 * std::abs(x));
  const double t = (1.0 - e) / (1.0 + e);
  return x < 0.0 ? -t : t;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void LstmScratch::resize(std::size_t rows, std::size_t hidden) {
  h.assign(rows * hidden, 0.0);
  c.assign(rows * hidden, 0.0);
  gates.assign(rows * 4 * hidden, 0.0);
}

void LstmScratch::reset() {
  std::fill(h.begin(), h.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
}

void lstm_step(const LstmWeights& w, const double* x, std::size_t rows, double* h, double* c,
               double* gates) {
  const std::size_t hd = w.hidden;
  const std::size_t g4 = 4 * hd;
  affine(x, rows, w.input_dim, w.w_ih, w.bias, g4, gates);
  matmul_accumulate(h, rows, hd, w.w_hh, g4, gates);
  for (std::size_t r = 0; r < rows; ++r) {
    double* g = gates + r * g4;
    double* hr = h + r * hd;
    double* cr = c + r * hd;
    for (std::size_t j = 0; j < hd; ++j) {
      const double i_g = sigmoid(g[j]);
      const double f_g = sigmoid(g[hd + j]);
      const double c_g = tanh_act(g[2 * hd + j]);
      const double o_g = sigmoid(g[3 * hd + j]);
      g[j] = i_g;
      g[hd + j] = f_g;
      g[2 * hd + j] = c_g;
      g[3 * hd + j] = o_g;
      cr[j] = f_g * cr[j] + i_g * c_g;
      hr[j] = o_g * tanh_act(cr[j]);
    }
  }
}

void lstm_scan(const LstmWeights& w, const double* x, std::size_t steps, std::size_t rows,
               Direction dir, LstmScratch& scratch, double* out, std::size_t out_stride,
               LstmTrace* trace) {
  const std::size_t hd = w.hidden;
  if (trace != nullptr) {
    trace->gates.resize(steps * rows * 4 * hd);
    trace->cells.resize(steps * rows * hd);
  }
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t s = dir == Direction::kForward ? n : steps - 1 - n;
    lstm_step(w, x + s * rows * w.input_dim, rows, scratch.h.data(), scratch.c.data(),
              scratch.gates.data());
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(scratch.h.data() + r * hd, hd, out + (s * rows + r) * out_stride);
    }
    if (trace != nullptr) {
      std::copy(scratch.gates.begin(), scratch.gates.end(),
                trace->gates.begin() + static_cast<std::ptrdiff_t>(s * rows * 4 * hd));
      std::copy(scratch.c.begin(), scratch.c.end(),
                trace->cells.begin() + static_cast<std::ptrdiff_t>(s * rows * hd));
    }
  }
}

void lstm_scan_backward(const LstmWeights& w, const double* x, std::size_t steps,
                        std::size_t rows, Direction dir, const LstmTrace& trace,
                        const double* h_seq, std::size_t h_stride, const double* dh,
                        std::size_t dh_stride, LstmGradRefs grads, double* dx) {
  const std::size_t hd = w.hidden;
  const std::size_t g4 = 4 * hd;
  std::vector<double> dh_next(rows * hd, 0.0);
  std::vector<double> dc_next(rows * hd, 0.0);
  std::vector<double> dpre(rows * g4);
  std::vector<double> h_prev(rows * hd);
  for (std::size_t n = 0; n < steps; ++n) {
    // Walk the processing order backwards.
    const std::size_t s = dir == Direction::kForward ? steps - 1 - n : n;
    const bool first = dir == Direction::kForward ? s == 0 : s == steps - 1;
    const std::size_t prev = dir == Direction::kForward ? s - 1 : s + 1;
    const double* gates = trace.gates.data() + s * rows * g4;
    const double* cells = trace.cells.data() + s * rows * hd;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = gates + r * g4;
      const double* c = cells + r * hd;
      const double* c_prev = first ? nullptr : trace.cells.data() + (prev * rows + r) * hd;
      double* dp = dpre.data() + r * g4;
      for (std::size_t j = 0; j < hd; ++j) {
        const double i_g = g[j], f_g = g[hd + j], c_g = g[2 * hd + j], o_g = g[3 * hd + j];
        const double dht = dh[(s * rows + r) * dh_stride + j] + dh_next[r * hd + j];
        const double tc = tanh_act(c[j]);
        const double d_o = dht * tc;
        const double dc = dc_next[r * hd + j] + dht * o_g * (1.0 - tc * tc);
        const double cp = c_prev != nullptr ? c_prev[j] : 0.0;
        dp[j] = dc * c_g * i_g * (1.0 - i_g);
        dp[hd + j] = dc * cp * f_g * (1.0 - f_g);
        dp[2 * hd + j] = dc * i_g * (1.0 - c_g * c_g);
        dp[3 * hd + j] = d_o * o_g * (1.0 - o_g);
        dc_next[r * hd + j] = dc * f_g;
      }
    }
    const double* xs = x + s * rows * w.input_dim;
    affine_backward_params(xs, dpre.data(), rows, w.input_dim, g4, grads.w_ih, grads.bias);
    affine_backward_input(dpre.data(), rows, g4, w.w_ih, w.input_dim,
                          dx + s * rows * w.input_dim);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    if (!first) {
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(h_seq + (prev * rows + r) * h_stride, hd, h_prev.data() + r * hd);
      }
      affine_backward_params(h_prev.data(), dpre.data(), rows, hd, g4, grads.w_hh, nullptr);
      affine_backward_input(dpre.data(), rows, g4, w.w_hh, hd, dh_next.data());
    }
  }
}

std::vector<double> lstm_sequence(const LstmWeights& w, std::span<const double> input,
                                  std::size_t length, Direction dir, std::span<const double> h0,
                                  std::span<const double> c0) {
  require(input.size() == length * w.input_dim, "lstm_sequence: input shape mismatch");
  LstmScratch scratch;
  scratch.resize(1, w.hidden);
  if (!h0.empty()) {
    require(h0.size() == w.hidden, "lstm_sequence: h0 size mismatch");
    std::copy(h0.begin(), h0.end(), scratch.h.begin());
  }
  if (!c0.empty()) {
    require(c0.size() == w.hidden, "lstm_sequence: c0 size mismatch");
    std::copy(c0.begin(), c0.end(), scratch.c.begin());
  }
  std::vector<double> out(length * w.hidden);
  lstm_scan(w, input.data(), length, 1, dir, scratch, out.data(), w.hidden, nullptr);
  return out;
}

std::vector<double> bilstm_sequence(const LstmWeights& fwd, const LstmWeights& bwd,
                                    std::span<const double> input, std::size_t length) {
  require(fwd.input_dim == bwd.input_dim, "bilstm_sequence: direction input dims differ");
  require(input.size() == length * fwd.input_dim, "bilstm_sequence: input shape mismatch");
  const std::size_t width = fwd.hidden + bwd.hidden;
  std::vector<double> out(length * width);
  LstmScratch a, b;
  a.resize(1, fwd.hidden);
  b.resize(1, bwd.hidden);
  lstm_scan(fwd, input.data(), length, 1, Direction::kForward, a, out.data(), width, nullptr);
  lstm_scan(bwd, input.data(), length, 1, Direction::kBackward, b, out.data() + fwd.hidden,
            width, nullptr);
  return out;
}

}  // namespace melstream::nn
