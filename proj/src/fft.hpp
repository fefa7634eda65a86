// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>

namespace melstream::dsp::detail {

// Real-to-half-complex forward transform of n samples (n/2+1 outputs).
// Thread-safe; plans are cached per size.
void rfft(std::size_t n, const double* in, std::complex<double>* out);

// Half-complex-to-real inverse, unnormalized (scaled by n). `in` is copied
// internally and left untouched.
void irfft(std::size_t n, const std::complex<double>* in, double* out);

}  // namespace melstream::dsp::detail
