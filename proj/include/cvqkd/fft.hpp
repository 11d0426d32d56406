#pragma once

#include <vector>

#include "cvqkd/waveform.hpp"

namespace cvqkd::fft {

// In-place FFTs backed by cached FFTW plans (one aligned buffer per
// distinct length per thread; planner calls serialized). Forward is
// unnormalized, inverse divides by n, so inverse(forward(x)) == x.
void forward(std::vector<cd>& data);
void inverse(std::vector<cd>& data);

std::vector<cd> forward_copy(const std::vector<cd>& data);

/// Frequency of FFT bin k for an n-point transform at the given sample
/// rate, in Hz, mapped to (-rate/2, rate/2].
double bin_frequency(std::size_t k, std::size_t n, double rate);

/// Bin index (0..n-1) whose center is closest to frequency f.
std::size_t frequency_bin(double f, std::size_t n, double rate);

}  // namespace cvqkd::fft
