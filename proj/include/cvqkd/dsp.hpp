#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cvqkd/model.hpp"
#include "cvqkd/waveform.hpp"

namespace cvqkd::dsp {

enum class FilterKind { BandPass, LowPass, Rrc };

/// Filter description (frequency-domain masks for band/low-pass, FIR
/// kernel for RRC shaping).
struct FilterSpec {
    double center = 0.0;     // Hz
    double bandwidth = 0.0;  // Hz
    FilterKind kind = FilterKind::BandPass;
    double rolloff = 0.4;    // RRC only
    int taps = 129;          // FIR resolution (RRC)
};

/// Result of CAZAC header correlation.
struct SyncResult {
    std::ptrdiff_t sample_offset = 0;  // start of the header in samples
    double bulk_phase = 0.0;           // radians
    double peak_metric = 0.0;          // normalized correlation in [0, 1]
};

/// Decimation grid mapping symbol index k to sample index offset + k*sps.
struct SymbolGrid {
    std::ptrdiff_t offset = 0;
    int sps = 1;
    std::size_t count = 0;
};

/// Unit-energy root-raised-cosine kernel, length span_symbols*sps + 1
/// (odd, centered). The tx/rx cascade sampled at symbol spacing is a
/// discrete delta.
std::vector<double> rrc_kernel(double rolloff, int samples_per_symbol, int span_symbols);

/// Frequency-domain band-pass with raised-cosine edges (transition width
/// 5% of bandwidth, centered on the nominal band edge).
Waveform band_pass(const Waveform& wave, double center, double bandwidth);

/// Mask used by band_pass, exposed so callers can fuse it with other
/// frequency-domain operations.
std::vector<double> band_mask(std::size_t n, double rate, double center, double bandwidth);

/// Instantaneous phase of a real signal via the analytic signal,
/// theta_k = atan2(H(y)_k, y_k), unwrapped. Only the real part of the
/// input is used. A DC input yields a finite all-zero trace.
model::PhaseTrace hilbert_phase(const Waveform& real_wave);

/// In-place nearest-multiple-of-2pi phase unwrap.
void unwrap(std::span<double> phase);

/// Least-squares line fit y ~ intercept + slope*k over [first, last).
/// Returns {slope per sample, intercept}.
std::pair<double, double> fit_line(std::span<const double> y, std::size_t first,
                                   std::size_t last);

/// Subtract the least-squares line (fitted over the full span) in place;
/// returns the removed {slope, intercept}.
std::pair<double, double> detrend(std::span<double> y);

struct FreqEstimateOptions {
    double coarse_bandwidth = 40e6;  // Hz, wide first-pass filter
    double fine_bandwidth = 10e6;    // Hz, target filter of the second pass
    double edge_trim = 0.01;         // fraction of samples excluded per edge in the fit
};

/// Two-pass pilot frequency estimate: spectral peak for the approximate
/// location, then Hilbert phase + linear fit through a wide and a target
/// band-pass filter. Throws "no detectable tone" when the spectral peak
/// does not clear the noise floor by 3 dB.
double estimate_frequency_offset(const Waveform& pilot_wave,
                                 const FreqEstimateOptions& options = {});

/// Multiply by exp(-j 2 pi freq t). Exact and energy-preserving.
Waveform shift_to_baseband(const Waveform& wave, double freq);

/// Frequency-domain division by sqrt(PSD). The PSD is per-bin expected
/// power, |X_k|^2 / n, one entry per FFT bin of the input; all bins must
/// be strictly positive.
Waveform whiten(const Waveform& wave, std::span<const double> noise_spectrum);

/// Full cross-correlation search for a symbol-spaced header inside a
/// (matched-filtered) waveform. Throws "sync not found" when the best
/// normalized peak is below 0.5.
SyncResult synchronize(const Waveform& wave, std::span<const cd> header, int sps);

/// Same as synchronize but only offsets within [expected - radius,
/// expected + radius] are considered.
SyncResult synchronize_near(const Waveform& wave, std::span<const cd> header, int sps,
                            std::ptrdiff_t expected, std::ptrdiff_t radius);

/// Plain decimation at grid instants (one value per symbol).
std::vector<cd> downsample_to_symbols(const Waveform& wave, const SymbolGrid& grid);

/// Decimating FIR: matched filter evaluated only at grid instants
/// ("same" alignment, odd centered kernel).
std::vector<cd> matched_filter_decimate(const Waveform& wave, std::span<const double> kernel,
                                        const SymbolGrid& grid);

/// Exact 2x band-limited upsampling via FFT zero padding.
Waveform resample_double(const Waveform& wave);

/// Linear convolution with a real kernel, "same" alignment (FFT-based).
std::vector<cd> conv_same(std::span<const cd> x, std::span<const double> kernel);

/// Upsample-by-sps + FIR shaping in one polyphase pass: places symbol k
/// at sample offset + k*sps of a length-n output and convolves with the
/// centered kernel.
std::vector<cd> shape_symbols(std::span<const cd> symbols, int sps,
                              std::span<const double> kernel, std::size_t n,
                              std::ptrdiff_t offset);

}  // namespace cvqkd::dsp
