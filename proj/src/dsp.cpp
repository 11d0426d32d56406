#include "cvqkd/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cvqkd/fft.hpp"

namespace cvqkd::dsp {

using model::kPi;

std::vector<double> rrc_kernel(double rolloff, int samples_per_symbol, int span_symbols) {
    if (!(rolloff > 0.0 && rolloff <= 1.0))
        throw std::invalid_argument("rrc_kernel: rolloff must be in (0, 1]");
    if (samples_per_symbol < 2)
        throw std::invalid_argument("rrc_kernel: need at least 2 samples per symbol");
    if (span_symbols < 1)
        throw std::invalid_argument("rrc_kernel: span must be >= 1 symbol");

    const int n = span_symbols * samples_per_symbol + 1;
    const int half = n / 2;
    std::vector<double> h(n);
    const double b = rolloff;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i - half) / samples_per_symbol;  // in symbols
        const double den = 1.0 - 16.0 * b * b * t * t;
        if (t == 0.0) {
            h[i] = 1.0 - b + 4.0 * b / kPi;
        } else if (std::abs(den) < 1e-12) {
            // t = +-1/(4 rolloff) singularity
            const double arg = kPi / (4.0 * b);
            h[i] = (b / std::sqrt(2.0)) *
                   ((1.0 + 2.0 / kPi) * std::sin(arg) + (1.0 - 2.0 / kPi) * std::cos(arg));
        } else {
            h[i] = (std::sin(kPi * t * (1.0 - b)) +
                    4.0 * b * t * std::cos(kPi * t * (1.0 + b))) /
                   (kPi * t * den);
        }
    }
    const double energy = std::inner_product(h.begin(), h.end(), h.begin(), 0.0);
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : h) v *= scale;
    return h;
}

std::vector<double> band_mask(std::size_t n, double rate, double center, double bandwidth) {
    const double half = 0.5 * bandwidth;
    const double edge = 0.05 * bandwidth;  // transition width straddling the edge
    std::vector<double> mask(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double d = std::abs(fft::bin_frequency(k, n, rate) - center);
        if (d <= half - 0.5 * edge) {
            mask[k] = 1.0;
        } else if (d >= half + 0.5 * edge) {
            mask[k] = 0.0;
        } else {
            const double x = (d - (half - 0.5 * edge)) / edge;  // 0..1 across the edge
            mask[k] = 0.5 * (1.0 + std::cos(kPi * x));
        }
    }
    return mask;
}

Waveform band_pass(const Waveform& wave, double center, double bandwidth) {
    if (!(bandwidth > 0.0))
        throw std::invalid_argument("band_pass: bandwidth must be > 0");
    if (std::abs(center) + 0.5 * bandwidth > 0.5 * wave.rate)
        throw std::invalid_argument("band_pass: band extends past Nyquist");

    Waveform out = wave;
    fft::forward(out.samples);
    const auto mask = band_mask(out.samples.size(), wave.rate, center, bandwidth);
    for (std::size_t k = 0; k < out.samples.size(); ++k) out.samples[k] *= mask[k];
    fft::inverse(out.samples);
    return out;
}

model::PhaseTrace hilbert_phase(const Waveform& real_wave) {
    const std::size_t n = real_wave.size();
    model::PhaseTrace trace;
    trace.rate = real_wave.rate;
    trace.values.resize(n, 0.0);
    if (n == 0) return trace;

    std::vector<cd> analytic(n);
    for (std::size_t k = 0; k < n; ++k) analytic[k] = cd(real_wave.samples[k].real(), 0.0);
    fft::forward(analytic);
    // Zero negative frequencies, double positive ones, keep DC/Nyquist.
    for (std::size_t k = 1; k < (n + 1) / 2; ++k) analytic[k] *= 2.0;
    for (std::size_t k = n / 2 + 1; k < n; ++k) analytic[k] = 0.0;
    fft::inverse(analytic);

    for (std::size_t k = 0; k < n; ++k)
        trace.values[k] = std::atan2(analytic[k].imag(), analytic[k].real());
    unwrap(trace.values);
    return trace;
}

void unwrap(std::span<double> phase) {
    double shift = 0.0;
    for (std::size_t k = 1; k < phase.size(); ++k) {
        const double d = phase[k] + shift - phase[k - 1];
        shift -= 2.0 * kPi * std::round(d / (2.0 * kPi));
        phase[k] += shift;
    }
}

std::pair<double, double> fit_line(std::span<const double> y, std::size_t first,
                                   std::size_t last) {
    last = std::min(last, y.size());
    if (last <= first + 1) throw std::invalid_argument("fit_line: empty range");
    const double n = static_cast<double>(last - first);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = first; k < last; ++k) {
        const double x = static_cast<double>(k);
        sx += x;
        sy += y[k];
        sxx += x * x;
        sxy += x * y[k];
    }
    const double den = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / den;
    const double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

std::pair<double, double> detrend(std::span<double> y) {
    auto [slope, intercept] = fit_line(y, 0, y.size());
    for (std::size_t k = 0; k < y.size(); ++k)
        y[k] -= intercept + slope * static_cast<double>(k);
    return {slope, intercept};
}

namespace {

double phase_slope_hz(const Waveform& wave, double trim_frac) {
    std::vector<double> phase(wave.size());
    for (std::size_t k = 0; k < wave.size(); ++k)
        phase[k] = std::atan2(wave.samples[k].imag(), wave.samples[k].real());
    unwrap(phase);
    const auto trim = static_cast<std::size_t>(trim_frac * static_cast<double>(phase.size()));
    auto [slope, intercept] = fit_line(phase, trim, phase.size() - trim);
    (void)intercept;
    return slope * wave.rate / (2.0 * kPi);
}

}  // namespace

double estimate_frequency_offset(const Waveform& pilot_wave,
                                 const FreqEstimateOptions& options) {
    if (pilot_wave.empty())
        throw std::invalid_argument("estimate_frequency_offset: empty input");

    auto spectrum = fft::forward_copy(pilot_wave.samples);
    const std::size_t n = spectrum.size();
    double total = 0.0;
    double peak = 0.0;
    std::size_t peak_bin = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = std::norm(spectrum[k]);
        total += p;
        if (p > peak) {
            peak = p;
            peak_bin = k;
        }
    }
    // Expected maximum of n exponential noise bins is mean * ln(n); a real
    // line has to clear that floor by 3 dB.
    const double floor = (total / static_cast<double>(n)) * std::log(static_cast<double>(n));
    if (peak < 2.0 * floor)
        throw std::runtime_error("estimate_frequency_offset: no detectable tone");

    double f = fft::bin_frequency(peak_bin, n, pilot_wave.rate);
    const double widths[2] = {options.coarse_bandwidth, options.fine_bandwidth};
    for (double bw : widths) {
        const double half_nyq = 0.5 * pilot_wave.rate;
        const double usable = std::min(bw, 2.0 * (half_nyq - std::abs(f)));
        if (usable <= 0.0) break;
        Waveform filtered = band_pass(pilot_wave, f, usable);
        f = phase_slope_hz(filtered, options.edge_trim);
    }
    return f;
}

Waveform shift_to_baseband(const Waveform& wave, double freq) {
    Waveform out = wave;
    const double step = -2.0 * kPi * freq / wave.rate;
    for (std::size_t k = 0; k < out.samples.size(); ++k)
        out.samples[k] *= std::polar(1.0, step * static_cast<double>(k));
    return out;
}

Waveform whiten(const Waveform& wave, std::span<const double> noise_spectrum) {
    if (noise_spectrum.size() != wave.size())
        throw std::invalid_argument("whiten: PSD length must match the waveform");
    for (double v : noise_spectrum)
        if (!(v > 0.0)) throw std::invalid_argument("whiten: PSD must be strictly positive");

    Waveform out = wave;
    fft::forward(out.samples);
    for (std::size_t k = 0; k < out.samples.size(); ++k)
        out.samples[k] /= std::sqrt(noise_spectrum[k]);
    fft::inverse(out.samples);
    return out;
}

namespace {

std::size_t next_fast_len(std::size_t n) {
    for (;; ++n) {
        std::size_t m = n;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (m % p == 0) m /= p;
        if (m == 1) return n;
    }
}

SyncResult score_offset(const Waveform& wave, std::span<const cd> header, int sps,
                        std::ptrdiff_t offset) {
    cd corr = 0.0;
    double energy = 0.0;
    for (std::size_t k = 0; k < header.size(); ++k) {
        const auto idx = offset + static_cast<std::ptrdiff_t>(k) * sps;
        const cd v = wave.samples[static_cast<std::size_t>(idx)];
        corr += v * std::conj(header[k]);
        energy += std::norm(v);
    }
    double header_energy = 0.0;
    for (const cd& h : header) header_energy += std::norm(h);
    SyncResult res;
    res.sample_offset = offset;
    res.bulk_phase = std::arg(corr);
    res.peak_metric = (energy > 0.0 && header_energy > 0.0)
                          ? std::abs(corr) / std::sqrt(energy * header_energy)
                          : 0.0;
    return res;
}

}  // namespace

SyncResult synchronize(const Waveform& wave, std::span<const cd> header, int sps) {
    if (header.empty() || wave.empty())
        throw std::invalid_argument("synchronize: empty input");
    const std::size_t span = (header.size() - 1) * static_cast<std::size_t>(sps) + 1;
    if (span > wave.size())
        throw std::invalid_argument("synchronize: header longer than waveform");

    // Sparse-template cross-correlation via FFT over all sample lags.
    const std::size_t nfft = next_fast_len(wave.size() + span);
    std::vector<cd> a(nfft, 0.0);
    std::copy(wave.samples.begin(), wave.samples.end(), a.begin());
    std::vector<cd> b(nfft, 0.0);
    for (std::size_t k = 0; k < header.size(); ++k)
        b[k * static_cast<std::size_t>(sps)] = header[k];
    fft::forward(a);
    fft::forward(b);
    for (std::size_t k = 0; k < nfft; ++k) a[k] *= std::conj(b[k]);
    fft::inverse(a);

    const std::size_t max_offset = wave.size() - span;
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t d = 0; d <= max_offset; ++d) {
        const double m = std::abs(a[d]);
        if (m > best_mag) {
            best_mag = m;
            best = d;
        }
    }
    SyncResult res = score_offset(wave, header, sps, static_cast<std::ptrdiff_t>(best));
    if (res.peak_metric < 0.5) throw std::runtime_error("synchronize: sync not found");
    return res;
}

SyncResult synchronize_near(const Waveform& wave, std::span<const cd> header, int sps,
                            std::ptrdiff_t expected, std::ptrdiff_t radius) {
    if (header.empty()) throw std::invalid_argument("synchronize_near: empty header");
    const auto span = static_cast<std::ptrdiff_t>(header.size() - 1) * sps + 1;
    SyncResult best;
    best.peak_metric = -1.0;
    for (std::ptrdiff_t d = expected - radius; d <= expected + radius; ++d) {
        if (d < 0 || d + span > static_cast<std::ptrdiff_t>(wave.size())) continue;
        SyncResult res = score_offset(wave, header, sps, d);
        if (res.peak_metric > best.peak_metric) best = res;
    }
    if (best.peak_metric < 0.5) throw std::runtime_error("synchronize: sync not found");
    return best;
}

std::vector<cd> downsample_to_symbols(const Waveform& wave, const SymbolGrid& grid) {
    const auto last = grid.offset + static_cast<std::ptrdiff_t>(grid.count - 1) * grid.sps;
    if (grid.offset < 0 || grid.count == 0 ||
        last >= static_cast<std::ptrdiff_t>(wave.size()))
        throw std::out_of_range("downsample_to_symbols: grid outside waveform");
    std::vector<cd> out(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k)
        out[k] = wave.samples[static_cast<std::size_t>(grid.offset) + k * grid.sps];
    return out;
}

std::vector<cd> matched_filter_decimate(const Waveform& wave, std::span<const double> kernel,
                                        const SymbolGrid& grid) {
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto n = static_cast<std::ptrdiff_t>(wave.size());
    std::vector<cd> out(grid.count, 0.0);
    for (std::size_t k = 0; k < grid.count; ++k) {
        const std::ptrdiff_t center = grid.offset + static_cast<std::ptrdiff_t>(k) * grid.sps;
        cd acc = 0.0;
        const std::ptrdiff_t m0 = std::max<std::ptrdiff_t>(0, half - center);
        const std::ptrdiff_t m1 =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(kernel.size()),
                                     n + half - center);
        for (std::ptrdiff_t m = m0; m < m1; ++m)
            acc += kernel[static_cast<std::size_t>(m)] *
                   wave.samples[static_cast<std::size_t>(center + m - half)];
        out[k] = acc;
    }
    return out;
}

Waveform resample_double(const Waveform& wave) {
    const std::size_t n = wave.size();
    Waveform out;
    out.rate = 2.0 * wave.rate;
    if (n == 0) return out;

    auto spectrum = fft::forward_copy(wave.samples);
    std::vector<cd> padded(2 * n, 0.0);
    const std::size_t half = n / 2;
    for (std::size_t k = 0; k <= half; ++k) padded[k] = spectrum[k];
    for (std::size_t k = half + 1; k < n; ++k) padded[k + n] = spectrum[k];
    if (n % 2 == 0) {
        // split the Nyquist bin between its two images
        padded[half] *= 0.5;
        padded[2 * n - half] = padded[half];
    }
    for (auto& v : padded) v *= 2.0;
    fft::inverse(padded);
    out.samples = std::move(padded);
    return out;
}

std::vector<cd> conv_same(std::span<const cd> x, std::span<const double> kernel) {
    if (x.empty() || kernel.empty()) return {};
    const std::size_t nfft = next_fast_len(x.size() + kernel.size() - 1);
    std::vector<cd> a(nfft, 0.0);
    std::copy(x.begin(), x.end(), a.begin());
    std::vector<cd> b(nfft, 0.0);
    for (std::size_t k = 0; k < kernel.size(); ++k) b[k] = kernel[k];
    fft::forward(a);
    fft::forward(b);
    for (std::size_t k = 0; k < nfft; ++k) a[k] *= b[k];
    fft::inverse(a);
    const std::size_t lead = kernel.size() / 2;
    return {a.begin() + static_cast<std::ptrdiff_t>(lead),
            a.begin() + static_cast<std::ptrdiff_t>(lead + x.size())};
}

std::vector<cd> shape_symbols(std::span<const cd> symbols, int sps,
                              std::span<const double> kernel, std::size_t n,
                              std::ptrdiff_t offset) {
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    std::vector<cd> out(n, 0.0);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const std::ptrdiff_t center = offset + static_cast<std::ptrdiff_t>(k) * sps;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, center - half);
        const std::ptrdiff_t hi =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, center + half);
        for (std::ptrdiff_t i = lo; i <= hi; ++i)
            out[static_cast<std::size_t>(i)] +=
                symbols[k] * kernel[static_cast<std::size_t>(i - center + half)];
    }
    return out;
}

}  // namespace cvqkd::dsp
