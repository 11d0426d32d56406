#include "cvqkd/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "cvqkd/fft.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd::channel {

using model::kPi;

ReceptionRecord apply_channel(const Waveform& wave, const model::ChannelParams& params,
                              std::uint64_t seed) {
    params.validate();
    if (wave.empty()) throw std::invalid_argument("apply_channel: empty waveform");

    const std::size_t n = wave.size();
    ReceptionRecord rec;
    rec.channel = params;
    rec.seed = seed;
    rec.true_phase = model::wiener_phase_noise(n, params.lasers.combined_linewidth(),
                                               1.0 / wave.rate, derive_seed(seed, 1));

    const double gain = std::sqrt(params.total_transmittance());
    const double dw = 2.0 * kPi * params.lasers.frequency_offset / wave.rate;
    const double sigma =
        std::sqrt(1.0 + params.excess_photons + params.electronic_noise_photons);

    Rng rng(derive_seed(seed, 2));
    std::normal_distribution<double> gauss(0.0, sigma);

    rec.waveform.rate = wave.rate;
    rec.waveform.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double phase = dw * static_cast<double>(k) + rec.true_phase.values[k];
        const cd noise(gauss(rng), gauss(rng));
        rec.waveform.samples[k] = gain * wave.samples[k] * std::polar(1.0, phase) + noise;
    }
    return rec;
}

LineAnalysis analyze_spectral_line(const std::vector<double>& power, double rate,
                                   std::size_t peak_bin, double bandwidth, double guard_hz,
                                   double exclude_lo, double exclude_hi) {
    const std::size_t n = power.size();
    const double bin_hz = rate / static_cast<double>(n);
    const auto guard_bins = static_cast<std::ptrdiff_t>(std::ceil(guard_hz / bin_hz));
    const auto pb = static_cast<std::ptrdiff_t>(peak_bin);
    auto wrap = [&](std::ptrdiff_t k) {
        const auto sn = static_cast<std::ptrdiff_t>(n);
        return static_cast<std::size_t>(((k % sn) + sn) % sn);
    };

    LineAnalysis out;

    // Noise floor from an annulus beside the band, clear of the skirt and
    // of the excluded (quantum) region.
    const double inner = std::max(0.55 * bandwidth, 2.0 * guard_hz);
    const double outer = inner + std::max(0.5 * bandwidth, 2.0 * guard_hz);
    double acc = 0.0;
    std::size_t count = 0;
    for (int side : {+1, -1}) {
        for (double d = inner; d <= outer; d += bin_hz) {
            const std::ptrdiff_t k = pb + side * static_cast<std::ptrdiff_t>(d / bin_hz);
            const std::size_t idx = wrap(k);
            const double f = fft::bin_frequency(idx, n, rate);
            if (f >= exclude_lo && f <= exclude_hi) continue;
            acc += power[idx];
            ++count;
        }
    }
    if (count == 0) {
        // fall back to the analysis band itself, line region removed
        const auto scan = static_cast<std::ptrdiff_t>(
            0.5 * std::max(bandwidth, 4.0 * guard_hz) / bin_hz);
        for (std::ptrdiff_t k = pb - scan; k <= pb + scan; ++k) {
            if (std::abs(k - pb) <= guard_bins) continue;
            acc += power[wrap(k)];
            ++count;
        }
    }
    out.noise_bins = count;
    out.noise_per_bin = count ? acc / static_cast<double>(count) : 0.0;

    for (std::ptrdiff_t k = pb - guard_bins; k <= pb + guard_bins; ++k)
        out.line_power += power[wrap(k)];
    out.line_power -= out.noise_per_bin * static_cast<double>(2 * guard_bins + 1);
    out.line_power = std::max(out.line_power, 0.0);
    return out;
}

double snr_pilot(const ReceptionRecord& record, double bandwidth,
                 const txchain::FrameConfig& config) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("snr_pilot: bandwidth must be > 0");

    const auto& wave = record.waveform;
    const std::size_t n = wave.size();
    const auto spectrum = fft::forward_copy(wave.samples);
    std::vector<double> power(n);
    double total = 0.0;
    double peak = 0.0;
    std::size_t peak_bin = 0;
    for (std::size_t k = 0; k < n; ++k) {
        power[k] = std::norm(spectrum[k]);
        total += power[k];
        if (power[k] > peak) {
            peak = power[k];
            peak_bin = k;
        }
    }
    const double mean_power = total / static_cast<double>(n);
    if (peak < 2.0 * mean_power * std::log(static_cast<double>(n)))
        return -100.0;  // no detectable line

    const double f_line = fft::bin_frequency(peak_bin, n, wave.rate);
    const double df = record.channel.lasers.frequency_offset;
    const double q_lo = config.quantum_band_low() + df;
    const double q_hi = config.quantum_band_high() + df;
    if (f_line - 0.5 * bandwidth < q_hi && f_line + 0.5 * bandwidth > q_lo)
        throw std::invalid_argument("snr_pilot: band overlaps the quantum signal");

    const double guard_hz =
        std::max(10e3, 10.0 * record.channel.lasers.combined_linewidth());
    const auto line = analyze_spectral_line(power, wave.rate, peak_bin, bandwidth, guard_hz,
                                            q_lo, q_hi);
    const double band_bins = bandwidth * static_cast<double>(n) / wave.rate;
    const double noise_in_band = line.noise_per_bin * band_bins;
    if (line.line_power <= 0.0 || noise_in_band <= 0.0) return -100.0;
    return 10.0 * std::log10(line.line_power / noise_in_band);
}

}  // namespace cvqkd::channel
