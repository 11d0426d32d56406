#include "cvqkd/txchain.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cvqkd/dsp.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/model.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd::txchain {

using model::kPi;

void FrameConfig::validate() const {
    if (!(symbol_rate > 0.0 && dac_rate > 0.0 && adc_rate > 0.0))
        throw std::invalid_argument("FrameConfig: rates must be positive");
    if (std::fmod(dac_rate, symbol_rate) != 0.0)
        throw std::invalid_argument("FrameConfig: dac_rate must be an integer multiple of symbol_rate");
    if (adc_rate != 2.0 * dac_rate)
        throw std::invalid_argument("FrameConfig: adc_rate must be exactly 2x dac_rate");
    if (!(rrc_rolloff > 0.0 && rrc_rolloff <= 1.0))
        throw std::invalid_argument("FrameConfig: rolloff out of range");
    if (frame_symbols == 0)
        throw std::invalid_argument("FrameConfig: zero-length frame");
    if (rrc_taps < 3 || rrc_taps % 2 == 0)
        throw std::invalid_argument("FrameConfig: rrc_taps must be odd and >= 3");
    if (!(mean_photons > 0.0))
        throw std::invalid_argument("FrameConfig: mean_photons must be > 0");
    if (pilot_amplitude < 0.0)
        throw std::invalid_argument("FrameConfig: pilot_amplitude must be >= 0");
    const double nyq = 0.5 * dac_rate;
    if (quantum_band_low() <= 0.0 || quantum_band_high() >= nyq || pilot_freq >= nyq)
        throw std::invalid_argument("FrameConfig: bands must lie inside (0, Nyquist)");
    if (pilot_freq >= quantum_band_low() && pilot_freq <= quantum_band_high())
        throw std::invalid_argument("FrameConfig: pilot overlaps the quantum band");
}

SymbolFrame generate_symbols(const FrameConfig& config, std::uint64_t seed) {
    if (config.frame_symbols == 0)
        throw std::invalid_argument("generate_symbols: zero-length frame");
    SymbolFrame frame;
    frame.seed = seed;
    frame.alice_symbols.resize(config.frame_symbols);
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(config.modulation_variance));
    for (auto& s : frame.alice_symbols) {
        const double i = gauss(rng);
        const double q = gauss(rng);
        s = cd(i, q);
    }
    return frame;
}

std::vector<cd> cazac_sequence(std::size_t length, std::uint32_t root) {
    if (length == 0) throw std::invalid_argument("cazac_sequence: length must be > 0");
    if (std::gcd(static_cast<std::uint64_t>(root), static_cast<std::uint64_t>(length)) != 1)
        throw std::invalid_argument("cazac_sequence: root must be coprime with length");

    // Zadoff-Chu. Phase exponents reduced mod 2L in integer arithmetic to
    // keep the trig arguments small.
    const std::uint64_t L = length;
    std::vector<cd> seq(length);
    for (std::uint64_t k = 0; k < L; ++k) {
        const std::uint64_t quad = (L % 2 == 0) ? (root * k % (2 * L)) * k % (2 * L)
                                                : (root * k % (2 * L)) * (k + 1) % (2 * L);
        const double phase = -kPi * static_cast<double>(quad) / static_cast<double>(L);
        seq[k] = std::polar(1.0, phase);
    }
    return seq;
}

double symbol_scale(const FrameConfig& config) {
    // Recovered per-quadrature symbol variance at eta = 1 equals
    // scale^2 * (cascade gain)^2 = scale^2 * adc/dac; photons = that.
    return std::sqrt(config.mean_photons * config.dac_rate / config.adc_rate /
                     config.modulation_variance);
}

Waveform synthesize_frame(const FrameConfig& config, const SymbolFrame& frame) {
    config.validate();
    if (frame.alice_symbols.size() != config.frame_symbols)
        throw std::invalid_argument("synthesize_frame: symbol count mismatch");

    const double g = symbol_scale(config);
    std::vector<cd> stream;
    stream.reserve(config.total_symbols());
    const auto header = cazac_sequence(config.cazac_symbols, config.cazac_root);
    const double header_gain = g * std::sqrt(2.0 * config.modulation_variance);
    for (const cd& h : header) stream.push_back(header_gain * h);
    for (const cd& s : frame.alice_symbols) stream.push_back(g * s);

    const auto kernel = dsp::rrc_kernel(config.rrc_rolloff, config.sps_dac(),
                                        (config.rrc_taps - 1) / config.sps_dac());
    const std::size_t n = config.dac_samples();
    auto samples = dsp::shape_symbols(stream, config.sps_dac(), kernel, n,
                                      static_cast<std::ptrdiff_t>(config.guard_samples));

    const double wq = 2.0 * kPi * config.quantum_shift / config.dac_rate;
    const double wp = 2.0 * kPi * config.pilot_freq / config.dac_rate;
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = static_cast<double>(i);
        samples[i] *= std::polar(1.0, wq * t);
        samples[i] += config.pilot_amplitude * std::polar(1.0, wp * t);
    }

    Waveform wave;
    wave.rate = config.dac_rate;
    wave.samples = std::move(samples);
    return wave;
}

double measure_mean_photons(const Waveform& wave, const FrameConfig& config,
                            double band_center) {
    const auto spectrum = fft::forward_copy(wave.samples);
    const std::size_t n = spectrum.size();
    const double lo = band_center - (config.quantum_shift - config.quantum_band_low());
    const double hi = band_center + (config.quantum_band_high() - config.quantum_shift);
    double energy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft::bin_frequency(k, n, wave.rate);
        if (f >= lo && f <= hi) energy += std::norm(spectrum[k]);
    }
    energy /= static_cast<double>(n);  // total in-band energy over the record
    return energy * (config.adc_rate / wave.rate) /
           (2.0 * static_cast<double>(config.total_symbols()));
}

}  // namespace cvqkd::txchain
