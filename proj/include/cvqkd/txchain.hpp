#pragma once

#include <cstdint>
#include <vector>

#include "cvqkd/waveform.hpp"

namespace cvqkd::txchain {

/// Frame synthesis parameters. Defaults mirror the experiment: 50 MBaud
/// Gaussian symbols shifted to 60 MHz, a pilot line at 130 MHz, RRC
/// shaping with roll-off 0.4 at 500 MS/s, 100k-symbol frames with a
/// 10k-symbol CAZAC header.
struct FrameConfig {
    double symbol_rate = 50e6;
    double dac_rate = 500e6;
    double adc_rate = 1e9;
    double quantum_shift = 60e6;   // Omega_q / 2 pi
    double pilot_freq = 130e6;     // Omega_p / 2 pi
    double rrc_rolloff = 0.4;
    std::size_t frame_symbols = 100'000;
    std::size_t cazac_symbols = 10'000;
    std::uint32_t cazac_root = 1;
    double modulation_variance = 1.0;  // per-quadrature symbol variance before scaling
    double mean_photons = 2.73;        // N at the quantum channel input
    double pilot_amplitude = 1.1;      // SNU, transmitted
    int rrc_taps = 129;                // at DAC rate
    // Pilot/noise-only padding around the frame so that narrow-band
    // filtering at the receiver does not ring into the payload.
    std::size_t guard_samples = 50'000;  // at DAC rate, each side

    int sps_dac() const { return static_cast<int>(dac_rate / symbol_rate); }
    int sps_adc() const { return static_cast<int>(adc_rate / symbol_rate); }
    std::size_t total_symbols() const { return frame_symbols + cazac_symbols; }
    std::size_t dac_samples() const {
        return 2 * guard_samples + total_symbols() * static_cast<std::size_t>(sps_dac());
    }
    double quantum_band_low() const {
        return quantum_shift - 0.5 * (1.0 + rrc_rolloff) * symbol_rate;
    }
    double quantum_band_high() const {
        return quantum_shift + 0.5 * (1.0 + rrc_rolloff) * symbol_rate;
    }
    void validate() const;  // throws std::invalid_argument
};

/// Alice's Gaussian quantum symbols (payload only, header excluded).
struct SymbolFrame {
    std::vector<cd> alice_symbols;
    std::uint64_t seed = 0;
};

/// I/Q-independent Gaussian symbols, each quadrature zero-mean with the
/// configured modulation variance. Deterministic for a given seed.
SymbolFrame generate_symbols(const FrameConfig& config, std::uint64_t seed);

/// Zadoff-Chu constant-amplitude zero-autocorrelation sequence. Root must
/// be coprime with the length.
std::vector<cd> cazac_sequence(std::size_t length, std::uint32_t root);

/// Full transmit frame at DAC rate: CAZAC header + payload, RRC shaped,
/// shifted to the quantum band, pilot tone added, quantum power scaled to
/// mean_photons. Guard padding carries the pilot only.
Waveform synthesize_frame(const FrameConfig& config, const SymbolFrame& frame);

/// Symbol scale factor applied during synthesis so that the recovered
/// per-quadrature symbol variance at unit transmittance equals
/// mean_photons under the SNU convention.
double symbol_scale(const FrameConfig& config);

/// Mean photon number per symbol inferred from the waveform power inside
/// the quantum band centered at `band_center`. The SNU scale is pinned at
/// the ADC rate, so photons = in-band power * (adc_rate / symbol_rate) / 2
/// independent of the waveform's own sample rate.
double measure_mean_photons(const Waveform& wave, const FrameConfig& config,
                            double band_center);

}  // namespace cvqkd::txchain
