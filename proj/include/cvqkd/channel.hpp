#pragma once

#include <cstdint>

#include "cvqkd/model.hpp"
#include "cvqkd/txchain.hpp"
#include "cvqkd/waveform.hpp"

namespace cvqkd::channel {

/// Post-detection record: waveform in SNU at the receiver rate plus the
/// ground-truth phase trajectory for diagnostics.
struct ReceptionRecord {
    Waveform waveform;
    model::PhaseTrace true_phase;  // one entry per output sample
    model::ChannelParams channel;
    std::uint64_t seed = 0;
};

/// Fibre + heterodyne receiver: attenuation by eta * detector_efficiency,
/// frequency offset and Wiener phase-noise rotation, then vacuum (1),
/// excess (e) and electronic (t) noise, each per quadrature, added at the
/// measured plane. Deterministic for a given seed.
ReceptionRecord apply_channel(const Waveform& wave, const model::ChannelParams& params,
                              std::uint64_t seed);

/// Pilot SNR in dB: spectral line power over the total noise power inside
/// a band of the given width centered on the detected line. Returns
/// -100 dB when no line clears the noise floor by 3 dB. Throws when the
/// band would overlap the quantum signal band.
double snr_pilot(const ReceptionRecord& record, double bandwidth,
                 const txchain::FrameConfig& config);

/// Spectral-line bookkeeping shared by snr_pilot and the receiver
/// pipeline: integrated line power (baseline subtracted, covering the
/// phase-noise skirt out to guard_hz) and the noise PSD per bin. The
/// noise floor is taken from an annulus just outside the analysis band so
/// the pilot skirt does not count as noise; bins whose frequency falls in
/// [exclude_lo, exclude_hi] (the quantum band) are skipped, with an
/// in-band fallback when the annulus is empty.
struct LineAnalysis {
    double line_power = 0.0;      // sum of |X_k|^2 over the line region
    double noise_per_bin = 0.0;   // mean |X_k|^2 of noise bins
    std::size_t noise_bins = 0;
};

LineAnalysis analyze_spectral_line(const std::vector<double>& power, double rate,
                                   std::size_t peak_bin, double bandwidth, double guard_hz,
                                   double exclude_lo, double exclude_hi);

}  // namespace cvqkd::channel
