#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

namespace cvqkd::model {

/// Transmitter/LO laser pair. Heterodyne detection only sees the beat, so
/// the simulated phase-noise process uses the combined linewidth.
struct LaserPair {
    double tx_linewidth = 100.0;       // Hz
    double lo_linewidth = 100.0;       // Hz
    double frequency_offset = 200e6;   // Hz, beat between optical carrier and LO

    double combined_linewidth() const { return tx_linewidth + lo_linewidth; }
};

/// Unwrapped phase trajectory, one value per sample (or per symbol).
struct PhaseTrace {
    std::vector<double> values;  // radians
    double rate = 0.0;           // Hz

    std::size_t size() const { return values.size(); }
};

/// Ground-truth channel description. `eta` is the transmission-channel
/// (fibre) transmittance; the receiver's trusted optical efficiency is
/// kept separate so the key-rate bookkeeping can credit it back. Both
/// attenuate the waveform; all noises are added at the measured plane, so
/// the estimators see eta*detector_efficiency and excess_photons directly.
struct ChannelParams {
    double eta = 0.398;                     // 20 km fibre at 0.2 dB/km
    double excess_photons = 0.0005;         // e, per-quadrature SNU at output
    LaserPair lasers;
    double electronic_noise_photons = 0.022;  // t, per-quadrature SNU
    double detector_efficiency = 0.84;

    double total_transmittance() const { return eta * detector_efficiency; }
    void validate() const;  // throws std::invalid_argument on bad ranges
};

/// Sigma-point spread parameters of the scaled unscented transform.
struct UtParams {
    double alpha = 1.0;
    double beta_ut = 2.0;   // Gaussian-optimal
    double kappa_ut = 0.0;  // 1-D state
};

/// Gaussian belief over the pilot phase plus the fixed model parameters
/// of the measurement y_k = A sin(freq_offset * k + theta) + n_k.
struct UkfState {
    double mean = 0.0;             // rad
    double variance = 0.0;         // rad^2
    double process_noise = 0.0;    // Q, rad^2 per symbol
    double measurement_noise = 0.0;  // R, SNU variance
    double pilot_amplitude = 0.0;  // A, SNU
    double freq_offset = 0.0;      // Delta_omega * T_s, rad per sample
    double sample_period = 0.0;    // T_s, seconds
    UtParams ut;
};

/// Wiener (random-walk) laser phase noise for a Lorentzian lineshape:
/// i.i.d. Gaussian increments of variance 2*pi*linewidth*sample_period,
/// theta_0 = 0. Deterministic for a given seed.
PhaseTrace wiener_phase_noise(std::size_t n, double linewidth, double sample_period,
                              std::uint64_t seed);

/// Noiseless part of the heterodyne pilot measurement,
/// A * sin(Delta_omega * k * T_s + theta). Pure function, |result| <= A.
double measurement_model(double theta, std::size_t k, const UkfState& state);

inline constexpr double kPi = std::numbers::pi;

}  // namespace cvqkd::model
