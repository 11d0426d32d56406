#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cvqkd/dsp.hpp"
#include "cvqkd/model.hpp"
#include "cvqkd/rng.hpp"
#include "cvqkd/waveform.hpp"

namespace cvqkd::recovery {

/// Unscented Kalman filter settings. The filter tracks the scalar pilot
/// phase theta through y_k = A sin(Delta_omega k + theta_k) + n_k with a
/// random-walk transition of variance Q = 2 pi linewidth_guess T_s.
struct UkfConfig {
    double linewidth_guess = 200.0;     // Hz, sets the initial Q
    double measurement_noise = 1.0;     // R, SNU variance (shot-noise calibrated)
    double pilot_amplitude = 1.0;       // A, SNU
    double freq_offset = 0.0;           // Delta_omega * T_s, rad per symbol
    double sample_period = 2e-8;        // T_s, seconds per symbol
    model::UtParams ut;
    double initial_mean = 0.0;
    double initial_variance = model::kPi * model::kPi;  // diffuse blind start
    bool adapt_noise = false;   // Metropolis-Hastings Q adaptation
    bool adapt_r = false;       // also propose R when adapting
    std::size_t adapt_window = 4096;  // innovations per likelihood window
    std::size_t adapt_stride = 256;   // symbols between proposals
    double adapt_proposal_sigma = 0.2;   // log-normal proposal std
    std::uint64_t seed = 1;     // proposal stream (adaptation only)

    model::UkfState initial_state() const;
};

/// Per-symbol phase estimate with its posterior spread. converged_at is
/// the first symbol whose posterior std falls below twice the median
/// posterior std of the final tenth of the frame (empty for the
/// reference method, which has no posterior).
struct TrackResult {
    model::PhaseTrace phase;
    std::vector<double> posterior_std;
    std::optional<std::size_t> converged_at;
    double final_process_noise = 0.0;  // Q after any adaptation
};

/// Sliding innovation history used by the Metropolis-Hastings noise
/// adaptation: innovations nu, squared measurement slopes h2, the
/// filter's own predicted innovation variances s_pred, and the current
/// measurement noise. Proposals are scored by shifting s_pred with the
/// steady-state innovation-variance delta implied by the proposed (Q, R).
struct InnovationWindow {
    std::vector<double> nu;
    std::vector<double> h2;
    std::vector<double> s_pred;
    double r = 1.0;
};

/// Reference method: Hilbert phase of the band-passed pilot, unwrap,
/// least-squares detrend, decimation to the symbol grid.
TrackResult reference_track(const Waveform& pilot_wave, const dsp::SymbolGrid& grid,
                            double symbol_rate);

/// Random-walk time update: mean unchanged, variance grows by Q.
model::UkfState ukf_predict(const model::UkfState& state);

/// Scaled-unscented measurement update against y_k. Returns the posterior
/// state and its mean. The sigma-point spread is clamped at pi/2 so the
/// periodic measurement cannot alias the transform while the belief is
/// still diffuse. Variance is floored at 1e-15 rad^2.
std::pair<model::UkfState, double> ukf_update(const model::UkfState& state, double y_k,
                                              std::size_t k);

/// Sequential predict/update over real-valued symbol-rate pilot samples
/// (the Eq.-3 form; the imaginary part of the downconverted pilot).
TrackResult ukf_track(std::span<const double> pilot_samples, const UkfConfig& config);

/// Same filter consuming complex baseband pilot symbols through the
/// two-component measurement A [cos, sin](Delta_omega k + theta).
TrackResult ukf_track(std::span<const cd> pilot_symbols, const UkfConfig& config);

/// One Metropolis-Hastings step on the process noise (and optionally R):
/// log-normal proposal scored by the Gaussian innovation likelihood over
/// the window under the steady-state filter approximation. Rejection
/// returns the state unchanged.
model::UkfState adapt_noise_step(const model::UkfState& state, const InnovationWindow& window,
                                 Rng& rng, double proposal_sigma, bool adapt_r);

/// Rotate symbols by the negated phase estimate, s_k exp(-j theta_k).
std::vector<cd> compensate(std::span<const cd> symbols, const model::PhaseTrace& phase);

}  // namespace cvqkd::recovery
