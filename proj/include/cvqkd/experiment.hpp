#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/model.hpp"
#include "cvqkd/recovery.hpp"
#include "cvqkd/secrecy.hpp"
#include "cvqkd/txchain.hpp"
#include "cvqkd/waveform.hpp"

namespace cvqkd::experiment {

/// Carrier-recovery settings of the experiment runner. The pilot is
/// shifted to a small known intermediate frequency rather than exactly to
/// DC so the scalar sin() measurement stays observable; the model's
/// Delta_omega term carries that IF.
struct UkfSettings {
    double linewidth_guess = 200.0;  // Hz; sweep default = true combined linewidth
    model::UtParams ut;
    double initial_mean = 0.0;
    double initial_variance = model::kPi * model::kPi;
    bool adapt_noise = false;
    bool adapt_r = false;
    double if_freq = 250e3;  // Hz, intermediate frequency fed to the UKF model
};

struct SecrecySettings {
    double beta = 0.95;
    // Trusted electronic photon number subtracted from e_hat; negative
    // means "use the calibration measurement t_hat".
    double trusted_t = -1.0;
};

struct ExperimentConfig {
    txchain::FrameConfig frame;
    model::ChannelParams channel;
    UkfSettings ukf;
    SecrecySettings secrecy;
    std::vector<double> sweep_bandwidths = {0.5e6, 1e6,  2e6,  4e6,
                                            8e6,   16e6, 32e6, 48e6};
    std::size_t frames_per_point = 50;
    bool use_reference = true;
    bool use_ukf = true;
    std::uint64_t seed_base = 1;
    std::string output_path = "sweep.csv";
    bool full_scale = false;  // paper-scale frame count (1000 per point)
    std::size_t calibration_frames = 8;
    std::size_t threads = 0;  // 0 = hardware concurrency

    std::size_t effective_frames() const { return full_scale ? 1000 : frames_per_point; }
};

/// Deterministic per-frame seed: base + point * 10^6 + frame.
inline std::uint64_t frame_seed(std::uint64_t base, std::size_t point, std::size_t frame) {
    return base + static_cast<std::uint64_t>(point) * 1'000'000ULL +
           static_cast<std::uint64_t>(frame);
}

/// Receiver calibration from simulated noise-only records: the combined
/// vacuum+electronic PSD shape (unit mean, block averaged), the SNU scale
/// (variance of the shape-whitened vacuum record) and the measured
/// electronic photon number t_hat.
struct CalibrationRecord {
    std::vector<double> shape;  // unit-mean PSD blocks over circular frequency
    double block_hz = 1e6;
    double rate = 1e9;
    double snu_scale = 1.0;
    double t_hat = 0.0;
    double vacuum_variance = 1.0;    // raw per-quadrature
    double combined_variance = 1.0;  // raw per-quadrature, = 1 + t
    double whitened_flatness_db = 0.0;

    double shape_at(double freq) const;
    /// Per-bin PSD (shape * snu_scale) for an n-point FFT at `rate`.
    std::vector<double> materialize(std::size_t n) const;
    static CalibrationRecord flat(double rate);
};

CalibrationRecord run_calibration(const ExperimentConfig& config);

struct FrameEstimate {
    bool ok = false;
    std::string error;
    secrecy::ChannelEstimate est;
    secrecy::CovarianceEstimate cov;
    double sync_metric = 0.0;
    double rms_phase_error = 0.0;  // vs ground truth when available
};

struct FrameOutput {
    double snr_db = 0.0;
    double freq_estimate = 0.0;
    std::ptrdiff_t sync_offset = 0;
    FrameEstimate reference;
    FrameEstimate ukf;
    recovery::TrackResult reference_track;  // kept for replay/diagnostics
    recovery::TrackResult ukf_track;
};

/// Synthesize -> channel -> full receiver DSP -> both recovery methods ->
/// channel parameter estimation, for one frame at one pilot filter
/// bandwidth.
FrameOutput process_frame(const ExperimentConfig& config, const CalibrationRecord& calib,
                          double bandwidth, std::uint64_t seed);

/// Receiver-side processing of an externally supplied record (replay).
/// Alice's symbols are optional; without them only carrier recovery runs.
FrameOutput process_reception(const ExperimentConfig& config, const CalibrationRecord& calib,
                              double bandwidth, const Waveform& rx,
                              const std::vector<cd>* alice_symbols,
                              const model::PhaseTrace* true_phase, bool full_sync);

struct SweepRow {
    double bandwidth_hz = 0.0;
    double snr_pilot_db = 0.0;
    std::string method;
    double e_mean = 0.0;
    double e_std = 0.0;
    double eta_mean = 0.0;
    double key_rate = 0.0;  // bits per symbol, raw (may be negative)
    std::size_t frames = 0;  // frames that survived the pipeline
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                const CalibrationRecord* calibration = nullptr);

/// CSV with the fixed column set
/// snr_pilot_db,method,e_mean,e_std,eta_mean,key_rate,frames
/// sorted by bandwidth then method.
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ConvergenceTrace {
    double guess_hz = 0.0;
    std::vector<double> theta_hat;
    std::vector<double> posterior_std;
    std::size_t converged_at = 0;  // error-based settling symbol (see below)
    std::optional<std::size_t> posterior_converged_at;
    double rms_final = 0.0;  // last 10k symbols vs truth
    double rms_full = 0.0;
};

/// Fig.-2-style study: one synthetic frame of Wiener phase noise at the
/// channel's combined linewidth (plus a 1 rad unknown start offset), the
/// UKF run once per linewidth guess. converged_at is the first symbol
/// after which the windowed RMS tracking error stays below twice the
/// correct guess's steady-state RMS; with the Metropolis-Hastings noise
/// adaptation enabled (the default here) that charges misspecified
/// guesses their full parameter-learning transient.
struct ConvergenceResult {
    std::vector<double> theta_true;
    std::vector<ConvergenceTrace> traces;
    std::size_t correct_index = 0;
    double threshold = 0.0;
};

ConvergenceResult run_convergence(const ExperimentConfig& config,
                                  const std::vector<double>& guesses, double snr_db = 26.0,
                                  bool adapt = true);

/// CSV of (guess_hz, symbol_index, theta_hat, posterior_std) rows,
/// trajectories decimated.
std::string convergence_csv(const ConvergenceResult& result, std::size_t decimate = 10);

struct CalibrationReport {
    CalibrationRecord record;
    std::string text;
};

CalibrationReport calibration_report(const ExperimentConfig& config);

}  // namespace cvqkd::experiment
