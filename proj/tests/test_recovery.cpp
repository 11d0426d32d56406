#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "cvqkd/dsp.hpp"
#include "cvqkd/recovery.hpp"
#include "cvqkd/rng.hpp"

using namespace cvqkd;
namespace rec = cvqkd::recovery;
using model::kPi;

namespace {

// Symbol-rate Eq.-3 measurements for a given phase trajectory.
std::vector<double> synth_measurements(const std::vector<double>& theta, double amplitude,
                                       double freq_offset, double r, std::uint64_t seed) {
    std::vector<double> y(theta.size());
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(r));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        y[k] = amplitude * std::sin(freq_offset * static_cast<double>(k) + theta[k]);
        if (r > 0.0) y[k] += g(rng);
    }
    return y;
}

rec::UkfConfig base_config(double guess_hz, double r) {
    rec::UkfConfig cfg;
    cfg.linewidth_guess = guess_hz;
    cfg.measurement_noise = r;
    cfg.pilot_amplitude = 1.0;
    cfg.freq_offset = 2.0 * kPi * 0.005;  // IF at Rs/200
    cfg.sample_period = 2e-8;
    return cfg;
}

double rms_tail(const std::vector<double>& est, const std::vector<double>& truth,
                std::size_t from) {
    double acc = 0.0;
    for (std::size_t k = from; k < est.size(); ++k) {
        const double d = std::atan2(std::sin(est[k] - truth[k]), std::cos(est[k] - truth[k]));
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(est.size() - from));
}

}  // namespace

TEST_CASE("predict: zero process noise leaves the state unchanged") {
    model::UkfState s;
    s.mean = 0.3;
    s.variance = 0.2;
    s.process_noise = 0.0;
    auto next = rec::ukf_predict(s);
    CHECK(next.mean == s.mean);
    CHECK(next.variance == s.variance);
}

TEST_CASE("predict accumulates Q linearly") {
    model::UkfState s;
    s.variance = 0.0;
    s.process_noise = 1e-6;
    for (int i = 0; i < 100; ++i) s = rec::ukf_predict(s);
    CHECK(s.variance == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("update with an uninformative measurement is a no-op") {
    model::UkfState s;
    s.mean = 0.4;
    s.variance = 0.01;
    s.process_noise = 1e-6;
    s.measurement_noise = 1e12;
    s.pilot_amplitude = 1.0;
    s.freq_offset = 0.3;
    auto [next, theta] = rec::ukf_update(s, 0.77, 5);
    CHECK(std::abs(next.mean - s.mean) < 1e-9);
    CHECK(next.variance <= s.variance);
    CHECK(theta == next.mean);
}

TEST_CASE("update with zero innovation keeps the mean, shrinks the variance") {
    model::UkfState s;
    s.mean = 0.25;
    s.variance = 0.02;
    s.process_noise = 1e-6;
    s.measurement_noise = 1e-3;
    s.pilot_amplitude = 1.0;
    s.freq_offset = 0.1;
    // y equals the predicted measurement mean: compute it via the model at
    // the sigma mean (UT mean of sin differs only at O(P), captured by
    // running the update once and checking the mean stays put).
    const double d = std::sqrt(s.variance);
    const double z0 = model::measurement_model(s.mean, 3, s);
    const double z1 = model::measurement_model(s.mean + d, 3, s);
    const double z2 = model::measurement_model(s.mean - d, 3, s);
    const double zbar = 0.5 * (z1 + z2) + 0.0 * z0;  // alpha=1, kappa=0 weights
    auto [next, theta] = rec::ukf_update(s, zbar, 3);
    CHECK(next.mean == doctest::Approx(s.mean).epsilon(1e-12));
    CHECK(next.variance < s.variance);
    CHECK(theta == next.mean);
}

TEST_CASE("update rejects non-finite measurements") {
    model::UkfState s;
    s.variance = 0.01;
    s.measurement_noise = 1e-3;
    s.pilot_amplitude = 1.0;
    CHECK_THROWS(rec::ukf_update(s, std::nan(""), 0));
}

TEST_CASE("noiseless constant-phase pilot: innovations shrink, fixed point reached") {
    // A constant phase pairs with a small linewidth guess and a pilot
    // already at DC; large Q keeps the sigma spread wide and its sin()
    // curvature bias above 1e-6. The prior must cover only one branch of
    // sin(theta) = y -- with no IF sweep a diffuse prior is bimodal.
    const double truth = 0.8;
    auto cfg = base_config(1.0, 1e-9);
    cfg.freq_offset = 0.0;
    cfg.initial_variance = 0.25;
    std::vector<double> theta(20'000, truth);
    auto y = synth_measurements(theta, 1.0, cfg.freq_offset, 0.0, 0);

    auto track = rec::ukf_track(std::span<const double>(y), cfg);
    const auto& est = track.phase.values;
    // settles onto the true constant within 1e-6
    for (std::size_t k = est.size() - 100; k < est.size(); ++k)
        CHECK(std::abs(est[k] - truth) < 1e-6);

    // error decreases through the transient (sampled checkpoints)
    CHECK(std::abs(est[20] - truth) < std::abs(est[1] - truth) + 1e-12);
    CHECK(std::abs(est[200] - truth) < std::abs(est[20] - truth) + 1e-9);
}

TEST_CASE("posterior variance is positive and non-exploding") {
    auto truth = model::wiener_phase_noise(50'000, 2e3, 2e-8, 5);
    auto cfg = base_config(2e3, 1.26e-3);
    auto y = synth_measurements(truth.values, 1.0, cfg.freq_offset, cfg.measurement_noise, 6);
    auto track = rec::ukf_track(std::span<const double>(y), cfg);

    std::vector<double> sorted = track.posterior_std;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    double mx = 0.0;
    for (double s : track.posterior_std) {
        CHECK(s > 0.0);
        mx = std::max(mx, s);
    }
    // the diffuse start dominates the max; after convergence it stays tight
    const std::size_t from = track.converged_at.value_or(0) + 100;
    double mx_settled = 0.0;
    for (std::size_t k = from; k < track.posterior_std.size(); ++k)
        mx_settled = std::max(mx_settled, track.posterior_std[k]);
    CHECK(mx_settled < 10.0 * median);
    CHECK(track.converged_at.has_value());
}

TEST_CASE("correct linewidth guess beats misspecified guesses on steady RMS") {
    const double true_lw = 2e3;
    auto truth = model::wiener_phase_noise(100'000, true_lw, 2e-8, 11);
    const double r = 1.26e-3;  // 26 dB-equivalent pilot SNR
    auto y = synth_measurements(truth.values, 1.0, 2.0 * kPi * 0.005, r, 12);

    auto run = [&](double guess) {
        auto cfg = base_config(guess, r);
        auto track = rec::ukf_track(std::span<const double>(y), cfg);
        return rms_tail(track.phase.values, truth.values, 10'000);
    };
    const double correct = run(true_lw);
    for (double guess : {20.0, 200.0, 2e4, 2e5}) {
        CAPTURE(guess);
        CHECK(correct <= run(guess) + 1e-12);
    }
}

TEST_CASE("complex-input tracker follows the same trajectory class") {
    auto truth = model::wiener_phase_noise(30'000, 2e3, 2e-8, 21);
    const double r = 1.26e-3;
    auto cfg = base_config(2e3, r);
    std::vector<cd> z(truth.values.size());
    Rng rng(22);
    std::normal_distribution<double> g(0.0, std::sqrt(r));
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double phase = cfg.freq_offset * static_cast<double>(k) + truth.values[k];
        z[k] = std::polar(1.0, phase) + cd(g(rng), g(rng));
    }
    auto track = rec::ukf_track(std::span<const cd>(z), cfg);
    CHECK(rms_tail(track.phase.values, truth.values, 5'000) < 0.05);
}

TEST_CASE("noise adaptation: disabled path is inert, small windows are no-ops") {
    auto truth = model::wiener_phase_noise(20'000, 2e3, 2e-8, 31);
    auto cfg = base_config(2e3, 1.26e-3);
    auto y = synth_measurements(truth.values, 1.0, cfg.freq_offset, cfg.measurement_noise, 32);

    auto a = rec::ukf_track(std::span<const double>(y), cfg);
    auto b = rec::ukf_track(std::span<const double>(y), cfg);
    CHECK(a.phase.values == b.phase.values);
    CHECK(a.final_process_noise == doctest::Approx(2.0 * kPi * 2e3 * 2e-8));

    model::UkfState s;
    s.process_noise = 1e-5;
    s.measurement_noise = 1e-3;
    rec::InnovationWindow win;  // below the 100-sample minimum
    win.nu.assign(50, 0.0);
    win.h2.assign(50, 1.0);
    win.s_pred.assign(50, 1e-3);
    Rng rng(1);
    auto same = rec::adapt_noise_step(s, win, rng, 0.25, false);
    CHECK(same.process_noise == s.process_noise);
}

TEST_CASE("noise adaptation keeps a well-specified Q within 2x") {
    auto truth = model::wiener_phase_noise(10'000, 2e3, 2e-8, 41);
    auto cfg = base_config(2e3, 1.26e-3);
    cfg.adapt_noise = true;
    cfg.seed = 7;
    auto y = synth_measurements(truth.values, 1.0, cfg.freq_offset, cfg.measurement_noise, 42);
    auto track = rec::ukf_track(std::span<const double>(y), cfg);
    const double q_true = 2.0 * kPi * 2e3 * 2e-8;
    CHECK(track.final_process_noise > 0.5 * q_true);
    CHECK(track.final_process_noise < 2.0 * q_true);
}

TEST_CASE("noise adaptation grows a 100x-underestimated Q toward the truth") {
    auto truth = model::wiener_phase_noise(100'000, 2e3, 2e-8, 51);
    auto cfg = base_config(20.0, 1.26e-3);  // Q starts 100x too small
    cfg.adapt_noise = true;
    cfg.seed = 8;
    auto y = synth_measurements(truth.values, 1.0, cfg.freq_offset, cfg.measurement_noise, 52);
    auto track = rec::ukf_track(std::span<const double>(y), cfg);
    const double q_true = 2.0 * kPi * 2e3 * 2e-8;
    // within an order of magnitude of the truth by the end of the frame
    CHECK(track.final_process_noise > 0.1 * q_true);
    CHECK(track.final_process_noise < 10.0 * q_true);
}

TEST_CASE("deterministic given a seed with adaptation enabled") {
    auto truth = model::wiener_phase_noise(30'000, 2e3, 2e-8, 61);
    auto cfg = base_config(200.0, 1.26e-3);
    cfg.adapt_noise = true;
    cfg.seed = 99;
    auto y = synth_measurements(truth.values, 1.0, cfg.freq_offset, cfg.measurement_noise, 62);
    auto a = rec::ukf_track(std::span<const double>(y), cfg);
    auto b = rec::ukf_track(std::span<const double>(y), cfg);
    CHECK(a.phase.values == b.phase.values);
    CHECK(a.final_process_noise == b.final_process_noise);
}

TEST_CASE("reference track recovers a noiseless Wiener phase after detrending") {
    const double rate = 1e9, f_pilot = 330e6, symbol_rate = 50e6;
    const std::size_t n = 500'000;
    auto theta = model::wiener_phase_noise(n, 200.0, 1.0 / rate, 71);

    Waveform pilot;
    pilot.rate = rate;
    pilot.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        pilot.samples[k] =
            std::polar(1.0, 2.0 * kPi * f_pilot * k / rate + theta.values[k]);

    dsp::SymbolGrid grid{1000, 20, 24'000};
    auto track = rec::reference_track(pilot, grid, symbol_rate);
    CHECK(track.converged_at.has_value());
    CHECK(track.converged_at.value() == 0);
    CHECK(track.posterior_std.empty());

    // compare against the detrended truth on the same grid
    std::vector<double> truth_full = theta.values;
    dsp::detrend(truth_full);
    double acc = 0.0;
    for (std::size_t k = 0; k < grid.count; ++k) {
        const auto idx = static_cast<std::size_t>(grid.offset) + k * grid.sps;
        const double d = track.phase.values[k] - truth_full[idx];
        acc += d * d;
    }
    // both sides carry their own detrend; compare up to a line
    std::vector<double> diff(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k) {
        const auto idx = static_cast<std::size_t>(grid.offset) + k * grid.sps;
        diff[k] = track.phase.values[k] - truth_full[idx];
    }
    dsp::detrend(diff);
    double rms = 0.0;
    for (double d : diff) rms += d * d;
    rms = std::sqrt(rms / static_cast<double>(diff.size()));
    CHECK(rms < 1e-3);
}

TEST_CASE("compensate rotates by the negated estimate") {
    std::vector<cd> syms = {cd(1.0, 0.0), cd(0.0, 2.0), cd(-1.5, 0.5)};
    model::PhaseTrace phase;
    phase.values = {0.3, -1.2, 2.5};
    auto out = rec::compensate(syms, phase);
    for (std::size_t k = 0; k < syms.size(); ++k) {
        CHECK(std::abs(out[k]) == doctest::Approx(std::abs(syms[k])).epsilon(1e-12));
        const cd expect = syms[k] * std::polar(1.0, -phase.values[k]);
        CHECK(std::abs(out[k] - expect) < 1e-12);
    }

    model::PhaseTrace zero;
    zero.values = {0.0, 0.0, 0.0};
    auto same = rec::compensate(syms, zero);
    for (std::size_t k = 0; k < syms.size(); ++k) CHECK(same[k] == syms[k]);

    model::PhaseTrace wrong;
    wrong.values = {0.1};
    CHECK_THROWS(rec::compensate(syms, wrong));
}
