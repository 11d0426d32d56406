#include "cvqkd/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvqkd::recovery {

using model::kPi;
using model::UkfState;

model::UkfState UkfConfig::initial_state() const {
    if (!(linewidth_guess > 0.0))
        throw std::invalid_argument("UkfConfig: linewidth_guess must be > 0");
    if (!(initial_variance > 0.0) || !(measurement_noise > 0.0))
        throw std::invalid_argument("UkfConfig: variances must be > 0");
    UkfState s;
    s.mean = initial_mean;
    s.variance = initial_variance;
    s.process_noise = 2.0 * kPi * linewidth_guess * sample_period;
    s.measurement_noise = measurement_noise;
    s.pilot_amplitude = pilot_amplitude;
    s.freq_offset = freq_offset;
    s.sample_period = sample_period;
    s.ut = ut;
    return s;
}

model::UkfState ukf_predict(const UkfState& state) {
    UkfState next = state;
    next.variance += state.process_noise;
    return next;
}

namespace {

constexpr double kVarianceFloor = 1e-15;
// Sigma spread cap for the periodic measurement: just below pi/2 so the
// points stay on one branch while cos(spread) keeps the transformed mean
// responsive during the diffuse start-up.
constexpr double kMaxSigmaSpread = 1.4;

struct UtWeights {
    double lambda, w0m, wim, w0c;
};

UtWeights ut_weights(const model::UtParams& ut) {
    const double lambda = ut.alpha * ut.alpha * (1.0 + ut.kappa_ut) - 1.0;  // n = 1
    UtWeights w;
    w.lambda = lambda;
    w.w0m = lambda / (1.0 + lambda);
    w.wim = 0.5 / (1.0 + lambda);
    w.w0c = w.w0m + 1.0 - ut.alpha * ut.alpha + ut.beta_ut;
    return w;
}

struct UpdateDiag {
    double innovation;
    double slope_sq;  // effective (dh/dtheta)^2 at the prior mean
    double s_pred;    // predicted innovation variance
};

std::pair<UkfState, double> update_impl(const UkfState& state, double y_k, std::size_t k,
                                        UpdateDiag* diag) {
    if (!std::isfinite(y_k))
        throw std::invalid_argument("ukf_update: non-finite measurement");
    const UtWeights w = ut_weights(state.ut);
    const double spread =
        std::min(std::sqrt((1.0 + w.lambda) * state.variance), kMaxSigmaSpread);

    const double z0 = model::measurement_model(state.mean, k, state);
    const double z1 = model::measurement_model(state.mean + spread, k, state);
    const double z2 = model::measurement_model(state.mean - spread, k, state);

    const double zbar = w.w0m * z0 + w.wim * (z1 + z2);
    const double s = w.w0c * (z0 - zbar) * (z0 - zbar) +
                     w.wim * ((z1 - zbar) * (z1 - zbar) + (z2 - zbar) * (z2 - zbar)) +
                     state.measurement_noise;
    const double c = w.wim * spread * (z1 - z2);

    const double gain = c / s;
    UkfState next = state;
    next.mean = state.mean + gain * (y_k - zbar);
    next.variance = std::max(state.variance - gain * c, kVarianceFloor);

    if (!std::isfinite(next.mean) || !std::isfinite(next.variance))
        throw std::runtime_error("ukf_update: non-finite state at symbol " + std::to_string(k));

    if (diag) {
        diag->innovation = y_k - zbar;
        const double d2 = spread * spread;
        diag->slope_sq = d2 > 0.0 ? (c / d2) * (c / d2) : 0.0;
        diag->s_pred = s;
    }
    return {next, next.mean};
}

std::optional<std::size_t> posterior_convergence(const std::vector<double>& stds) {
    if (stds.empty()) return std::nullopt;
    const std::size_t tail = std::max<std::size_t>(1, stds.size() / 10);
    std::vector<double> last(stds.end() - static_cast<std::ptrdiff_t>(tail), stds.end());
    std::nth_element(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(last.size() / 2),
                     last.end());
    const double threshold = 2.0 * last[last.size() / 2];
    for (std::size_t k = 0; k < stds.size(); ++k)
        if (stds[k] < threshold) return k;
    return std::nullopt;
}

// Steady-state prior variance (P_ss + q) in phase units under process
// noise q, with effective measurement noise r_eff = r / h2_mean.
double steady_prior_var(double q, double r, double h2_mean) {
    const double r_eff = r / std::max(h2_mean, 1e-30);
    const double p_ss = 0.5 * (-q + std::sqrt(q * q + 4.0 * q * r_eff));
    return p_ss + q;
}

// Gaussian innovation log-likelihood for proposed (q, r), anchored to the
// filter's own predicted variances at the current parameters: only the
// steady-state delta is extrapolated.
double window_log_likelihood(const InnovationWindow& win, double q_cur, double r_cur,
                             double q_prop, double r_prop) {
    double h2_mean = 0.0;
    for (double h2 : win.h2) h2_mean += h2;
    h2_mean /= static_cast<double>(win.h2.size());
    const double delta =
        steady_prior_var(q_prop, r_prop, h2_mean) - steady_prior_var(q_cur, r_cur, h2_mean);
    const double floor = 0.25 * std::min(r_cur, r_prop) + 1e-300;
    double ll = 0.0;
    for (std::size_t i = 0; i < win.nu.size(); ++i) {
        const double s =
            std::max(win.s_pred[i] + win.h2[i] * delta + (r_prop - r_cur), floor);
        ll += -0.5 * (win.nu[i] * win.nu[i] / s + std::log(s));
    }
    return ll;
}

}  // namespace

std::pair<UkfState, double> ukf_update(const UkfState& state, double y_k, std::size_t k) {
    return update_impl(state, y_k, k, nullptr);
}

model::UkfState adapt_noise_step(const UkfState& state, const InnovationWindow& window,
                                 Rng& rng, double proposal_sigma, bool adapt_r) {
    if (window.nu.size() < 100 || window.nu.size() != window.h2.size() ||
        window.nu.size() != window.s_pred.size())
        return state;

    std::normal_distribution<double> gauss(0.0, proposal_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double q_cur = state.process_noise;
    const double r_cur = window.r;
    const double q_prop = q_cur * std::exp(gauss(rng));
    const double r_prop = adapt_r ? r_cur * std::exp(gauss(rng)) : r_cur;

    const double ll_old = window_log_likelihood(window, q_cur, r_cur, q_cur, r_cur);
    const double ll_new = window_log_likelihood(window, q_cur, r_cur, q_prop, r_prop);
    const double u = unit(rng);

    UkfState next = state;
    if (std::log(u) < ll_new - ll_old) {
        next.process_noise = q_prop;
        next.measurement_noise = r_prop;
    }
    return next;
}

TrackResult reference_track(const Waveform& pilot_wave, const dsp::SymbolGrid& grid,
                            double symbol_rate) {
    model::PhaseTrace full = dsp::hilbert_phase(pilot_wave);
    dsp::detrend(full.values);

    TrackResult result;
    result.phase.rate = symbol_rate;
    result.phase.values.resize(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k) {
        const auto idx = grid.offset + static_cast<std::ptrdiff_t>(k) * grid.sps;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(full.values.size()))
            throw std::out_of_range("reference_track: grid outside waveform");
        result.phase.values[k] = full.values[static_cast<std::size_t>(idx)];
    }
    result.converged_at = 0;
    return result;
}

TrackResult ukf_track(std::span<const double> pilot_samples, const UkfConfig& config) {
    if (pilot_samples.empty()) throw std::invalid_argument("ukf_track: empty input");

    UkfState state = config.initial_state();
    Rng rng(config.seed);

    TrackResult result;
    result.phase.rate = config.sample_period > 0.0 ? 1.0 / config.sample_period : 0.0;
    result.phase.values.resize(pilot_samples.size());
    result.posterior_std.resize(pilot_samples.size());

    InnovationWindow window;
    window.r = state.measurement_noise;
    std::size_t since_proposal = 0;

    for (std::size_t k = 0; k < pilot_samples.size(); ++k) {
        state = ukf_predict(state);
        UpdateDiag diag{};
        auto [next, theta] = update_impl(state, pilot_samples[k], k, &diag);
        state = next;
        result.phase.values[k] = theta;
        result.posterior_std[k] = std::sqrt(state.variance);

        if (config.adapt_noise) {
            window.nu.push_back(diag.innovation);
            window.h2.push_back(diag.slope_sq);
            window.s_pred.push_back(diag.s_pred);
            if (window.nu.size() > config.adapt_window) {
                window.nu.erase(window.nu.begin());
                window.h2.erase(window.h2.begin());
                window.s_pred.erase(window.s_pred.begin());
            }
            window.r = state.measurement_noise;
            if (window.nu.size() >= config.adapt_window &&
                ++since_proposal >= config.adapt_stride) {
                since_proposal = 0;
                state = adapt_noise_step(state, window, rng, config.adapt_proposal_sigma,
                                         config.adapt_r);
            }
        }
    }
    result.converged_at = posterior_convergence(result.posterior_std);
    result.final_process_noise = state.process_noise;
    return result;
}

TrackResult ukf_track(std::span<const cd> pilot_symbols, const UkfConfig& config) {
    if (pilot_symbols.empty()) throw std::invalid_argument("ukf_track: empty input");

    UkfState state = config.initial_state();
    const UtWeights w = ut_weights(config.ut);

    TrackResult result;
    result.phase.rate = config.sample_period > 0.0 ? 1.0 / config.sample_period : 0.0;
    result.phase.values.resize(pilot_symbols.size());
    result.posterior_std.resize(pilot_symbols.size());

    for (std::size_t k = 0; k < pilot_symbols.size(); ++k) {
        state = ukf_predict(state);
        const double spread =
            std::min(std::sqrt((1.0 + w.lambda) * state.variance), kMaxSigmaSpread);
        const double base = state.freq_offset * static_cast<double>(k);
        const double a = state.pilot_amplitude;

        // Sigma points through the two-component measurement [A cos, A sin].
        const double th[3] = {state.mean, state.mean + spread, state.mean - spread};
        double zc[3], zs[3];
        for (int i = 0; i < 3; ++i) {
            zc[i] = a * std::cos(base + th[i]);
            zs[i] = a * std::sin(base + th[i]);
        }
        const double mc = w.w0m * zc[0] + w.wim * (zc[1] + zc[2]);
        const double ms = w.w0m * zs[0] + w.wim * (zs[1] + zs[2]);

        auto accum = [&](const double* z, double m, const double* z2, double m2,
                         double& out) {
            out = w.w0c * (z[0] - m) * (z2[0] - m2) +
                  w.wim * ((z[1] - m) * (z2[1] - m2) + (z[2] - m) * (z2[2] - m2));
        };
        double scc, sss, scs;
        accum(zc, mc, zc, mc, scc);
        accum(zs, ms, zs, ms, sss);
        accum(zc, mc, zs, ms, scs);
        scc += state.measurement_noise;
        sss += state.measurement_noise;

        const double cc = w.wim * spread * (zc[1] - zc[2]);
        const double cs = w.wim * spread * (zs[1] - zs[2]);

        const double det = scc * sss - scs * scs;
        if (!(det > 0.0))
            throw std::runtime_error("ukf_track: singular innovation covariance at symbol " +
                                     std::to_string(k));
        const double kc = (cc * sss - cs * scs) / det;
        const double ks = (cs * scc - cc * scs) / det;

        const double nu_c = pilot_symbols[k].real() - mc;
        const double nu_s = pilot_symbols[k].imag() - ms;
        state.mean += kc * nu_c + ks * nu_s;
        state.variance =
            std::max(state.variance - (kc * cc + ks * cs), kVarianceFloor);
        if (!std::isfinite(state.mean) || !std::isfinite(state.variance))
            throw std::runtime_error("ukf_track: non-finite state at symbol " +
                                     std::to_string(k));

        result.phase.values[k] = state.mean;
        result.posterior_std[k] = std::sqrt(state.variance);
    }
    result.converged_at = posterior_convergence(result.posterior_std);
    result.final_process_noise = state.process_noise;
    return result;
}

std::vector<cd> compensate(std::span<const cd> symbols, const model::PhaseTrace& phase) {
    if (symbols.size() != phase.values.size())
        throw std::invalid_argument("compensate: length mismatch");
    std::vector<cd> out(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k)
        out[k] = symbols[k] * std::polar(1.0, -phase.values[k]);
    return out;
}

}  // namespace cvqkd::recovery
