#include "cvqkd/secrecy.hpp"

#include <cmath>
#include <stdexcept>

namespace cvqkd::secrecy {

namespace {

constexpr double kSymplecticTol = 1e-9;

double log2_safe(double x) { return std::log2(x); }

// Symplectic eigenvalues of a two-mode covariance matrix
// [[a I2, c sigma_z], [c sigma_z, b I2]].
struct TwoModeSpectrum {
    double nu_plus;
    double nu_minus;
};

TwoModeSpectrum symplectic_eigenvalues(double a, double b, double c) {
    const double det = a * b - c * c;
    const double delta = a * a + b * b - 2.0 * c * c;
    const double disc = delta * delta - 4.0 * det * det;
    const double root = std::sqrt(std::max(disc, 0.0));
    const double nu_plus_sq = 0.5 * (delta + root);
    const double nu_minus_sq = 0.5 * (delta - root);
    if (nu_minus_sq < (1.0 - kSymplecticTol) * (1.0 - kSymplecticTol) ||
        nu_plus_sq < 0.0)
        throw std::domain_error("holevo_bound: unphysical covariance matrix");
    return {std::sqrt(std::max(nu_plus_sq, 1.0)),
            std::sqrt(std::max(nu_minus_sq, 1.0))};
}

}  // namespace

CovarianceEstimate estimate_covariance(std::span<const cd> alice, std::span<const cd> bob,
                                       double n_mean_photons) {
    if (alice.size() != bob.size())
        throw std::invalid_argument("estimate_covariance: length mismatch");
    if (alice.empty())
        throw std::invalid_argument("estimate_covariance: zero-length input");

    const double n = static_cast<double>(alice.size());
    double ma_i = 0, ma_q = 0, mb_i = 0, mb_q = 0;
    for (std::size_t k = 0; k < alice.size(); ++k) {
        ma_i += alice[k].real();
        ma_q += alice[k].imag();
        mb_i += bob[k].real();
        mb_q += bob[k].imag();
    }
    ma_i /= n; ma_q /= n; mb_i /= n; mb_q /= n;

    double z_i = 0, z_q = 0, y_i = 0, y_q = 0, a_i = 0, a_q = 0;
    for (std::size_t k = 0; k < alice.size(); ++k) {
        const double ai = alice[k].real() - ma_i;
        const double aq = alice[k].imag() - ma_q;
        const double bi = bob[k].real() - mb_i;
        const double bq = bob[k].imag() - mb_q;
        z_i += ai * bi;
        z_q += aq * bq;
        y_i += bi * bi;
        y_q += bq * bq;
        a_i += ai * ai;
        a_q += aq * aq;
    }

    CovarianceEstimate cov;
    cov.n_mean_photons = n_mean_photons;
    cov.z_hat = 0.5 * (z_i + z_q) / n;
    cov.y_hat = 0.5 * (y_i + y_q) / n;
    cov.a_hat = 0.5 * (a_i + a_q) / n;
    cov.frames = 1;
    return cov;
}

double CovarianceEstimate::correlation() const {
    const double denom = a_hat * y_hat;
    return denom > 0.0 ? z_hat / std::sqrt(denom) : 0.0;
}

ChannelEstimate infer_channel(const CovarianceEstimate& cov, double trusted_t) {
    if (!(cov.n_mean_photons > 0.0))
        throw std::invalid_argument("infer_channel: N must be > 0");
    const double N = cov.n_mean_photons;
    ChannelEstimate est;
    est.eta_hat = cov.z_hat * cov.z_hat / (2.0 * N * N);
    est.e_hat = cov.y_hat - cov.z_hat * cov.z_hat / (2.0 * N) - 1.0;
    est.e_hat_minus_trusted = est.e_hat - trusted_t;
    return est;
}

double kappa(double sigma_pn) {
    if (!(sigma_pn >= 0.0))
        throw std::invalid_argument("kappa: sigma must be >= 0");
    return std::exp(-0.5 * sigma_pn * sigma_pn);
}

VirtualChannel untrusted_phase_noise(double eta, double e, double N, double kappa) {
    const double k2 = kappa * kappa;
    return {k2 * eta, e + (1.0 - k2) * N * eta};
}

double cloner_w(double e, double eta) {
    if (eta >= 1.0) {
        if (e == 0.0) return 0.0;
        throw std::domain_error("cloner_w: undefined for eta = 1 with e > 0");
    }
    return e / (1.0 - eta);
}

double mutual_information(double N, double eta, double e_total) {
    const double y = N * eta + e_total + 1.0;
    const double conditional = e_total + 1.0;
    if (!(conditional > 0.0) || !(y > 0.0))
        throw std::domain_error("mutual_information: nonpositive variance");
    return log2_safe(y / conditional);
}

double g_von_neumann(double nu) {
    if (nu <= 1.0) return 0.0;  // vacuum eigenvalue carries no entropy
    const double p = 0.5 * (nu + 1.0);
    const double m = 0.5 * (nu - 1.0);
    return p * log2_safe(p) - m * log2_safe(m);
}

double holevo_bound(double N, double eta, double e) {
    const double V = 2.0 * N + 1.0;                 // EPR quadrature variance
    const double a = V;
    const double b = eta * V + (1.0 - eta) + 2.0 * e;  // e photons -> 2e field variance
    const double c = std::sqrt(eta * (V * V - 1.0));

    const auto [nu1, nu2] = symplectic_eigenvalues(a, b, c);

    // Heterodyne conditioning on mode B: gamma_A|b = (a - c^2/(b+1)) I2.
    const double nu3 = a - c * c / (b + 1.0);
    if (nu3 < 1.0 - kSymplecticTol)
        throw std::domain_error("holevo_bound: unphysical conditional state");

    return g_von_neumann(nu1) + g_von_neumann(nu2) - g_von_neumann(nu3);
}

KeyRate secret_key_rate(const KeyRateInputs& in) {
    if (!(in.N > 0.0) || !(in.beta >= 0.0 && in.beta <= 1.0))
        throw std::invalid_argument("secret_key_rate: invalid N or beta");
    if (!(in.trusted_detector_efficiency > 0.0 && in.trusted_detector_efficiency <= 1.0))
        throw std::invalid_argument("secret_key_rate: invalid detector efficiency");
    if (in.eta > in.trusted_detector_efficiency)
        throw std::invalid_argument(
            "secret_key_rate: inconsistent trusted decomposition (eta > detector efficiency)");

    const double info = mutual_information(in.N, in.eta, in.e + in.trusted_electronic_photons);

    const double eta_channel = in.eta / in.trusted_detector_efficiency;
    // Negative measured excess (finite-data fluctuation) cannot help Eve;
    // the bound is evaluated at e = 0 in that case.
    const double e_channel = std::max(in.e, 0.0) / in.trusted_detector_efficiency;
    const double holevo = holevo_bound(in.N, eta_channel, e_channel);

    KeyRate rate;
    rate.raw = in.beta * info - holevo;
    rate.clamped = std::max(rate.raw, 0.0);
    return rate;
}

}  // namespace cvqkd::secrecy
