#pragma once

#include <cstddef>
#include <span>

#include "cvqkd/waveform.hpp"

namespace cvqkd::secrecy {

/// Empirical covariance-matrix entries between Alice's (scaled) symbols
/// and Bob's recovered symbols. Conventions follow the prepare-and-measure
/// matrix with Alice diagonal 2N and Bob diagonal N*eta + e + 1: z_hat is
/// the quadrature-averaged cross covariance, y_hat Bob's per-quadrature
/// variance, both in SNU.
struct CovarianceEstimate {
    double n_mean_photons = 0.0;  // N, known a priori
    double z_hat = 0.0;
    double y_hat = 0.0;
    double a_hat = 0.0;  // Alice's empirical per-quadrature variance (diagnostic)
    std::size_t frames = 1;

    /// Pearson correlation between Alice's and Bob's symbol streams.
    double correlation() const;
};

/// Channel parameters inferred from a CovarianceEstimate. e_hat may come
/// out slightly negative on finite data; it is preserved unclipped.
struct ChannelEstimate {
    double eta_hat = 0.0;
    double e_hat = 0.0;
    double e_hat_minus_trusted = 0.0;
};

struct KeyRateInputs {
    double N = 2.73;                      // mean photon number, channel input
    double eta = 0.334;                   // measured total transmittance
    double e = 0.0;                       // measured excess after trusted subtraction
    double beta = 0.95;                   // reconciliation efficiency
    double trusted_detector_efficiency = 0.84;
    double trusted_electronic_photons = 0.022;  // t
};

struct KeyRate {
    double raw = 0.0;      // bits per symbol, may be negative
    double clamped = 0.0;  // max(raw, 0)
};

/// z_hat / y_hat from paired symbol streams. Alice's symbols must already
/// be scaled so that her per-quadrature variance is 2N.
CovarianceEstimate estimate_covariance(std::span<const cd> alice, std::span<const cd> bob,
                                       double n_mean_photons);

/// eta_hat = z^2 / (2 N^2),  e_hat = y - z^2 / (2N) - 1.
ChannelEstimate infer_channel(const CovarianceEstimate& cov, double trusted_t);

/// Phase-noise coherence factor kappa = exp(-sigma^2 / 2) for Gaussian
/// residual phase error of standard deviation sigma.
double kappa(double sigma_pn);

struct VirtualChannel {
    double eta_prime = 0.0;
    double e_prime = 0.0;
};

/// Untrusted phase noise folded into the channel: eta' = kappa^2 * eta,
/// e' = e + (1 - kappa^2) * N * eta.
VirtualChannel untrusted_phase_noise(double eta, double e, double N, double kappa);

/// Entangling-cloner photon number w with e = w * (1 - eta).
double cloner_w(double e, double eta);

/// Shannon mutual information of the heterodyne Gaussian channel,
/// I = log2((N*eta + e_total + 1) / (e_total + 1)) bits per symbol.
double mutual_information(double N, double eta, double e_total);

/// Von Neumann entropy contribution of a symplectic eigenvalue:
/// g(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2).
double g_von_neumann(double nu);

/// Holevo bound S(B:E) for collective attacks against the heterodyne
/// protocol. Entanglement-based picture: EPR variance V = 2N + 1, channel
/// (eta, e) applied to mode B, Eve holding the purification. Computed as
/// S(AB) - S(A|b) with heterodyne conditioning, entropies from the
/// closed-form two-mode symplectic spectrum.
double holevo_bound(double N, double eta, double e);

/// Asymptotic key rate K = beta * I(A:B) - S(B:E). Bob's mutual
/// information uses the full measured transmittance and total noise
/// (untrusted excess + trusted electronic). Eve's Holevo bound is taken
/// at the channel output, before the trusted detector: transmittance
/// eta / eta_det and excess e / eta_det, which reduces exactly to the
/// untrusted formula when eta_det = 1 and t = 0.
KeyRate secret_key_rate(const KeyRateInputs& inputs);

}  // namespace cvqkd::secrecy
