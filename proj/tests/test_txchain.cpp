#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "cvqkd/dsp.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/txchain.hpp"

using namespace cvqkd;
namespace tx = cvqkd::txchain;
using model::kPi;

namespace {

tx::FrameConfig small_config() {
    tx::FrameConfig cfg;
    cfg.frame_symbols = 20'000;
    cfg.cazac_symbols = 2'000;
    cfg.guard_samples = 20'000;
    return cfg;
}

double band_power(const std::vector<cd>& spectrum, double rate, double lo, double hi) {
    const std::size_t n = spectrum.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft::bin_frequency(k, n, rate);
        if (f >= lo && f <= hi) acc += std::norm(spectrum[k]);
    }
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace

TEST_CASE("generated symbols are unit-variance independent Gaussians") {
    tx::FrameConfig cfg;
    cfg.frame_symbols = 1'000'000;
    auto frame = tx::generate_symbols(cfg, 1);
    const auto& s = frame.alice_symbols;

    double mi = 0, mq = 0;
    for (const cd& v : s) {
        mi += v.real();
        mq += v.imag();
    }
    mi /= s.size();
    mq /= s.size();
    double vi = 0, vq = 0, m4i = 0, cross = 0;
    for (const cd& v : s) {
        vi += (v.real() - mi) * (v.real() - mi);
        vq += (v.imag() - mq) * (v.imag() - mq);
        m4i += std::pow(v.real() - mi, 4);
        cross += (v.real() - mi) * (v.imag() - mq);
    }
    vi /= s.size();
    vq /= s.size();
    CHECK(vi == doctest::Approx(1.0).epsilon(0.005));
    CHECK(vq == doctest::Approx(1.0).epsilon(0.005));
    // Gaussian kurtosis: fourth moment = 3 sigma^4
    CHECK(m4i / s.size() == doctest::Approx(3.0).epsilon(0.05));
    // I and Q independent
    CHECK(std::abs(cross / s.size()) < 3.0 / std::sqrt(static_cast<double>(s.size())));
}

TEST_CASE("independently seeded frames are uncorrelated") {
    tx::FrameConfig cfg;
    cfg.frame_symbols = 100'000;
    auto a = tx::generate_symbols(cfg, 1).alice_symbols;
    auto b = tx::generate_symbols(cfg, 2).alice_symbols;
    cd cross = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) cross += a[k] * std::conj(b[k]);
    const double rho = std::abs(cross) / (2.0 * a.size());  // complex variance 2
    CHECK(rho < 3.0 / std::sqrt(static_cast<double>(a.size())));
}

TEST_CASE("generate_symbols rejects an empty frame") {
    tx::FrameConfig cfg;
    cfg.frame_symbols = 0;
    CHECK_THROWS(tx::generate_symbols(cfg, 1));
}

TEST_CASE("cazac sequence has unit amplitude and zero periodic autocorrelation") {
    auto seq = tx::cazac_sequence(7, 1);
    REQUIRE(seq.size() == 7);
    for (const cd& s : seq) CHECK(std::abs(s) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t lag = 1; lag < 7; ++lag) {
        cd acc = 0.0;
        for (std::size_t k = 0; k < 7; ++k) acc += seq[k] * std::conj(seq[(k + lag) % 7]);
        CHECK(std::abs(acc) < 1e-12);
    }
}

TEST_CASE("cazac 10k sequence: sharp aperiodic self-correlation") {
    const std::size_t n = 10'000;
    auto seq = tx::cazac_sequence(n, 1);
    // brute-force aperiodic autocorrelation scan
    double peak = 0.0, worst = 0.0;
    for (std::size_t lag = 0; lag < n; lag += 7) {  // stride keeps the scan tractable
        cd acc = 0.0;
        for (std::size_t k = 0; k + lag < n; ++k) acc += seq[k + lag] * std::conj(seq[k]);
        const double mag = std::abs(acc);
        if (lag == 0)
            peak = mag;
        else
            worst = std::max(worst, mag);
    }
    CHECK(peak == doctest::Approx(static_cast<double>(n)));
    CHECK(20.0 * std::log10(peak / worst) > 20.0);
}

TEST_CASE("cazac rejects non-coprime roots and zero length") {
    CHECK_THROWS(tx::cazac_sequence(10, 5));
    CHECK_THROWS(tx::cazac_sequence(0, 1));
    CHECK_NOTHROW(tx::cazac_sequence(10, 3));
}

TEST_CASE("frame config validation") {
    tx::FrameConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    SUBCASE("pilot inside the quantum band") {
        cfg.pilot_freq = 70e6;
        CHECK_THROWS(cfg.validate());
    }
    SUBCASE("dac rate not a symbol multiple") {
        cfg.dac_rate = 505e6;
        CHECK_THROWS(cfg.validate());
    }
    SUBCASE("band past Nyquist") {
        cfg.quantum_shift = 240e6;
        CHECK_THROWS(cfg.validate());
    }
}

TEST_CASE("synthesized frame: pilot line, band occupancy, photon bookkeeping") {
    auto cfg = small_config();
    auto frame = tx::generate_symbols(cfg, 3);
    auto wave = tx::synthesize_frame(cfg, frame);
    REQUIRE(wave.size() == cfg.dac_samples());

    tx::FrameConfig quiet = cfg;
    quiet.pilot_amplitude = 0.0;
    auto wave_np = tx::synthesize_frame(quiet, frame);

    auto spec = fft::forward_copy(wave.samples);
    auto spec_np = fft::forward_copy(wave_np.samples);

    // FFT peak of (waveform minus quantum signal) sits at the pilot
    const std::size_t n = spec.size();
    std::size_t peak = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = std::norm(spec[k] - spec_np[k]);
        if (p > best) {
            best = p;
            peak = k;
        }
    }
    const double bin_hz = wave.rate / static_cast<double>(n);
    CHECK(std::abs(fft::bin_frequency(peak, n, wave.rate) - cfg.pilot_freq) <= bin_hz);

    // without a pilot there is no line at 130 MHz: power within +-100 kHz
    // of the pilot frequency is 40 dB below the quantum band power
    const double p_line = band_power(spec_np, wave.rate, cfg.pilot_freq - 100e3,
                                     cfg.pilot_freq + 100e3);
    const double p_qband = band_power(spec_np, wave.rate, cfg.quantum_band_low(),
                                      cfg.quantum_band_high());
    CHECK(p_line < 1e-4 * p_qband);

    // quantum band occupies quantum_shift +- (1+rolloff) Rs / 2
    CHECK(cfg.quantum_band_low() == doctest::Approx(25e6));
    CHECK(cfg.quantum_band_high() == doctest::Approx(95e6));
    const double p_out = band_power(spec_np, wave.rate, cfg.quantum_band_high() + 2e6,
                                    0.5 * wave.rate - 1.0) +
                         band_power(spec_np, wave.rate, 1.0, cfg.quantum_band_low() - 2e6);
    CHECK(p_out < 1e-4 * p_qband);

    // energy bookkeeping: photons measured from the quantum band power
    const double photons = tx::measure_mean_photons(wave_np, cfg, cfg.quantum_shift);
    CHECK(photons == doctest::Approx(cfg.mean_photons).epsilon(0.01));
}

TEST_CASE("pilot and quantum band are separable") {
    auto cfg = small_config();
    auto frame = tx::generate_symbols(cfg, 4);
    auto wave = tx::synthesize_frame(cfg, frame);

    // band-pass the pilot and subtract: quantum-band power unchanged
    auto pilot = dsp::band_pass(wave, cfg.pilot_freq, 10e6);
    Waveform stripped = wave;
    for (std::size_t k = 0; k < wave.size(); ++k) stripped.samples[k] -= pilot.samples[k];

    auto spec_before = fft::forward_copy(wave.samples);
    auto spec_after = fft::forward_copy(stripped.samples);
    const double before = band_power(spec_before, wave.rate, cfg.quantum_band_low(),
                                     cfg.quantum_band_high());
    const double after = band_power(spec_after, wave.rate, cfg.quantum_band_low(),
                                    cfg.quantum_band_high());
    CHECK(after == doctest::Approx(before).epsilon(0.001));
}

TEST_CASE("synthesize rejects mismatched symbol counts") {
    auto cfg = small_config();
    auto frame = tx::generate_symbols(cfg, 5);
    cfg.frame_symbols += 1;
    CHECK_THROWS(tx::synthesize_frame(cfg, frame));
}
