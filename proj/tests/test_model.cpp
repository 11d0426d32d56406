#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "cvqkd/fft.hpp"
#include "cvqkd/model.hpp"

using namespace cvqkd;
using model::kPi;

TEST_CASE("wiener trace is all zero for zero linewidth") {
    auto trace = model::wiener_phase_noise(1000, 0.0, 2e-8, 1);
    REQUIRE(trace.values.size() == 1000);
    for (double v : trace.values) CHECK(v == 0.0);
}

TEST_CASE("wiener increment variance matches 2 pi dnu T") {
    const std::size_t n = 1'000'000;
    const double lw = 2e3, ts = 2e-8;
    auto trace = model::wiener_phase_noise(n, lw, ts, 7);
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double d = trace.values[k] - trace.values[k - 1];
        acc += d * d;
    }
    const double measured = acc / static_cast<double>(n - 1);
    const double expected = 2.0 * kPi * lw * ts;  // = 2.5133e-4 rad^2
    CHECK(expected == doctest::Approx(2.5133e-4).epsilon(1e-3));
    CHECK(measured == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("wiener trace is deterministic per seed") {
    auto a = model::wiener_phase_noise(5000, 2e3, 2e-8, 7);
    auto b = model::wiener_phase_noise(5000, 2e3, 2e-8, 7);
    auto c = model::wiener_phase_noise(5000, 2e3, 2e-8, 8);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
}

TEST_CASE("wiener rejects invalid parameters") {
    CHECK_THROWS(model::wiener_phase_noise(10, -1.0, 1e-9, 1));
    CHECK_THROWS(model::wiener_phase_noise(10, 1.0, 0.0, 1));
    CHECK_THROWS(model::wiener_phase_noise(10, std::nan(""), 1e-9, 1));
}

TEST_CASE("wiener ensemble variance grows linearly in time") {
    const std::size_t n = 5000, seeds = 2000;
    const double lw = 1e3, ts = 1e-8;
    const std::size_t checkpoints[] = {1250, 2500, 4999};
    std::vector<double> acc(3, 0.0);
    for (std::size_t s = 0; s < seeds; ++s) {
        auto trace = model::wiener_phase_noise(n, lw, ts, 100 + s);
        for (int i = 0; i < 3; ++i) {
            const double v = trace.values[checkpoints[i]];
            acc[i] += v * v;
        }
    }
    for (int i = 0; i < 3; ++i) {
        const double measured = acc[i] / seeds;
        const double expected = static_cast<double>(checkpoints[i]) * 2.0 * kPi * lw * ts;
        CHECK(measured == doctest::Approx(expected).epsilon(0.05));
    }
}

TEST_CASE("measurement model basics") {
    model::UkfState s;
    s.pilot_amplitude = 1.0;
    s.freq_offset = 0.37;
    CHECK(model::measurement_model(0.0, 0, s) == 0.0);

    s.pilot_amplitude = 2.5;
    s.freq_offset = 0.0;
    CHECK(model::measurement_model(kPi / 2.0, 0, s) == doctest::Approx(2.5).epsilon(1e-12));

    // |output| <= A over a sweep
    s.freq_offset = 0.1;
    for (std::size_t k = 0; k < 200; ++k)
        CHECK(std::abs(model::measurement_model(0.7, k, s)) <= 2.5 + 1e-12);
}

TEST_CASE("measurement model is 2 pi periodic") {
    model::UkfState s;
    s.pilot_amplitude = 1.3;
    s.freq_offset = 0.21;
    for (std::size_t k : {0u, 5u, 17u}) {
        const double a = model::measurement_model(0.4, k, s);
        const double b = model::measurement_model(0.4 + 2.0 * kPi, k, s);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("measurement model sweep peaks at the beat frequency") {
    // f = 5 MHz at 50 MS/s over 1000 samples -> bin 100 exactly.
    const double fs = 50e6, f = 5e6;
    const std::size_t n = 1000;
    model::UkfState s;
    s.pilot_amplitude = 1.0;
    s.sample_period = 1.0 / fs;
    s.freq_offset = 2.0 * kPi * f / fs;

    std::vector<cd> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = model::measurement_model(0.3, k, s);
    fft::forward(y);
    std::size_t peak = 1;
    for (std::size_t k = 1; k < n / 2; ++k)
        if (std::norm(y[k]) > std::norm(y[peak])) peak = k;
    CHECK(fft::bin_frequency(peak, n, fs) == doctest::Approx(f));
}

TEST_CASE("channel params validation") {
    model::ChannelParams p;
    CHECK_NOTHROW(p.validate());
    p.eta = 0.0;
    CHECK_THROWS(p.validate());
    p.eta = 0.5;
    p.excess_photons = -0.1;
    CHECK_THROWS(p.validate());
    p.excess_photons = 0.0;
    p.lasers.tx_linewidth = -5.0;
    CHECK_THROWS(p.validate());
}
