#include "cvqkd/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace cvqkd::fft {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// One aligned in-place buffer plus forward/backward plans per length.
struct Engine {
    std::size_t n = 0;
    fftw_complex* buf = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    explicit Engine(std::size_t len) : n(len) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        buf = fftw_alloc_complex(n);
        if (!buf) throw std::bad_alloc();
        fwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!fwd || !bwd) throw std::runtime_error("fftw plan creation failed");
    }
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;
    ~Engine() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
        if (buf) fftw_free(buf);
    }
};

Engine& engine_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<Engine>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Engine>(n);
    return *slot;
}

void execute(std::vector<cd>& data, bool forward_dir) {
    if (data.empty()) return;
    Engine& eng = engine_for(data.size());
    std::memcpy(static_cast<void*>(eng.buf), static_cast<const void*>(data.data()),
                data.size() * sizeof(cd));
    fftw_execute(forward_dir ? eng.fwd : eng.bwd);
    std::memcpy(static_cast<void*>(data.data()), static_cast<const void*>(eng.buf),
                data.size() * sizeof(cd));
    if (!forward_dir) {
        const double scale = 1.0 / static_cast<double>(data.size());
        for (auto& v : data) v *= scale;
    }
}

}  // namespace

void forward(std::vector<cd>& data) { execute(data, true); }
void inverse(std::vector<cd>& data) { execute(data, false); }

std::vector<cd> forward_copy(const std::vector<cd>& data) {
    std::vector<cd> out = data;
    forward(out);
    return out;
}

double bin_frequency(std::size_t k, std::size_t n, double rate) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(n);
    return (2 * k > n) ? f - rate : f;
}

std::size_t frequency_bin(double f, std::size_t n, double rate) {
    double frac = f / rate;
    frac -= std::floor(frac);   // wrap into [0, 1)
    auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    return k % n;
}

}  // namespace cvqkd::fft
