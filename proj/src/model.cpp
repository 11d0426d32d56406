#include "cvqkd/model.hpp"

#include <cmath>
#include <stdexcept>

#include "cvqkd/rng.hpp"

namespace cvqkd::model {

void ChannelParams::validate() const {
    if (!(eta > 0.0 && eta <= 1.0))
        throw std::invalid_argument("channel eta must be in (0, 1]");
    if (!(detector_efficiency > 0.0 && detector_efficiency <= 1.0))
        throw std::invalid_argument("detector efficiency must be in (0, 1]");
    if (!(excess_photons >= 0.0) || !std::isfinite(excess_photons))
        throw std::invalid_argument("excess_photons must be finite and >= 0");
    if (!(electronic_noise_photons >= 0.0) || !std::isfinite(electronic_noise_photons))
        throw std::invalid_argument("electronic_noise_photons must be finite and >= 0");
    if (!(lasers.tx_linewidth >= 0.0) || !(lasers.lo_linewidth >= 0.0) ||
        !std::isfinite(lasers.tx_linewidth) || !std::isfinite(lasers.lo_linewidth))
        throw std::invalid_argument("linewidths must be finite and >= 0");
    if (!std::isfinite(lasers.frequency_offset))
        throw std::invalid_argument("frequency offset must be finite");
}

PhaseTrace wiener_phase_noise(std::size_t n, double linewidth, double sample_period,
                              std::uint64_t seed) {
    if (!(linewidth >= 0.0) || !std::isfinite(linewidth))
        throw std::invalid_argument("wiener_phase_noise: linewidth must be finite and >= 0");
    if (!(sample_period > 0.0) || !std::isfinite(sample_period))
        throw std::invalid_argument("wiener_phase_noise: sample_period must be finite and > 0");

    PhaseTrace trace;
    trace.rate = 1.0 / sample_period;
    trace.values.resize(n, 0.0);
    if (n == 0 || linewidth == 0.0) return trace;

    const double sigma = std::sqrt(2.0 * kPi * linewidth * sample_period);
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    double theta = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        theta += gauss(rng);
        trace.values[k] = theta;
    }
    return trace;
}

double measurement_model(double theta, std::size_t k, const UkfState& state) {
    return state.pilot_amplitude *
           std::sin(state.freq_offset * static_cast<double>(k) + theta);
}

}  // namespace cvqkd::model
