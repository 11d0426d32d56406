#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace cvqkd {

using cd = std::complex<double>;

/// Complex baseband sample stream in shot-noise units (SNU).
///
/// The SNU scale is pinned at the heterodyne output: a pure vacuum input
/// produces per-quadrature sample variance 1.0 at the receiver sample
/// rate. Everything upstream (DAC-rate frames, channel input) carries the
/// same numeric scale so that no rescaling happens between stages.
struct Waveform {
    std::vector<cd> samples;
    double rate = 0.0;  // samples per second

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration() const { return rate > 0.0 ? static_cast<double>(samples.size()) / rate : 0.0; }
};

// Binary waveform file layout, little-endian:
//   bytes  0..7   magic "CVQKDWAV"
//   bytes  8..11  version (u32)
//   bytes 12..15  reserved, zero
//   bytes 16..23  sample rate (f64)
//   bytes 24..31  sample count (u64)
// followed by interleaved I/Q samples as 8-byte floats.
inline constexpr std::uint32_t kWaveformFileVersion = 1;

void save_waveform(const Waveform& wave, const std::string& path);
Waveform load_waveform(const std::string& path);

}  // namespace cvqkd
