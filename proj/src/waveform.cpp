#include "cvqkd/waveform.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cvqkd {

static_assert(std::endian::native == std::endian::little,
              "waveform file I/O assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'C', 'V', 'Q', 'K', 'D', 'W', 'A', 'V'};
}

void save_waveform(const Waveform& wave, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);

    char header[32] = {};
    std::memcpy(header, kMagic, 8);
    std::uint32_t version = kWaveformFileVersion;
    std::memcpy(header + 8, &version, 4);
    std::memcpy(header + 16, &wave.rate, 8);
    std::uint64_t count = wave.samples.size();
    std::memcpy(header + 24, &count, 8);
    out.write(header, sizeof(header));

    // std::complex<double> is layout-compatible with double[2] (I, Q)
    out.write(reinterpret_cast<const char*>(wave.samples.data()),
              static_cast<std::streamsize>(wave.samples.size() * sizeof(cd)));
    if (!out) throw std::runtime_error("short write: " + path);
}

Waveform load_waveform(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);

    char header[32];
    in.read(header, sizeof(header));
    if (!in || std::memcmp(header, kMagic, 8) != 0)
        throw std::runtime_error("not a CVQKDWAV file: " + path);

    std::uint32_t version = 0;
    std::memcpy(&version, header + 8, 4);
    if (version != kWaveformFileVersion)
        throw std::runtime_error("unsupported waveform file version");

    Waveform wave;
    std::memcpy(&wave.rate, header + 16, 8);
    std::uint64_t count = 0;
    std::memcpy(&count, header + 24, 8);

    wave.samples.resize(count);
    in.read(reinterpret_cast<char*>(wave.samples.data()),
            static_cast<std::streamsize>(count * sizeof(cd)));
    if (!in) throw std::runtime_error("truncated waveform file: " + path);
    return wave;
}

}  // namespace cvqkd
