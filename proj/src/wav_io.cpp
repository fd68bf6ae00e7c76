#include "rpra/wav_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace rpra {

namespace {

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);

    char tag[5] = {0};
    in.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0)
        throw InvalidInput(path + ": not a RIFF file");
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0)
        throw InvalidInput(path + ": not a WAVE file");

    bool got_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::vector<char> data;

    while (in.read(tag, 4)) {
        const std::uint32_t chunk_size = read_u32(in);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            data.resize(chunk_size);
            in.read(data.data(), chunk_size);
            break;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }

    if (!got_fmt) throw InvalidInput(path + ": missing fmt chunk");
    if (format != 1) throw InvalidInput(path + ": not PCM (format tag " + std::to_string(format) + ")");
    if (channels != 1) throw InvalidInput(path + ": expected mono, got " + std::to_string(channels) + " channels");
    if (bits != 16) throw InvalidInput(path + ": expected 16-bit samples, got " + std::to_string(bits));
    if (rate != 16000) throw InvalidInput(path + ": expected 16 kHz, got " + std::to_string(rate) + " Hz");
    if (data.empty()) throw InvalidInput(path + ": empty data chunk");

    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    const std::size_t n = data.size() / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s = static_cast<std::int16_t>(
            static_cast<unsigned char>(data[2 * i]) |
            (static_cast<unsigned char>(data[2 * i + 1]) << 8));
        w.samples[i] = static_cast<double>(s) / 32768.0;
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create WAV file: " + path);

    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_bytes = n * 2;
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (std::uint32_t i = 0; i < n; ++i) {
        double x = w.samples[i];
        if (x > 1.0) x = 1.0;
        if (x < -1.0) x = -1.0;
        const std::int16_t s = static_cast<std::int16_t>(std::lround(x * 32767.0));
        write_u16(out, static_cast<std::uint16_t>(s));
    }
    if (!out) throw IoError("short write: " + path);
}

}  // namespace rpra
