#include "rpra/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rpra/fft.hpp"
#include "rpra/rng.hpp"
#include "rpra/wav_io.hpp"

namespace rpra {

namespace {

constexpr int kSampleRate = 16000;
constexpr std::uint64_t kTagBonafide = 0x626f6e61ULL;
constexpr std::uint64_t kTagSpoofBase = 0x73706f62ULL;
constexpr std::uint64_t kTagSpoofChain = 0x73706f66ULL;
constexpr std::uint64_t kTagJitter = 0x6a697474ULL;

std::vector<double> lowpass_fft(const std::vector<double>& x, double corner_hz) {
    const std::size_t n = x.size();
    const std::size_t m = next_pow2(n);
    std::vector<std::complex<double>> buf(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = x[i];
    fft(buf);
    const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(m);
    for (std::size_t k = 1; k <= m / 2; ++k) {
        if (static_cast<double>(k) * bin_hz > corner_hz) {
            buf[k] = 0.0;
            if (k != m / 2) buf[m - k] = 0.0;
        }
    }
    fft(buf, true);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = buf[i].real();
    return y;
}

// Hann-windowed STFT with 50% overlap; each frame's spectrum is rotated by a
// random per-frame phase angle, then overlap-added. With zero rotation the
// chain is an exact identity (periodic Hann at half-window hop sums to 1).
std::vector<double> phase_jitter(const std::vector<double>& x, double jitter_rad,
                                 double intensity, Rng& rng) {
    constexpr int kWin = 512;
    constexpr int kHop = 256;
    const std::size_t n = x.size();

    std::vector<double> window(kWin);
    for (int i = 0; i < kWin; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / kWin));

    const std::size_t padded = n + 2 * kWin;
    std::vector<double> in(padded, 0.0), out(padded, 0.0);
    std::copy(x.begin(), x.end(), in.begin() + kWin);

    std::vector<std::complex<double>> buf(kWin);
    for (std::size_t p = 0; p + kWin <= padded; p += kHop) {
        for (int i = 0; i < kWin; ++i) buf[i] = in[p + i] * window[i];
        fft(buf);
        const double theta = rng.normal(0.0, jitter_rad) * intensity;
        const std::complex<double> rot(std::cos(theta), std::sin(theta));
        for (int k = 1; k < kWin / 2; ++k) {
            buf[k] *= rot;
            buf[kWin - k] = std::conj(buf[k]);
        }
        fft(buf, true);
        for (int i = 0; i < kWin; ++i) out[p + i] += buf[i].real();
    }

    std::vector<double> y(n);
    std::copy(out.begin() + kWin, out.begin() + kWin + n, y.begin());
    return y;
}

template <typename Fn>
void parallel_for(int count, Fn&& fn) {
    unsigned workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>({workers, 8u, static_cast<unsigned>(std::max(count, 1))});
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = static_cast<int>(w); i < count; i += static_cast<int>(workers)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

bool ArtifactConfig::any_active() const {
    return quantization_bits > 0 || band_cut_hz > 0.0 || phase_jitter_rad > 0.0;
}

void ArtifactConfig::validate() const {
    if (!any_active()) throw InvalidInput("spoof artifact config: all artifacts disabled");
    if (!(intensity > 0.0 && intensity <= 1.0))
        throw InvalidInput("spoof artifact config: intensity must be in (0, 1]");
    if (quantization_bits < 0 || quantization_bits > 16)
        throw InvalidInput("spoof artifact config: quantization_bits out of range");
    if (band_cut_hz > kSampleRate / 2.0)
        throw InvalidInput("spoof artifact config: band_cut_hz above Nyquist");
}

double requantize(double x, int bits) {
    const double scale = static_cast<double>(1 << (bits - 1));
    return std::clamp(std::round(x * scale) / scale, -1.0, 1.0);
}

Waveform gen_bonafide(std::uint64_t seed, double duration_s) {
    if (duration_s <= 0.0) throw InvalidInput("gen_bonafide: duration must be positive");
    Rng rng(derive_seed(seed, kTagBonafide));

    const std::size_t n = static_cast<std::size_t>(std::lround(duration_s * kSampleRate));
    const double f0 = rng.uniform(100.0, 300.0);
    const int harmonics = 3 + static_cast<int>(rng.uniform_int(4));  // 3..6

    std::vector<double> amp(static_cast<std::size_t>(harmonics)), phase(amp.size());
    for (int k = 0; k < harmonics; ++k) {
        amp[static_cast<std::size_t>(k)] = rng.uniform(0.3, 1.0) / (k + 1);
        phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * M_PI);
    }

    const double attack_frac = rng.uniform(0.05, 0.2);
    const double decay_floor = rng.uniform(0.2, 0.6);
    const std::size_t attack_end = std::max<std::size_t>(1, static_cast<std::size_t>(attack_frac * n));

    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < harmonics; ++k)
            s += amp[static_cast<std::size_t>(k)] *
                 std::sin(2.0 * M_PI * (k + 1) * f0 * i / kSampleRate +
                          phase[static_cast<std::size_t>(k)]);
        double env;
        if (i < attack_end) {
            env = static_cast<double>(i) / attack_end;
        } else {
            const double u = static_cast<double>(i - attack_end) /
                             std::max<std::size_t>(1, n - attack_end);
            env = std::exp(std::log(decay_floor) * u);
        }
        w.samples[i] = env * s;
    }

    double power = 0.0;
    for (double s : w.samples) power += s * s;
    power /= static_cast<double>(n);
    const double snr_db = rng.uniform(30.0, 40.0);
    const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (double& s : w.samples) s += rng.normal(0.0, noise_std);

    double peak = 0.0;
    for (double s : w.samples) peak = std::max(peak, std::abs(s));
    const double gain = 0.9 / peak;
    for (double& s : w.samples) s *= gain;
    return w;
}

Waveform gen_spoof(const Waveform& bonafide, const ArtifactConfig& a, std::uint64_t seed) {
    a.validate();
    if (bonafide.samples.empty()) throw InvalidInput("gen_spoof: empty input");

    std::vector<double> x = bonafide.samples;
    if (a.quantization_bits > 0) {
        for (double& s : x) s += a.intensity * (requantize(s, a.quantization_bits) - s);
    }
    if (a.band_cut_hz > 0.0) {
        const std::vector<double> lp = lowpass_fft(x, a.band_cut_hz);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += a.intensity * (lp[i] - x[i]);
    }
    if (a.phase_jitter_rad > 0.0) {
        Rng rng(derive_seed(seed, kTagJitter));
        x = phase_jitter(x, a.phase_jitter_rad, a.intensity, rng);
    }
    for (double& s : x) s = std::clamp(s, -1.0, 1.0);

    Waveform out;
    out.sample_rate = bonafide.sample_rate;
    out.samples = std::move(x);
    return out;
}

Manifest build_corpus(int n_real, int n_fake, std::uint64_t seed, const std::string& out_dir,
                      double duration_s, const ArtifactConfig& artifact) {
    if (n_real < 1 || n_fake < 1)
        throw InvalidInput("build_corpus: need at least one item per class");
    artifact.validate();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create corpus directory " + out_dir + ": " + ec.message());

    Manifest m;
    m.dir = out_dir;
    m.entries.resize(static_cast<std::size_t>(n_real + n_fake));

    char name[64];
    for (int i = 0; i < n_real; ++i) {
        std::snprintf(name, sizeof(name), "bonafide_%05d.wav", i);
        m.entries[static_cast<std::size_t>(i)] = {name, Label::bonafide};
    }
    for (int j = 0; j < n_fake; ++j) {
        std::snprintf(name, sizeof(name), "spoof_%05d.wav", j);
        m.entries[static_cast<std::size_t>(n_real + j)] = {name, Label::spoof};
    }

    // Per-item seed streams; generation order does not affect the output.
    parallel_for(n_real + n_fake, [&](int i) {
        if (i < n_real) {
            const Waveform w =
                gen_bonafide(derive_seed(seed, kTagBonafide, static_cast<std::uint64_t>(i)),
                             duration_s);
            write_wav(m.resolve(static_cast<std::size_t>(i)), w);
        } else {
            const int j = i - n_real;
            const Waveform base =
                gen_bonafide(derive_seed(seed, kTagSpoofBase, static_cast<std::uint64_t>(j)),
                             duration_s);
            const Waveform w = gen_spoof(
                base, artifact, derive_seed(seed, kTagSpoofChain, static_cast<std::uint64_t>(j)));
            write_wav(m.resolve(static_cast<std::size_t>(i)), w);
        }
    });

    std::ofstream tsv(out_dir + "/manifest.tsv");
    if (!tsv) throw IoError("cannot create manifest in " + out_dir);
    for (const ManifestEntry& e : m.entries)
        tsv << e.path << '\t' << label_name(e.label) << '\n';
    if (!tsv) throw IoError("short write: manifest in " + out_dir);
    return m;
}

Manifest read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path);
    Manifest m;
    m.dir = std::filesystem::path(manifest_path).parent_path().string();
    if (m.dir.empty()) m.dir = ".";
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string path, label;
        if (!std::getline(ss, path, '\t') || !std::getline(ss, label))
            throw InvalidInput(manifest_path + ":" + std::to_string(line_no) +
                               ": expected path<TAB>label");
        m.entries.push_back({path, parse_label(label)});
    }
    if (m.entries.empty()) throw InvalidInput(manifest_path + ": empty manifest");
    return m;
}

}  // namespace rpra
