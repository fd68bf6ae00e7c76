#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "rpra/dsp.hpp"
#include "rpra/rng.hpp"
#include "rpra/wav_io.hpp"

using namespace rpra;

namespace {

Waveform sine(double freq, double duration_s, double amp = 0.5) {
    Waveform w;
    w.samples.resize(static_cast<std::size_t>(duration_s * 16000));
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / 16000.0);
    return w;
}

}  // namespace

TEST_CASE("raw frame count formula") {
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        const std::size_t s = 400 + rng.uniform_int(200000);
        const int expect = 1 + static_cast<int>((s - 400) / 160);
        CHECK(raw_frame_count(s, 400, 160) == expect);
    }
    CHECK(raw_frame_count(399, 400, 160) == 0);
    CHECK(raw_frame_count(400, 400, 160) == 1);
    // 10 s at 16 kHz: 1 + floor((160000-400)/160) = 998
    CHECK(raw_frame_count(160000, 400, 160) == 998);
}

TEST_CASE("fbank shape and standardization at defaults") {
    const Waveform w = sine(440.0, 10.0);
    const FbankGrid g = compute_fbank(w);
    CHECK(g.mel_bins() == 128);
    CHECK(g.frames() == 1024);
    CHECK(std::abs(g.values.mean()) <= 1e-6);
    const double var = (g.values.array() - g.values.mean()).square().mean();
    CHECK(std::abs(var - 1.0) <= 1e-4);
}

TEST_CASE("fbank standardization when cropping") {
    FbankConfig cfg;
    cfg.target_frames = 96;
    const Waveform w = sine(300.0, 1.2);  // 118 raw frames, center-cropped
    const FbankGrid g = compute_fbank(w, cfg);
    CHECK(g.frames() == 96);
    CHECK(std::abs(g.values.mean()) <= 1e-6);
    const double var = (g.values.array() - g.values.mean()).square().mean();
    CHECK(std::abs(var - 1.0) <= 1e-4);
}

TEST_CASE("all-zero waveform maps to all-zero grid") {
    Waveform w;
    w.samples.assign(16000, 0.0);
    const FbankGrid g = compute_fbank(w, FbankConfig{.target_frames = 96});
    CHECK(g.values.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("pure tone peaks at the mel bin nearest its frequency") {
    const Waveform w = sine(1000.0, 2.0);
    FbankConfig cfg;
    cfg.target_frames = 192;
    const FbankGrid g = compute_fbank(w, cfg);
    Eigen::Index argmax = 0;
    g.values.rowwise().mean().maxCoeff(&argmax);

    const auto centers = mel_center_frequencies(cfg.mel_bins, 16000);
    int nearest = 0;
    for (int m = 1; m < cfg.mel_bins; ++m)
        if (std::abs(centers[static_cast<std::size_t>(m)] - 1000.0) <
            std::abs(centers[static_cast<std::size_t>(nearest)] - 1000.0))
            nearest = m;
    CHECK(static_cast<int>(argmax) == nearest);
}

TEST_CASE("fbank input validation") {
    Waveform empty;
    CHECK_THROWS_AS(compute_fbank(empty), InvalidInput);

    Waveform nan_wave = sine(440.0, 0.5);
    nan_wave.samples[100] = std::nan("");
    CHECK_THROWS_AS(compute_fbank(nan_wave), InvalidInput);

    Waveform wrong_rate = sine(440.0, 0.5);
    wrong_rate.sample_rate = 8000;
    CHECK_THROWS_AS(compute_fbank(wrong_rate), InvalidInput);

    FbankConfig bad;
    bad.window_ms = 5.0;  // < hop
    CHECK_THROWS_AS(compute_fbank(sine(440.0, 0.5), bad), InvalidInput);
}

TEST_CASE("patchify counts and round trip") {
    const FbankGrid g10 = compute_fbank(sine(523.0, 10.0));
    PatchSet p = patchify(g10);
    CHECK(p.size() == 512);
    CHECK(p.F == 8);
    CHECK(p.T == 64);
    CHECK(p.patches.cols() == 256);

    const FbankGrid back = unpatchify(p);
    CHECK((back.values - g10.values).cwiseAbs().maxCoeff() == 0.0);  // bit-exact

    FbankGrid tiny;
    tiny.values = Mat::Random(128, 16);
    CHECK(patchify(tiny).size() == 8);

    FbankGrid odd;
    odd.values = Mat::Random(100, 32);
    CHECK_THROWS_AS(patchify(odd), InvalidInput);
}

TEST_CASE("unpatchify is order-independent and validates coords") {
    Rng rng(5);
    FbankGrid g;
    g.values = rpra::testing::random_mat(32, 48, rng);
    PatchSet p = patchify(g);

    // permute patches, keep coords attached
    std::vector<int> perm(static_cast<std::size_t>(p.size()));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    PatchSet q = p;
    for (int i = 0; i < p.size(); ++i) {
        q.patches.row(i) = p.patches.row(perm[static_cast<std::size_t>(i)]);
        q.coords[static_cast<std::size_t>(i)] = p.coords[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    CHECK((unpatchify(q).values - g.values).cwiseAbs().maxCoeff() == 0.0);

    // single constant patch
    PatchSet single;
    single.F = 1;
    single.T = 1;
    single.patches = Mat::Constant(1, 256, 4.5);
    single.coords = {{0, 0}};
    single.mask = {0};
    CHECK((unpatchify(single).values - Mat::Constant(16, 16, 4.5)).cwiseAbs().maxCoeff() == 0.0);

    // duplicate coordinate rejected
    PatchSet dup = p;
    dup.coords[1] = dup.coords[0];
    CHECK_THROWS_AS(unpatchify(dup), InvalidInput);
}

TEST_CASE("wav io round trip and format rejection") {
    const auto dir = std::filesystem::temp_directory_path() / "rpra_wav_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "tone.wav").string();

    const Waveform w = sine(440.0, 0.25);
    write_wav(path, w);
    const Waveform r = read_wav(path);
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate == 16000);
    double max_err = 0.0;
    for (std::size_t i = 0; i < r.samples.size(); ++i)
        max_err = std::max(max_err, std::abs(r.samples[i] - w.samples[i]));
    CHECK(max_err <= 1.0 / 32000.0);

    // stereo gets rejected
    const std::string bad = (dir / "stereo.wav").string();
    {
        std::ofstream out(bad, std::ios::binary);
        auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
        auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
        out.write("RIFF", 4);
        u32(36 + 4);
        out.write("WAVE", 4);
        out.write("fmt ", 4);
        u32(16);
        u16(1);
        u16(2);  // stereo
        u32(16000);
        u32(64000);
        u16(4);
        u16(16);
        out.write("data", 4);
        u32(4);
        u32(0);
    }
    CHECK_THROWS_AS(read_wav(bad), InvalidInput);
    CHECK_THROWS_AS(read_wav((dir / "missing.wav").string()), IoError);
}
