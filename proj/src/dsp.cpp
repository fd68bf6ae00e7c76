#include "rpra/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "rpra/fft.hpp"

namespace rpra {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(int mel_bins, int sample_rate) {
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> centers(mel_bins);
    for (int m = 0; m < mel_bins; ++m) {
        const double mel = mel_max * static_cast<double>(m + 1) / (mel_bins + 1);
        centers[m] = mel_to_hz(mel);
    }
    return centers;
}

int raw_frame_count(std::size_t samples, int window_samples, int hop_samples) {
    if (samples < static_cast<std::size_t>(window_samples)) return 0;
    return 1 + static_cast<int>((samples - window_samples) / hop_samples);
}

namespace {

// Triangular filters in the mel domain, unit peak (HTK style), evaluated at
// FFT bin center frequencies. Rows: mel filters, cols: fft_size/2+1 bins.
Mat build_mel_filterbank(int mel_bins, int fft_size, int sample_rate) {
    const int n_bins = fft_size / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> mel_pts(mel_bins + 2);
    for (int i = 0; i < mel_bins + 2; ++i)
        mel_pts[i] = mel_max * static_cast<double>(i) / (mel_bins + 1);

    Mat fb = Mat::Zero(mel_bins, n_bins);
    for (int k = 0; k < n_bins; ++k) {
        const double mel_k = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
        for (int m = 0; m < mel_bins; ++m) {
            const double lo = mel_pts[m], mid = mel_pts[m + 1], hi = mel_pts[m + 2];
            double w = 0.0;
            if (mel_k >= lo && mel_k <= mid)
                w = (mel_k - lo) / (mid - lo);
            else if (mel_k > mid && mel_k <= hi)
                w = (hi - mel_k) / (hi - mid);
            if (w > 0.0) fb(m, k) = w;
        }
    }
    return fb;
}

std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
    return w;
}

}  // namespace

FbankGrid compute_fbank(const Waveform& w, const FbankConfig& cfg) {
    if (w.samples.empty()) throw InvalidInput("compute_fbank: empty waveform");
    if (w.sample_rate != 16000)
        throw InvalidInput("compute_fbank: expected 16 kHz input, got " +
                           std::to_string(w.sample_rate) + " Hz");
    for (double s : w.samples)
        if (!std::isfinite(s)) throw InvalidInput("compute_fbank: non-finite sample");
    if (cfg.window_ms < cfg.hop_ms)
        throw InvalidInput("compute_fbank: window must be >= hop");
    if (cfg.target_frames <= 0 || cfg.target_frames % kPatchSide != 0)
        throw InvalidInput("compute_fbank: target_frames must be a positive multiple of 16");

    const int sr = w.sample_rate;
    const int win = static_cast<int>(std::lround(cfg.window_ms * sr / 1000.0));
    const int hop = static_cast<int>(std::lround(cfg.hop_ms * sr / 1000.0));
    if (win > cfg.fft_size)
        throw InvalidInput("compute_fbank: window longer than FFT size");

    // Pad the signal tail with zeros when there are fewer raw frames than
    // target_frames; padded frames land on silence and become log-floor
    // columns, so standardization (the last step) stays exact.
    std::vector<double> x = w.samples;
    int frames = raw_frame_count(x.size(), win, hop);
    if (frames < cfg.target_frames) {
        x.resize(static_cast<std::size_t>(win) + static_cast<std::size_t>(cfg.target_frames - 1) * hop, 0.0);
        frames = cfg.target_frames;
    }

    const std::vector<double> window = hann_window(win);
    const Mat fb = build_mel_filterbank(cfg.mel_bins, cfg.fft_size, sr);
    const int n_bins = cfg.fft_size / 2 + 1;

    Mat grid(cfg.mel_bins, frames);
    std::vector<std::complex<double>> buf(cfg.fft_size);
    Vec mag(n_bins);
    for (int m = 0; m < frames; ++m) {
        const std::size_t off = static_cast<std::size_t>(m) * hop;
        for (int i = 0; i < win; ++i) buf[i] = x[off + i] * window[i];
        for (int i = win; i < cfg.fft_size; ++i) buf[i] = 0.0;
        fft(buf);
        for (int k = 0; k < n_bins; ++k) mag(k) = std::abs(buf[k]);
        grid.col(m) = (fb * mag).unaryExpr([&](double v) {
            return std::log(std::max(v, cfg.log_floor));
        });
    }

    if (frames > cfg.target_frames) {
        const int start = (frames - cfg.target_frames) / 2;
        grid = grid.middleCols(start, cfg.target_frames).eval();
    }

    const double mean = grid.mean();
    const double var = (grid.array() - mean).square().mean();
    if (var < 1e-12) {
        grid.setZero();
    } else {
        grid = (grid.array() - mean) / std::sqrt(var);
    }

    FbankGrid out;
    out.values = std::move(grid);
    out.frame_hop_ms = cfg.hop_ms;
    out.frame_window_ms = cfg.window_ms;
    return out;
}

PatchSet patchify(const FbankGrid& g) {
    const int rows = g.mel_bins(), cols = g.frames();
    if (rows % kPatchSide != 0 || cols % kPatchSide != 0)
        throw InvalidInput("patchify: grid dimensions must be divisible by 16");

    PatchSet p;
    p.F = rows / kPatchSide;
    p.T = cols / kPatchSide;
    const int n = p.F * p.T;
    p.patches.resize(n, kPatchDim);
    p.coords.resize(n);
    p.mask.assign(n, 0);
    for (int f = 0; f < p.F; ++f) {
        for (int t = 0; t < p.T; ++t) {
            const int idx = f * p.T + t;
            p.coords[idx] = {f, t};
            for (int r = 0; r < kPatchSide; ++r)
                for (int c = 0; c < kPatchSide; ++c)
                    p.patches(idx, r * kPatchSide + c) =
                        g.values(f * kPatchSide + r, t * kPatchSide + c);
        }
    }
    return p;
}

FbankGrid unpatchify(const PatchSet& p) {
    if (p.F <= 0 || p.T <= 0) throw InvalidInput("unpatchify: empty patch set");
    if (p.size() != p.F * p.T ||
        static_cast<int>(p.coords.size()) != p.size() ||
        p.patches.cols() != kPatchDim)
        throw InvalidInput("unpatchify: inconsistent patch set");

    std::vector<std::uint8_t> seen(static_cast<std::size_t>(p.F) * p.T, 0);
    FbankGrid g;
    g.values.resize(p.F * kPatchSide, p.T * kPatchSide);
    for (int i = 0; i < p.size(); ++i) {
        const auto [f, t] = p.coords[i];
        if (f < 0 || f >= p.F || t < 0 || t >= p.T)
            throw InvalidInput("unpatchify: coordinate out of range");
        if (seen[static_cast<std::size_t>(f) * p.T + t]++)
            throw InvalidInput("unpatchify: duplicate coordinate");
        for (int r = 0; r < kPatchSide; ++r)
            for (int c = 0; c < kPatchSide; ++c)
                g.values(f * kPatchSide + r, t * kPatchSide + c) =
                    p.patches(i, r * kPatchSide + c);
    }
    return g;
}

}  // namespace rpra
