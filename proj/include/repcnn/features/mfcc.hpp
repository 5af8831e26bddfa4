#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "repcnn/tensor.hpp"

namespace repcnn {

/// 16 kHz PCM -> 16 MFCCs per 10 ms hop over 25 ms Hann windows.
/// Conventions pinned for bit-stable tests: symmetric Hann, 512-point FFT,
/// HTK mel scale (2595*log10(1+f/700)), natural log with 1e-10 floor,
/// orthonormal DCT-II. No pre-emphasis, no deltas, no normalization.
struct MfccConfig {
    int sample_rate = 16000;
    int window_samples = 400;  // 25 ms
    int hop_samples = 160;     // 10 ms
    int fft_size = 512;
    int n_mels = 26;
    int n_mfcc = 16;
    double log_floor = 1e-10;

    void validate() const {
        if (n_mfcc > n_mels) throw std::invalid_argument("mfcc: n_mfcc must be <= n_mels");
        if (fft_size < window_samples)
            throw std::invalid_argument("mfcc: fft_size must cover the window");
        if ((fft_size & (fft_size - 1)) != 0)
            throw std::invalid_argument("mfcc: fft_size must be a power of two");
        if (hop_samples < 1 || window_samples < 2 || sample_rate < 1)
            throw std::invalid_argument("mfcc: bad framing parameters");
    }
};

namespace detail {

inline std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
    return w;
}

// iterative radix-2 FFT, n a power of two
inline void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t j = 0; j < len / 2; ++j) {
                const double ur = re[i + j], ui = im[i + j];
                const double vr = re[i + j + len / 2] * cr - im[i + j + len / 2] * ci;
                const double vi = re[i + j + len / 2] * ci + im[i + j + len / 2] * cr;
                re[i + j] = ur + vr;
                im[i + j] = ui + vi;
                re[i + j + len / 2] = ur - vr;
                im[i + j + len / 2] = ui - vi;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace detail

inline int mfcc_frame_count(std::size_t n_samples, const MfccConfig& cfg) {
    if (n_samples < static_cast<std::size_t>(cfg.window_samples)) return 0;
    return 1 + static_cast<int>((n_samples - cfg.window_samples) / cfg.hop_samples);
}

/// Sliding Hann-weighted windows; partial tail frames are dropped.
/// Returns (frames, window_samples).
inline Tensor frame_and_window(const std::vector<float>& samples, const MfccConfig& cfg) {
    cfg.validate();
    const int n_frames = mfcc_frame_count(samples.size(), cfg);
    const auto w = detail::hann_window(cfg.window_samples);
    Tensor frames({n_frames, cfg.window_samples});
    for (int t = 0; t < n_frames; ++t)
        for (int i = 0; i < cfg.window_samples; ++i)
            frames.at2(t, i) = static_cast<float>(
                static_cast<double>(samples[t * cfg.hop_samples + i]) * w[i]);
    return frames;
}

/// |DFT|^2 of a zero-padded frame, bins 0..fft_size/2.
inline std::vector<double> power_spectrum(const std::vector<double>& frame, int fft_size) {
    if ((fft_size & (fft_size - 1)) != 0 || fft_size < static_cast<int>(frame.size()))
        throw std::invalid_argument("power_spectrum: bad fft size");
    std::vector<double> re(fft_size, 0.0), im(fft_size, 0.0);
    std::copy(frame.begin(), frame.end(), re.begin());
    detail::fft_inplace(re, im);
    std::vector<double> p(fft_size / 2 + 1);
    for (int b = 0; b <= fft_size / 2; ++b) p[b] = re[b] * re[b] + im[b] * im[b];
    return p;
}

/// Triangular filters on the HTK mel scale, 0 Hz..Nyquist, unit peak,
/// adjacent triangles crossing at half height.
struct MelFilterbank {
    int n_mels = 0;
    int n_bins = 0;
    std::vector<double> weights;  // (n_mels, n_bins)

    static MelFilterbank make(const MfccConfig& cfg) {
        MelFilterbank fb;
        fb.n_mels = cfg.n_mels;
        fb.n_bins = cfg.fft_size / 2 + 1;
        fb.weights.assign(static_cast<std::size_t>(fb.n_mels) * fb.n_bins, 0.0);

        const double mel_lo = detail::hz_to_mel(0.0);
        const double mel_hi = detail::hz_to_mel(cfg.sample_rate / 2.0);
        std::vector<double> hz(cfg.n_mels + 2);
        for (int m = 0; m < cfg.n_mels + 2; ++m)
            hz[m] = detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));

        for (int m = 0; m < cfg.n_mels; ++m) {
            const double lo = hz[m], mid = hz[m + 1], hi = hz[m + 2];
            for (int b = 0; b < fb.n_bins; ++b) {
                const double f = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
                double v = 0.0;
                if (f > lo && f < hi)
                    v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
                fb.weights[static_cast<std::size_t>(m) * fb.n_bins + b] = v;
            }
        }
        return fb;
    }

    double apply(const std::vector<double>& power, int m) const {
        const double* w = weights.data() + static_cast<std::size_t>(m) * n_bins;
        double acc = 0.0;
        for (int b = 0; b < n_bins; ++b) acc += w[b] * power[b];
        return acc;
    }
};

namespace detail {

// tables reused across calls; rebuilding per utterance would dominate runtime
struct MfccTables {
    MfccConfig cfg;
    std::vector<double> hann;
    MelFilterbank fb;
    std::vector<double> dct;  // (n_mfcc, n_mels), orthonormal DCT-II rows

    static const MfccTables& get(const MfccConfig& cfg) {
        static thread_local MfccTables t;
        static thread_local bool ready = false;
        if (!ready || t.cfg.window_samples != cfg.window_samples ||
            t.cfg.fft_size != cfg.fft_size || t.cfg.n_mels != cfg.n_mels ||
            t.cfg.n_mfcc != cfg.n_mfcc || t.cfg.sample_rate != cfg.sample_rate) {
            t.cfg = cfg;
            t.hann = hann_window(cfg.window_samples);
            t.fb = MelFilterbank::make(cfg);
            t.dct.assign(static_cast<std::size_t>(cfg.n_mfcc) * cfg.n_mels, 0.0);
            const double scale0 = std::sqrt(1.0 / cfg.n_mels);
            const double scale = std::sqrt(2.0 / cfg.n_mels);
            for (int j = 0; j < cfg.n_mfcc; ++j)
                for (int m = 0; m < cfg.n_mels; ++m)
                    t.dct[static_cast<std::size_t>(j) * cfg.n_mels + m] =
                        (j == 0 ? scale0 : scale) *
                        std::cos(M_PI * j * (2.0 * m + 1.0) / (2.0 * cfg.n_mels));
            ready = true;
        }
        return t;
    }
};

}  // namespace detail

/// Full pipeline: frame -> Hann -> power spectrum -> mel energies ->
/// log(e + floor) -> orthonormal DCT-II, first n_mfcc coefficients.
/// Returns (n_mfcc, frames).
inline Tensor mfcc(const std::vector<float>& samples, const MfccConfig& cfg = {}) {
    cfg.validate();
    if (samples.size() < static_cast<std::size_t>(cfg.window_samples))
        throw std::invalid_argument("mfcc: audio shorter than one analysis window");
    const int n_frames = mfcc_frame_count(samples.size(), cfg);
    const auto& tables = detail::MfccTables::get(cfg);

    Tensor out({cfg.n_mfcc, n_frames});
    std::vector<double> frame(cfg.window_samples);
    std::vector<double> logmel(cfg.n_mels);

    for (int t = 0; t < n_frames; ++t) {
        for (int i = 0; i < cfg.window_samples; ++i)
            frame[i] = static_cast<double>(samples[t * cfg.hop_samples + i]) * tables.hann[i];
        const auto power = power_spectrum(frame, cfg.fft_size);
        for (int m = 0; m < cfg.n_mels; ++m)
            logmel[m] = std::log(tables.fb.apply(power, m) + cfg.log_floor);
        for (int j = 0; j < cfg.n_mfcc; ++j) {
            const double* row = tables.dct.data() + static_cast<std::size_t>(j) * cfg.n_mels;
            double acc = 0.0;
            for (int m = 0; m < cfg.n_mels; ++m) acc += logmel[m] * row[m];
            out.at2(j, t) = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace repcnn
