#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace repcnn {

namespace detail {

inline double rms(const std::vector<float>& s) {
    double acc = 0.0;
    for (float v : s) acc += static_cast<double>(v) * v;
    return s.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(s.size()));
}

inline float clip_sample(double v) {
    if (v > 1.0) return 1.0f;
    if (v < -1.0) return -1.0f;
    return static_cast<float>(v);
}

}  // namespace detail

/// samples * 10^(db/20), clipped to [-1, 1]. The training recipe draws db
/// uniformly from [-40, 10].
inline std::vector<float> gain_augment(const std::vector<float>& samples, float db) {
    const double g = std::pow(10.0, static_cast<double>(db) / 20.0);
    std::vector<float> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = detail::clip_sample(g * samples[i]);
    return out;
}

/// Add noise scaled to the requested SNR (RMS-based), then clip. Noise
/// shorter than the signal wraps around. snr_db = +inf returns the signal
/// unchanged.
inline std::vector<float> mix_noise(const std::vector<float>& samples,
                                    const std::vector<float>& noise, float snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return samples;
    const double sig_rms = detail::rms(samples);
    if (sig_rms <= 0.0)
        throw std::invalid_argument("mix_noise: silent signal, SNR undefined");
    if (noise.empty() || detail::rms(noise) <= 0.0)
        throw std::invalid_argument("mix_noise: silent noise");
    const double scale =
        sig_rms / (detail::rms(noise) * std::pow(10.0, static_cast<double>(snr_db) / 20.0));
    std::vector<float> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = detail::clip_sample(static_cast<double>(samples[i]) +
                                     scale * noise[i % noise.size()]);
    return out;
}

/// Full causal convolution with an impulse response, truncated to the input
/// length and peak-normalized when it would overflow full scale.
inline std::vector<float> rir_convolve(const std::vector<float>& samples,
                                       const std::vector<float>& impulse) {
    if (impulse.empty()) throw std::invalid_argument("rir_convolve: empty impulse");
    std::vector<double> acc(samples.size(), 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::size_t jmax = std::min(impulse.size() - 1, i);
        double v = 0.0;
        for (std::size_t j = 0; j <= jmax; ++j)
            v += static_cast<double>(impulse[j]) * samples[i - j];
        acc[i] = v;
    }
    double peak = 0.0;
    for (double v : acc) peak = std::max(peak, std::fabs(v));
    const double norm = peak > 1.0 ? 1.0 / peak : 1.0;
    std::vector<float> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = static_cast<float>(acc[i] * norm);
    return out;
}

}  // namespace repcnn
