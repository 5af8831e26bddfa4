#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "repcnn/audio/dataset.hpp"
#include "repcnn/audio/wav.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn {

/// Desk-scale stand-in for a wake-word corpus: the "keyword" is a fixed
/// multi-tone chirp embedded in colored-noise background; negatives carry
/// distractors built from the same chirp with shuffled segments.
struct SynthSpec {
    int train_utterances = 1000;
    int val_utterances = 200;
    int test_positive = 100;
    int test_negative = 30;
    double min_seconds = 2.5;
    double max_seconds = 3.5;
    double test_negative_seconds = 60.0;  // length of each negative test file
    double keyword_seconds = 0.5;
    double keyword_snr_db = 14.0;   // keyword level above background
    double distractor_snr_db = 14.0;
    int sample_rate = 16000;
    int hop = 160;

    void validate() const {
        if (train_utterances < 0 || val_utterances < 0 || test_positive < 0 ||
            test_negative < 0)
            throw std::invalid_argument("synth: negative utterance count");
        if (min_seconds > max_seconds || min_seconds < 1.0)
            throw std::invalid_argument("synth: bad duration range");
        if (keyword_seconds <= 0.05 || keyword_seconds > min_seconds / 2)
            throw std::invalid_argument("synth: bad keyword duration");
    }

    int keyword_frames() const {
        return static_cast<int>(std::lround(keyword_seconds * sample_rate)) / hop;
    }
};

namespace synth_detail {

// Four fixed tone sweeps with a fade envelope. Not seed-dependent: every
// dataset shares the same keyword.
inline std::vector<float> chirp_segments(int sample_rate, double seconds,
                                         const int order[4]) {
    static constexpr double kSweeps[4][2] = {
        {600.0, 950.0}, {1250.0, 750.0}, {500.0, 1500.0}, {1050.0, 650.0}};
    const int total = static_cast<int>(std::lround(seconds * sample_rate));
    const int seg = total / 4;
    std::vector<float> out(total, 0.0f);
    for (int s = 0; s < 4; ++s) {
        const double f0 = kSweeps[order[s]][0];
        const double f1 = kSweeps[order[s]][1];
        double phase = 0.0;
        for (int i = 0; i < seg; ++i) {
            const double frac = static_cast<double>(i) / seg;
            const double f = f0 + (f1 - f0) * frac;
            phase += 2.0 * M_PI * f / sample_rate;
            const double fade = std::sin(M_PI * (i + 0.5) / seg);  // per-segment taper
            out[s * seg + i] = static_cast<float>(std::sin(phase) * fade);
        }
    }
    return out;
}

inline std::vector<float> colored_noise(int n, Rng& rng, double target_rms) {
    std::vector<float> out(n);
    double y = 0.0;
    for (int i = 0; i < n; ++i) {
        y = 0.94 * y + 0.06 * rng.normal();
        out[i] = static_cast<float>(y);
    }
    double rms = 0.0;
    for (float v : out) rms += static_cast<double>(v) * v;
    rms = std::sqrt(rms / n);
    const double scale = rms > 0 ? target_rms / rms : 0.0;
    for (float& v : out) v = static_cast<float>(v * scale);
    return out;
}

inline void add_scaled(std::vector<float>& dst, const std::vector<float>& src, int at,
                       double scale) {
    for (std::size_t i = 0; i < src.size() && at + i < dst.size(); ++i)
        dst[at + i] = std::clamp(dst[at + i] + static_cast<float>(scale * src[i]), -1.0f, 1.0f);
}

}  // namespace synth_detail

/// The canonical keyword waveform (unit peak chirp pattern).
inline std::vector<float> keyword_template(int sample_rate = 16000, double seconds = 0.5) {
    const int identity[4] = {0, 1, 2, 3};
    return synth_detail::chirp_segments(sample_rate, seconds, identity);
}

/// A distractor: same chirp vocabulary, segment order shuffled (never the
/// identity order). The permutations are graded from fully scrambled to
/// near-keyword (shared prefix, one swap), so rejecting them spans a range
/// of difficulty instead of one cliff.
inline std::vector<float> distractor_pattern(Rng& rng, int sample_rate = 16000,
                                             double seconds = 0.5) {
    static constexpr int kOrders[6][4] = {
        {3, 2, 1, 0}, {2, 3, 0, 1},  // fully scrambled
        {1, 0, 3, 2}, {2, 0, 3, 1},  // partial structure
        {0, 2, 1, 3}, {0, 1, 3, 2},  // keyword prefix, late swap
    };
    return synth_detail::chirp_segments(sample_rate, seconds,
                                        kOrders[rng.uniform_int(0, 5)]);
}

/// Generate WAV files plus manifest entries for one split. The keyword is
/// placed at hop-aligned offsets so manifest spans are sample-exact.
inline std::vector<ManifestEntry> generate_split(const SynthSpec& spec, Split split, int count,
                                                 const std::string& out_dir,
                                                 std::uint64_t seed) {
    namespace fs = std::filesystem;
    const std::string prefix = [&] {
        switch (split) {
            case Split::train: return "train";
            case Split::val: return "val";
            case Split::test_positive: return "testpos";
            default: return "testneg";
        }
    }();
    const bool with_keyword = split != Split::test_negative;
    const auto kw = keyword_template(spec.sample_rate, spec.keyword_seconds);
    const int kw_frames = spec.keyword_frames();
    const double bg_rms = 0.05;

    std::vector<ManifestEntry> entries;
    for (int i = 0; i < count; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%05d.wav", prefix.c_str(), i);
        Rng rng(derive_seed(seed, std::string(prefix) + "/" + name));

        const double seconds = with_keyword
                                   ? spec.min_seconds +
                                         rng.unit() * (spec.max_seconds - spec.min_seconds)
                                   : spec.test_negative_seconds;
        const int n = static_cast<int>(std::lround(seconds * spec.sample_rate));
        std::vector<float> audio = synth_detail::colored_noise(n, rng, bg_rms);
        const int total_frames = mfcc_frame_count(audio.size(), MfccConfig{});

        ManifestEntry e;
        e.path = name;
        e.split = split;

        const double kw_scale = bg_rms * std::pow(10.0, spec.keyword_snr_db / 20.0) /
                                0.5;  // chirp RMS is ~0.5 of unit peak
        if (with_keyword) {
            // leave room for a full receptive field before the keyword ends
            const int lo = 105;
            const int hi = total_frames - kw_frames - 5;
            if (hi < lo) throw std::runtime_error("synth: utterance too short for keyword");
            const int f0 = rng.uniform_int(lo, hi);
            synth_detail::add_scaled(audio, kw, f0 * spec.hop, kw_scale);
            e.span_start = f0;
            e.span_end = f0 + kw_frames;
        }

        // distractors; negatives get several, positive utterances a couple
        const int n_distractors =
            with_keyword ? 2 : std::max(1, static_cast<int>(seconds / 6.0));
        for (int d = 0; d < n_distractors; ++d) {
            const auto dis = distractor_pattern(rng, spec.sample_rate, spec.keyword_seconds);
            const double dis_scale = bg_rms * std::pow(10.0, spec.distractor_snr_db / 20.0) / 0.5;
            // find a slot that avoids the keyword
            for (int attempt = 0; attempt < 20; ++attempt) {
                const int f = rng.uniform_int(0, std::max(0, total_frames - kw_frames - 2));
                const bool clash = with_keyword && f + kw_frames + 2 > e.span_start &&
                                   f < e.span_end + 2;
                if (clash) continue;
                synth_detail::add_scaled(audio, dis, f * spec.hop, dis_scale);
                break;
            }
        }

        write_wav((fs::path(out_dir) / name).string(), audio, spec.sample_rate);
        entries.push_back(std::move(e));
    }
    return entries;
}

/// Full dataset: WAVs for every split plus a manifest.tsv in out_dir.
/// Deterministic for a given (spec, seed).
inline std::string generate_synthetic_dataset(const SynthSpec& spec, const std::string& out_dir,
                                              std::uint64_t seed) {
    spec.validate();
    std::filesystem::create_directories(out_dir);
    std::vector<ManifestEntry> all;
    for (auto [split, count] :
         {std::pair{Split::train, spec.train_utterances},
          std::pair{Split::val, spec.val_utterances},
          std::pair{Split::test_positive, spec.test_positive},
          std::pair{Split::test_negative, spec.test_negative}}) {
        auto part = generate_split(spec, split, count, out_dir, seed);
        all.insert(all.end(), part.begin(), part.end());
    }
    const std::string manifest_path =
        (std::filesystem::path(out_dir) / "manifest.tsv").string();
    save_manifest(manifest_path, all);
    return manifest_path;
}

}  // namespace repcnn
