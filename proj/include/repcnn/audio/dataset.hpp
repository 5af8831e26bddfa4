#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "repcnn/audio/wav.hpp"
#include "repcnn/features/mfcc.hpp"
#include "repcnn/tensor.hpp"
#include "repcnn/util/rng.hpp"

namespace repcnn {

enum class Split { train, val, test_positive, test_negative };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test_positive: return "test-positive";
        case Split::test_negative: return "test-negative";
    }
    return "?";
}

inline Split split_from(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test-positive") return Split::test_positive;
    if (s == "test-negative") return Split::test_negative;
    throw std::runtime_error("manifest: unknown split tag '" + s + "'");
}

/// One manifest record. Tab-separated on disk, one record per line:
///   path <TAB> span_start_frame <TAB> span_end_frame <TAB> split
/// with -1/-1 when no keyword span is present. Paths are stored relative to
/// the manifest file and resolved at load.
struct ManifestEntry {
    std::string path;
    int span_start = -1;
    int span_end = -1;
    Split split = Split::train;

    bool has_span() const { return span_start >= 0; }
};

inline void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("manifest: cannot write " + path);
    for (const auto& e : entries)
        f << e.path << '\t' << e.span_start << '\t' << e.span_end << '\t'
          << split_name(e.split) << '\n';
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path,
                                                bool check_paths = true) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    const auto base = std::filesystem::path(path).parent_path();
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ManifestEntry e;
        std::string split_tag;
        std::string spath;
        if (!std::getline(ss, spath, '\t')) goto bad;
        {
            std::string s1, s2;
            if (!std::getline(ss, s1, '\t') || !std::getline(ss, s2, '\t') ||
                !std::getline(ss, split_tag))
                goto bad;
            e.span_start = std::stoi(s1);
            e.span_end = std::stoi(s2);
        }
        e.path = (base / spath).string();
        e.split = split_from(split_tag);
        if (e.has_span() && e.span_start >= e.span_end)
            throw std::runtime_error("manifest: invalid span at line " + std::to_string(lineno));
        if (check_paths && !std::filesystem::exists(e.path))
            throw std::runtime_error("manifest: missing audio file " + e.path);
        out.push_back(std::move(e));
        continue;
    bad:
        throw std::runtime_error("manifest: malformed line " + std::to_string(lineno) + " in " +
                                 path);
    }
    return out;
}

/// An utterance lifted into feature space; windows are column slices of it.
struct FeaturizedUtterance {
    std::string id;
    Tensor features;  // (n_mfcc, total_frames)
    std::optional<KeywordSpan> span;

    int total_frames() const { return features.dim(1); }
};

struct WindowSample {
    Tensor features;  // (n_mfcc, window_frames)
    bool positive = false;
    std::string source_id;
    int offset = 0;  // first frame of the window
};

namespace detail {

inline Tensor slice_window(const Tensor& feats, int offset, int window_frames) {
    Tensor w({feats.dim(0), window_frames});
    for (int c = 0; c < feats.dim(0); ++c)
        for (int t = 0; t < window_frames; ++t) w.at2(c, t) = feats.at2(c, offset + t);
    return w;
}

}  // namespace detail

/// The positive window ends exactly at the keyword's end frame and must
/// contain the whole keyword.
inline WindowSample harvest_positive(const FeaturizedUtterance& utt, int window_frames) {
    if (!utt.span) throw std::invalid_argument("harvest_positive: utterance has no keyword span");
    const int start = utt.span->start_frame;
    const int end = utt.span->end_frame;
    if (end - start > window_frames)
        throw std::invalid_argument("harvest_positive: keyword longer than the window");
    if (end < window_frames)
        throw std::invalid_argument("harvest_positive: keyword ends before one full window");
    if (end > utt.total_frames())
        throw std::invalid_argument("harvest_positive: span exceeds utterance length");
    WindowSample w;
    w.features = detail::slice_window(utt.features, end - window_frames, window_frames);
    w.positive = true;
    w.source_id = utt.id;
    w.offset = end - window_frames;
    return w;
}

/// Random windows that do not contain the full keyword; partial overlap is
/// allowed. Deterministic for a given rng state.
inline std::vector<WindowSample> harvest_negatives(const FeaturizedUtterance& utt,
                                                   int window_frames, int count, Rng& rng) {
    const int total = utt.total_frames();
    if (total < window_frames)
        throw std::invalid_argument("harvest_negatives: utterance shorter than one window");
    const int max_offset = total - window_frames;

    // offsets o with o <= start && o + W >= end fully contain the keyword;
    // that is one contiguous forbidden interval
    int bad_lo = 1, bad_hi = 0;
    if (utt.span) {
        bad_lo = std::max(0, utt.span->end_frame - window_frames);
        bad_hi = std::min(utt.span->start_frame, max_offset);
    }
    const int bad_count = bad_hi >= bad_lo ? bad_hi - bad_lo + 1 : 0;
    const int valid_count = max_offset + 1 - bad_count;
    if (valid_count <= 0)
        throw std::invalid_argument("harvest_negatives: no negative window exists");

    std::vector<WindowSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        int r = rng.uniform_int(0, valid_count - 1);
        const int offset = (bad_count > 0 && r >= bad_lo) ? r + bad_count : r;
        WindowSample w;
        w.features = detail::slice_window(utt.features, offset, window_frames);
        w.positive = false;
        w.source_id = utt.id;
        w.offset = offset;
        out.push_back(std::move(w));
    }
    return out;
}

inline FeaturizedUtterance featurize(const Utterance& u, const MfccConfig& cfg = {}) {
    FeaturizedUtterance f;
    f.id = u.id;
    f.features = mfcc(u.samples, cfg);
    f.span = u.keyword_span;
    if (f.span && f.span->end_frame > f.total_frames())
        throw std::runtime_error("featurize: keyword span exceeds feature length for " + u.id);
    return f;
}

}  // namespace repcnn
