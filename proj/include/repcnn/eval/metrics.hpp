#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "repcnn/tensor.hpp"

namespace repcnn {

/// A contiguous run of supra-threshold emit frames. Supra frames landing
/// within `refractory` frames of an open event are absorbed into it rather
/// than starting a new alarm.
struct DetectionEvent {
    int start = 0;  // inclusive emit-frame indices
    int end = 0;
    float peak = -std::numeric_limits<float>::infinity();
};

inline std::vector<DetectionEvent> detect_events(const std::vector<float>& scores,
                                                 float threshold, int refractory_frames = 100) {
    std::vector<DetectionEvent> events;
    const int gap = std::max(refractory_frames, 1);
    for (int t = 0; t < static_cast<int>(scores.size()); ++t) {
        if (scores[t] < threshold) continue;
        if (!events.empty() && t - events.back().end <= gap) {
            events.back().end = t;
            events.back().peak = std::max(events.back().peak, scores[t]);
        } else {
            events.push_back({t, t, scores[t]});
        }
    }
    return events;
}

/// Per-file streamed scores plus the ground-truth span mapped into emit
/// frames (inclusive) when the file carries a keyword.
struct ScoredFile {
    std::string id;
    std::vector<float> scores;
    std::optional<std::pair<int, int>> gt_emit;
    double seconds = 0.0;
};

namespace detail {

inline bool overlaps_gt(const DetectionEvent& e, const std::pair<int, int>& gt) {
    return e.start <= gt.second && e.end >= gt.first;
}

}  // namespace detail

struct FrrFaPoint {
    float threshold = 0.0f;
    double frr_percent = 0.0;
    double fa_per_hour = 0.0;
    int false_rejects = 0;
    int false_alarms = 0;
};

/// Literal single-threshold evaluation: a positive counts as detected when
/// any event overlaps its ground-truth span; every event on a negative file
/// is a false alarm.
inline FrrFaPoint compute_frr_fa(const std::vector<ScoredFile>& positives,
                                 const std::vector<ScoredFile>& negatives, float threshold,
                                 double negative_hours, int refractory_frames = 100) {
    if (negative_hours <= 0.0 && !negatives.empty())
        throw std::invalid_argument("compute_frr_fa: negative_hours must be positive");
    FrrFaPoint p;
    p.threshold = threshold;
    for (const auto& f : positives) {
        if (!f.gt_emit) throw std::invalid_argument("compute_frr_fa: positive without span");
        const auto events = detect_events(f.scores, threshold, refractory_frames);
        bool hit = false;
        for (const auto& e : events) hit |= detail::overlaps_gt(e, *f.gt_emit);
        p.false_rejects += hit ? 0 : 1;
    }
    for (const auto& f : negatives)
        p.false_alarms +=
            static_cast<int>(detect_events(f.scores, threshold, refractory_frames).size());
    p.frr_percent = positives.empty()
                        ? 0.0
                        : 100.0 * p.false_rejects / static_cast<double>(positives.size());
    p.fa_per_hour = negatives.empty() ? 0.0 : p.false_alarms / negative_hours;
    return p;
}

struct DetCurve {
    std::vector<FrrFaPoint> points;  // sorted by ascending threshold
};

namespace detail {

// Default sweep: distinct observed peak scores. Peaks are the local maxima
// of each score sequence -- every event peak at any threshold is one of
// them -- rank-subsampled to a cap.
inline std::vector<float> default_thresholds(const std::vector<ScoredFile>& positives,
                                             const std::vector<ScoredFile>& negatives,
                                             std::size_t cap = 512) {
    std::vector<float> peaks;
    for (const auto* set : {&positives, &negatives})
        for (const auto& f : *set) {
            const auto& v = f.scores;
            for (std::size_t t = 0; t < v.size(); ++t) {
                const bool left_ok = t == 0 || v[t] >= v[t - 1];
                const bool right_ok = t + 1 == v.size() || v[t] >= v[t + 1];
                if (left_ok && right_ok) peaks.push_back(v[t]);
            }
        }
    std::sort(peaks.begin(), peaks.end());
    peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());
    if (peaks.size() > cap && cap > 1) {
        std::vector<float> sub;
        sub.reserve(cap);
        for (std::size_t i = 0; i < cap; ++i)
            sub.push_back(peaks[i * (peaks.size() - 1) / (cap - 1)]);
        sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
        peaks = std::move(sub);
    }
    return peaks;
}

}  // namespace detail

/// Threshold sweep. Raw per-threshold counts are forced onto the monotone
/// envelope (FA non-increasing, FRR non-decreasing in threshold), which is
/// how the trade-off curve is reported.
inline DetCurve det_curve(const std::vector<ScoredFile>& positives,
                          const std::vector<ScoredFile>& negatives, double negative_hours,
                          std::vector<float> thresholds = {}, int refractory_frames = 100) {
    if (thresholds.empty())
        thresholds = detail::default_thresholds(positives, negatives);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    DetCurve curve;
    for (float t : thresholds)
        curve.points.push_back(
            compute_frr_fa(positives, negatives, t, negative_hours, refractory_frames));
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        curve.points[i].fa_per_hour =
            std::min(curve.points[i].fa_per_hour, curve.points[i - 1].fa_per_hour);
        curve.points[i].frr_percent =
            std::max(curve.points[i].frr_percent, curve.points[i - 1].frr_percent);
    }
    return curve;
}

struct OperatingPoint {
    double frr_percent = 0.0;
    bool clamped = false;  // target FA outside the swept range
};

/// FRR at a target FA/hr by linear interpolation in FA between the two
/// bracketing curve points; clamps to the nearest endpoint outside the range.
inline OperatingPoint frr_at_fa(const DetCurve& curve, double target_fa_per_hour = 3.0) {
    if (curve.points.empty()) throw std::invalid_argument("frr_at_fa: empty curve");
    // points are sorted by threshold; FA is non-increasing along them
    const auto& first = curve.points.front();  // highest FA
    const auto& last = curve.points.back();    // lowest FA
    if (target_fa_per_hour >= first.fa_per_hour)
        return {first.frr_percent, target_fa_per_hour > first.fa_per_hour};
    if (target_fa_per_hour <= last.fa_per_hour)
        return {last.frr_percent, target_fa_per_hour < last.fa_per_hour};
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& hi = curve.points[i - 1];  // larger FA
        const auto& lo = curve.points[i];
        if (target_fa_per_hour <= hi.fa_per_hour && target_fa_per_hour >= lo.fa_per_hour) {
            if (hi.fa_per_hour == lo.fa_per_hour) return {lo.frr_percent, false};
            const double w =
                (target_fa_per_hour - lo.fa_per_hour) / (hi.fa_per_hour - lo.fa_per_hour);
            return {lo.frr_percent + w * (hi.frr_percent - lo.frr_percent), false};
        }
    }
    return {last.frr_percent, true};
}

/// Mann-Whitney AUC: fraction of (positive, negative) score pairs ranked
/// correctly, ties counting half. Rank-sum implementation; exact.
inline double roc_auc(const std::vector<float>& positive_scores,
                      const std::vector<float>& negative_scores) {
    if (positive_scores.empty() || negative_scores.empty())
        throw std::invalid_argument("roc_auc: empty score set");
    struct Entry {
        float score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(positive_scores.size() + negative_scores.size());
    for (float s : positive_scores) all.push_back({s, true});
    for (float s : negative_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // sum of average ranks over positives (ranks are 1-based)
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (all[k].positive) rank_sum += avg_rank;
        i = j;
    }
    const double n_pos = static_cast<double>(positive_scores.size());
    const double n_neg = static_cast<double>(negative_scores.size());
    const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

}  // namespace repcnn
