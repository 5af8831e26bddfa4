#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "repcnn/audio/augment.hpp"
#include "repcnn/audio/dataset.hpp"
#include "repcnn/graph.hpp"
#include "repcnn/io/csv.hpp"
#include "repcnn/nn/focal_loss.hpp"
#include "repcnn/nn/optimizer.hpp"
#include "repcnn/util/log.hpp"

namespace repcnn {

struct TrainConfig {
    int epochs = 10;
    int batch_positives = 16;
    int negatives_per_positive = 20;  // harvest ratio, fixed at 1:20
    int top_k = 50;
    float focal_gamma = 2.0f;
    float focal_alpha = 0.25f;
    OptimizerConfig optimizer;  // adam, lr 1e-3
    bool augment_gain = true;
    float gain_min_db = -40.0f;
    float gain_max_db = 10.0f;
    int validate_every = 1;

    void validate() const {
        if (epochs < 0 || batch_positives < 1 || negatives_per_positive < 0)
            throw std::invalid_argument("train: bad batch composition");
        if (top_k < 0 || top_k > batch_positives * negatives_per_positive)
            throw std::invalid_argument(
                "train: top_k must not exceed negatives per batch");
        if (validate_every < 1) throw std::invalid_argument("train: bad validation cadence");
        if (gain_min_db > gain_max_db) throw std::invalid_argument("train: bad gain range");
    }
};

struct LossCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct LossCurve {
    std::uint64_t seed = 0;
    std::vector<LossCurvePoint> points;
};

/// Indices of the k largest losses; ties broken toward the lower index.
inline std::vector<int> select_hard_negatives(const std::vector<float>& neg_losses, int k) {
    std::vector<int> idx(neg_losses.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= static_cast<int>(idx.size())) return idx;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return neg_losses[a] > neg_losses[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct Batch {
    Tensor x;                     // (N, n_mfcc, window_frames)
    std::vector<char> positive;   // label per sample
};

struct BatchLossResult {
    float loss = 0.0f;
    ParamGrads grads;
    std::vector<float> sample_losses;
    std::vector<float> sample_grad_logits;  // zero for unselected negatives
    std::vector<int> selected_negatives;
};

namespace detail {

struct SampleSelection {
    double loss_sum = 0.0;
    int n_selected = 0;
    std::vector<float> losses, dlogits;
    std::vector<int> selected_negatives;
    std::vector<char> selected;
};

// Per-sample focal losses on the last emitted logit, with the top-k hardest
// negatives (plus every positive) marked for backprop.
inline SampleSelection mine_batch(const Tensor& logits_nt, const std::vector<char>& positive,
                                  const TrainConfig& cfg) {
    const int n = logits_nt.dim(0);
    const int t_out = logits_nt.dim(2);
    SampleSelection sel;
    sel.losses.resize(n);
    sel.dlogits.resize(n);
    sel.selected.assign(n, 0);

    std::vector<float> neg_losses;
    std::vector<int> neg_index;
    for (int i = 0; i < n; ++i) {
        const float logit = logits_nt.at3(i, 0, t_out - 1);
        auto [loss, dlogit] =
            focal_loss_single(logit, positive[i] ? 1.0f : 0.0f, cfg.focal_gamma, cfg.focal_alpha);
        sel.losses[i] = loss;
        sel.dlogits[i] = dlogit;
        if (positive[i]) {
            sel.selected[i] = 1;
        } else {
            neg_losses.push_back(loss);
            neg_index.push_back(i);
        }
    }
    for (int j : select_hard_negatives(neg_losses, cfg.top_k)) {
        sel.selected[neg_index[j]] = 1;
        sel.selected_negatives.push_back(neg_index[j]);
    }
    for (int i = 0; i < n; ++i)
        if (sel.selected[i]) {
            sel.loss_sum += sel.losses[i];
            sel.n_selected += 1;
        }
    return sel;
}

}  // namespace detail

/// One training step's objective: mean focal loss over all positives plus
/// the top-k hardest negatives. Unselected negatives contribute exactly zero
/// gradient; they still share the forward pass so batch statistics are
/// consistent.
inline BatchLossResult batch_loss(ModelGraph& model, const Batch& batch,
                                  const TrainConfig& cfg) {
    if (batch.x.dim(0) == 0) throw std::invalid_argument("batch_loss: empty batch");
    ForwardCache cache;
    const Tensor logits = graph_forward(model, batch.x, &cache);
    auto sel = detail::mine_batch(logits, batch.positive, cfg);

    BatchLossResult r;
    r.loss = static_cast<float>(sel.loss_sum / sel.n_selected);
    r.sample_losses = sel.losses;
    r.selected_negatives = sel.selected_negatives;
    r.sample_grad_logits.assign(sel.losses.size(), 0.0f);

    Tensor grad_out(logits.shape);
    const int t_out = logits.dim(2);
    for (std::size_t i = 0; i < sel.losses.size(); ++i) {
        if (!sel.selected[i]) continue;
        const float g = sel.dlogits[i] / static_cast<float>(sel.n_selected);
        r.sample_grad_logits[i] = g;
        grad_out.at3(static_cast<int>(i), 0, t_out - 1) = g;
    }
    auto [gx, grads] = graph_backward(model, cache, grad_out);
    r.grads = std::move(grads);
    return r;
}

/// Validation objective: mean focal loss over every validation window, no
/// mining and no update; eval-mode statistics.
inline double val_batch_loss(ModelGraph& model, const Batch& batch, const TrainConfig& cfg) {
    const Tensor logits = graph_forward(model, batch.x);
    const int t_out = logits.dim(2);
    double sum = 0.0;
    for (int i = 0; i < logits.dim(0); ++i) {
        auto [loss, dlogit] =
            focal_loss_single(logits.at3(i, 0, t_out - 1), batch.positive[i] ? 1.0f : 0.0f,
                              cfg.focal_gamma, cfg.focal_alpha);
        sum += loss;
    }
    return sum / logits.dim(0);
}

/// One utterance of the training corpus. Raw samples are retained only when
/// gain augmentation is on; otherwise features are computed once up front.
struct TrainUtterance {
    std::string id;
    std::optional<KeywordSpan> span;
    std::vector<float> samples;
    Tensor features;
};

inline std::vector<TrainUtterance> load_train_utterances(
    const std::vector<ManifestEntry>& entries, bool keep_samples,
    const MfccConfig& mfcc_cfg = {}) {
    std::vector<TrainUtterance> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        Utterance u = read_wav(e.path);
        if (e.has_span()) u.keyword_span = KeywordSpan{e.span_start, e.span_end};
        TrainUtterance t;
        t.id = e.path;
        t.span = u.keyword_span;
        if (keep_samples)
            t.samples = std::move(u.samples);
        else
            t.features = mfcc(u.samples, mfcc_cfg);
        out.push_back(std::move(t));
    }
    return out;
}

namespace detail {

inline FeaturizedUtterance epoch_features(const TrainUtterance& utt, const TrainConfig& cfg,
                                          std::uint64_t seed, int epoch,
                                          const MfccConfig& mfcc_cfg) {
    FeaturizedUtterance f;
    f.id = utt.id;
    f.span = utt.span;
    if (!cfg.augment_gain) {
        if (utt.features.size() > 0)
            f.features = utt.features;
        else if (!utt.samples.empty())
            f.features = mfcc(utt.samples, mfcc_cfg);
        else
            throw std::invalid_argument("train: utterance " + utt.id +
                                        " has neither features nor samples");
        return f;
    }
    if (utt.samples.empty())
        throw std::invalid_argument("train: gain augmentation needs raw samples for " + utt.id);
    Rng rng(derive_seed(seed, utt.id, 0x9a00 + epoch));
    const float db = rng.uniform(cfg.gain_min_db, cfg.gain_max_db);
    f.features = mfcc(gain_augment(utt.samples, db), mfcc_cfg);
    return f;
}

inline Batch assemble_batch(const std::vector<const TrainUtterance*>& utts,
                            const TrainConfig& cfg, int window_frames, std::uint64_t seed,
                            int epoch, const MfccConfig& mfcc_cfg) {
    std::vector<Tensor> windows;
    std::vector<char> labels;
    for (const TrainUtterance* u : utts) {
        FeaturizedUtterance f = epoch_features(*u, cfg, seed, epoch, mfcc_cfg);
        windows.push_back(harvest_positive(f, window_frames).features);
        labels.push_back(1);
        Rng rng(derive_seed(seed, u->id, 0x3e90000 + epoch));
        for (auto& neg : harvest_negatives(f, window_frames, cfg.negatives_per_positive, rng)) {
            windows.push_back(std::move(neg.features));
            labels.push_back(0);
        }
    }
    const int n = static_cast<int>(windows.size());
    const int c = windows.front().dim(0);
    Batch b;
    b.x = Tensor({n, c, window_frames});
    for (int i = 0; i < n; ++i)
        std::copy(windows[i].data.begin(), windows[i].data.end(),
                  b.x.data.begin() + static_cast<std::size_t>(i) * c * window_frames);
    b.positive = std::move(labels);
    return b;
}

}  // namespace detail

struct TrainResult {
    LossCurve curve;
    double final_val_loss = 0.0;
};

/// Full training loop: shuffled utterance batches, shared forward pass for
/// mining, Adam/SGD updates, per-epoch validation. Single-threaded and
/// bitwise reproducible for a fixed seed.
inline TrainResult train_model(ModelGraph& model, const std::vector<TrainUtterance>& train_utts,
                               const std::vector<TrainUtterance>& val_utts,
                               const TrainConfig& cfg, int window_frames, std::uint64_t seed,
                               const MfccConfig& mfcc_cfg = {}) {
    cfg.validate();
    if (train_utts.empty()) throw std::invalid_argument("train: empty training set");

    auto params = named_params(model);
    OptimizerState opt_state;
    TrainResult result;
    result.curve.seed = seed;

    // validation batches reuse the epoch-0 harvest each epoch (epoch tag 0)
    auto val_loss = [&]() -> double {
        if (val_utts.empty()) return 0.0;
        model.set_bn_mode(BnMode::eval);
        double sum = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < val_utts.size(); at += cfg.batch_positives) {
            std::vector<const TrainUtterance*> group;
            for (std::size_t i = at; i < val_utts.size() &&
                                     i < at + static_cast<std::size_t>(cfg.batch_positives);
                 ++i)
                group.push_back(&val_utts[i]);
            TrainConfig vcfg = cfg;
            vcfg.augment_gain = false;  // validation is unaugmented
            Batch b = detail::assemble_batch(group, vcfg, window_frames, seed, 0, mfcc_cfg);
            sum += val_batch_loss(model, b, cfg);
            ++batches;
        }
        return sum / batches;
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // deterministic shuffle of utterance order
        std::vector<int> order(train_utts.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(seed, "epoch-order", epoch));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

        model.set_bn_mode(BnMode::train);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_positives) {
            std::vector<const TrainUtterance*> group;
            for (std::size_t i = at;
                 i < order.size() && i < at + static_cast<std::size_t>(cfg.batch_positives); ++i)
                group.push_back(&train_utts[order[i]]);
            Batch b = detail::assemble_batch(group, cfg, window_frames, seed, epoch, mfcc_cfg);
            BatchLossResult r = batch_loss(model, b, cfg);
            if (!std::isfinite(r.loss) || !r.grads.all_finite())
                throw std::runtime_error("train: non-finite loss/gradients at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches) + "; training diverged");
            optimizer_step(params, r.grads, opt_state, cfg.optimizer);
            loss_sum += r.loss;
            ++batches;
        }

        LossCurvePoint pt;
        pt.epoch = epoch;
        pt.train_loss = batches ? loss_sum / batches : 0.0;
        pt.val_loss = (epoch % cfg.validate_every == 0 || epoch == cfg.epochs) ? val_loss() : 0.0;
        result.curve.points.push_back(pt);
        log::debug("seed %llu epoch %d train %.5f val %.5f",
                   static_cast<unsigned long long>(seed), epoch, pt.train_loss, pt.val_loss);
    }
    result.final_val_loss =
        result.curve.points.empty() ? val_loss() : result.curve.points.back().val_loss;
    return result;
}

/// CSV export: seed,epoch,train_loss,val_loss.
inline void export_loss_curves(const std::vector<LossCurve>& curves, const std::string& path) {
    CsvWriter csv(path, {"seed", "epoch", "train_loss", "val_loss"});
    for (const auto& c : curves)
        for (const auto& p : c.points)
            csv.row({std::to_string(c.seed), std::to_string(p.epoch), csv_num(p.train_loss),
                     csv_num(p.val_loss)});
}

}  // namespace repcnn
