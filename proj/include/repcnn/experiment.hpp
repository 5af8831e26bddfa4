#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repcnn/audio/synth.hpp"
#include "repcnn/eval/bench.hpp"
#include "repcnn/eval/metrics.hpp"
#include "repcnn/eval/score.hpp"
#include "repcnn/io/csv.hpp"
#include "repcnn/io/model_file.hpp"
#include "repcnn/model.hpp"
#include "repcnn/reparam.hpp"
#include "repcnn/train/trainer.hpp"
#include "repcnn/util/log.hpp"

namespace repcnn {

struct EvalConfig {
    double fa_target = 3.0;
    int refractory_frames = 100;
};

/// Everything a run needs, parsed from one JSON file. All sections are
/// optional and fall back to defaults.
struct ExperimentSpec {
    std::string manifest;
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    RepCNNConfig model;
    TrainConfig train;
    EvalConfig eval;
    SynthSpec synth;
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

inline void parse_model(const nlohmann::json& j, RepCNNConfig& m) {
    const std::string type = get_or<std::string>(j, "type", "repcnn");
    if (type == "repcnn")
        m.type = ModelType::repcnn;
    else if (type == "single-branch")
        m.type = ModelType::single_branch;
    else
        throw std::runtime_error("spec: unknown model type '" + type + "'");
    m.in_channels = get_or(j, "in_channels", m.in_channels);
    m.width = get_or(j, "width", m.width);
    m.stem_kernel = get_or(j, "stem_kernel", m.stem_kernel);
    m.stem_stride = get_or(j, "stem_stride", m.stem_stride);
    m.stage_kernels = get_or(j, "stage_kernels", m.stage_kernels);
    m.blocks_per_stage = get_or(j, "blocks_per_stage", m.blocks_per_stage);
    m.num_branches = get_or(j, "num_branches", m.num_branches);
}

inline void parse_train(const nlohmann::json& j, TrainConfig& t) {
    t.epochs = get_or(j, "epochs", t.epochs);
    t.batch_positives = get_or(j, "batch_positives", t.batch_positives);
    t.negatives_per_positive = get_or(j, "negatives_per_positive", t.negatives_per_positive);
    t.top_k = get_or(j, "top_k", t.top_k);
    t.focal_gamma = get_or(j, "focal_gamma", t.focal_gamma);
    t.focal_alpha = get_or(j, "focal_alpha", t.focal_alpha);
    t.augment_gain = get_or(j, "augment_gain", t.augment_gain);
    t.gain_min_db = get_or(j, "gain_min_db", t.gain_min_db);
    t.gain_max_db = get_or(j, "gain_max_db", t.gain_max_db);
    t.validate_every = get_or(j, "validate_every", t.validate_every);
    const std::string opt = get_or<std::string>(j, "optimizer", "adam");
    if (opt == "adam")
        t.optimizer.kind = OptimizerKind::adam;
    else if (opt == "sgd")
        t.optimizer.kind = OptimizerKind::sgd;
    else
        throw std::runtime_error("spec: unknown optimizer '" + opt + "'");
    t.optimizer.lr = get_or(j, "lr", t.optimizer.lr);
}

inline void parse_synth(const nlohmann::json& j, SynthSpec& s) {
    s.train_utterances = get_or(j, "train_utterances", s.train_utterances);
    s.val_utterances = get_or(j, "val_utterances", s.val_utterances);
    s.test_positive = get_or(j, "test_positive", s.test_positive);
    s.test_negative = get_or(j, "test_negative", s.test_negative);
    s.min_seconds = get_or(j, "min_seconds", s.min_seconds);
    s.max_seconds = get_or(j, "max_seconds", s.max_seconds);
    s.test_negative_seconds = get_or(j, "test_negative_seconds", s.test_negative_seconds);
    s.keyword_seconds = get_or(j, "keyword_seconds", s.keyword_seconds);
    s.keyword_snr_db = get_or(j, "keyword_snr_db", s.keyword_snr_db);
    s.distractor_snr_db = get_or(j, "distractor_snr_db", s.distractor_snr_db);
}

}  // namespace detail

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("spec: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("spec: invalid JSON in " + path + ": " + e.what());
    }
    ExperimentSpec s;
    const auto base = std::filesystem::path(path).parent_path();
    if (j.contains("manifest"))
        s.manifest = (base / j.at("manifest").get<std::string>()).string();
    if (j.contains("output_dir")) {
        const std::filesystem::path out = j.at("output_dir").get<std::string>();
        s.output_dir = out.is_absolute() ? out.string() : (base / out).string();
    }
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (s.seeds.empty()) throw std::runtime_error("spec: seeds list must not be empty");
    if (j.contains("model")) detail::parse_model(j.at("model"), s.model);
    if (j.contains("train")) detail::parse_train(j.at("train"), s.train);
    if (j.contains("eval")) {
        s.eval.fa_target = detail::get_or(j.at("eval"), "fa_target", s.eval.fa_target);
        s.eval.refractory_frames =
            detail::get_or(j.at("eval"), "refractory_frames", s.eval.refractory_frames);
    }
    if (j.contains("synth")) detail::parse_synth(j.at("synth"), s.synth);
    s.model.validate();
    s.train.validate();
    return s;
}

inline std::vector<ManifestEntry> manifest_split(const std::vector<ManifestEntry>& all,
                                                 Split split) {
    std::vector<ManifestEntry> out;
    for (const auto& e : all)
        if (e.split == split) out.push_back(e);
    return out;
}

struct TrainRun {
    std::uint64_t seed = 0;
    std::string model_path;
    double final_val_loss = 0.0;
};

/// Train one model per seed; writes model_seed<k>.rpcn and loss_curves.csv
/// into output_dir.
inline std::vector<TrainRun> run_training(const ExperimentSpec& spec) {
    if (spec.manifest.empty()) throw std::runtime_error("train: spec has no manifest");
    const auto entries = load_manifest(spec.manifest);
    const auto train_entries = manifest_split(entries, Split::train);
    const auto val_entries = manifest_split(entries, Split::val);
    if (train_entries.empty()) throw std::runtime_error("train: manifest has no train split");

    log::info("loading %zu train / %zu val utterances", train_entries.size(),
              val_entries.size());
    const auto train_utts = load_train_utterances(train_entries, spec.train.augment_gain);
    const auto val_utts = load_train_utterances(val_entries, /*keep_samples=*/false);
    const int window = receptive_field(spec.model);

    std::filesystem::create_directories(spec.output_dir);
    std::vector<TrainRun> runs;
    std::vector<LossCurve> curves;
    for (std::uint64_t seed : spec.seeds) {
        ModelGraph model = build_repcnn(spec.model, seed);
        log::info("training seed %llu (%d params, window %d frames)",
                  static_cast<unsigned long long>(seed), param_count(model), window);
        TrainResult r = train_model(model, train_utts, val_utts, spec.train, window, seed);
        TrainRun run;
        run.seed = seed;
        run.final_val_loss = r.final_val_loss;
        run.model_path =
            (std::filesystem::path(spec.output_dir) / ("model_seed" + std::to_string(seed) +
                                                       ".rpcn"))
                .string();
        save_model(model, run.model_path);
        curves.push_back(r.curve);
        runs.push_back(std::move(run));
    }
    export_loss_curves(
        curves, (std::filesystem::path(spec.output_dir) / "loss_curves.csv").string());
    return runs;
}

struct EvalSummary {
    double frr_at_target = 0.0;
    bool clamped = false;
    double auc = 0.0;
    double negative_hours = 0.0;
    int n_positive = 0;
    int n_negative = 0;
    DetCurve curve;
};

/// Streamed evaluation of the test splits; train-mode graphs are fused on the
/// fly. Writes det.csv and summary.csv when out_dir is non-empty.
inline EvalSummary run_eval(const ModelGraph& graph_in,
                            const std::vector<ManifestEntry>& entries, const EvalConfig& cfg,
                            int threads = 1, const std::string& out_dir = "") {
    const auto pos_entries = manifest_split(entries, Split::test_positive);
    const auto neg_entries = manifest_split(entries, Split::test_negative);
    if (pos_entries.empty()) throw std::runtime_error("eval: manifest has no test-positive split");
    if (neg_entries.empty()) throw std::runtime_error("eval: manifest has no test-negative split");

    ModelGraph fused = graph_in.mode == GraphMode::fused ? graph_in : fuse_model(graph_in);
    const auto positives = score_test_sets(fused, pos_entries, {}, threads);
    const auto negatives = score_test_sets(fused, neg_entries, {}, threads);

    EvalSummary s;
    s.n_positive = static_cast<int>(positives.size());
    s.n_negative = static_cast<int>(negatives.size());
    s.negative_hours = total_hours(negatives);
    s.curve = det_curve(positives, negatives, s.negative_hours, {}, cfg.refractory_frames);
    const auto op = frr_at_fa(s.curve, cfg.fa_target);
    s.frr_at_target = op.frr_percent;
    s.clamped = op.clamped;
    if (op.clamped)
        log::info("warning: FA target %.3g/hr is outside the swept range; FRR clamped",
                  cfg.fa_target);

    // AUC: per-file peak for positives, per-event peak for negatives
    // (events at the sigmoid midpoint; silent files contribute their max)
    std::vector<float> pos_peaks, neg_peaks;
    for (const auto& f : positives)
        pos_peaks.push_back(*std::max_element(f.scores.begin(), f.scores.end()));
    for (const auto& f : negatives) {
        const auto events = detect_events(f.scores, 0.5f, cfg.refractory_frames);
        if (events.empty())
            neg_peaks.push_back(*std::max_element(f.scores.begin(), f.scores.end()));
        else
            for (const auto& e : events) neg_peaks.push_back(e.peak);
    }
    s.auc = roc_auc(pos_peaks, neg_peaks);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        CsvWriter det((std::filesystem::path(out_dir) / "det.csv").string(),
                      {"threshold", "fa_per_hr", "frr_pct"});
        for (const auto& p : s.curve.points)
            det.row({csv_num(static_cast<double>(p.threshold)), csv_num(p.fa_per_hour),
                     csv_num(p.frr_percent)});
        CsvWriter summary((std::filesystem::path(out_dir) / "summary.csv").string(),
                          {"fa_target", "frr_pct_at_fa", "clamped", "auc", "negative_hours",
                           "n_positive", "n_negative"});
        summary.row({csv_num(cfg.fa_target), csv_num(s.frr_at_target),
                     s.clamped ? "1" : "0", csv_num(s.auc), csv_num(s.negative_hours),
                     std::to_string(s.n_positive), std::to_string(s.n_negative)});
    }
    return s;
}

struct AblationRow {
    int branches = 0;
    double mean_final_val_loss = 0.0;
    double mean_frr_at_target = 0.0;
    bool frr_clamped = false;
};

/// Branch-count sweep. n = 1 trains the stacked single-branch reference
/// (no parallel kernels, no 1x1 path); n >= 2 trains RepCNN with n branches.
/// Each n runs every seed; reported numbers are seed means.
inline std::vector<AblationRow> run_ablation(const ExperimentSpec& spec,
                                             const std::vector<int>& branch_counts,
                                             bool evaluate_frr = true) {
    if (spec.manifest.empty()) throw std::runtime_error("ablate: spec has no manifest");
    const auto entries = load_manifest(spec.manifest);
    const auto train_entries = manifest_split(entries, Split::train);
    const auto val_entries = manifest_split(entries, Split::val);
    if (train_entries.empty() || val_entries.empty())
        throw std::runtime_error("ablate: manifest needs train and val splits");

    const auto train_utts = load_train_utterances(train_entries, spec.train.augment_gain);
    const auto val_utts = load_train_utterances(val_entries, /*keep_samples=*/false);
    const int window = receptive_field(spec.model);

    std::vector<AblationRow> rows;
    for (int n : branch_counts) {
        if (n < 1) throw std::runtime_error("ablate: branch counts must be >= 1");
        RepCNNConfig cfg = spec.model;
        cfg.num_branches = std::max(n, 1);
        cfg.type = n == 1 ? ModelType::single_branch : ModelType::repcnn;

        AblationRow row;
        row.branches = n;
        double val_sum = 0.0, frr_sum = 0.0;
        for (std::uint64_t seed : spec.seeds) {
            ModelGraph model = build_repcnn(cfg, seed);
            TrainResult r = train_model(model, train_utts, val_utts, spec.train, window, seed);
            val_sum += r.final_val_loss;
            log::info("ablation n=%d seed=%llu val=%.5f", n,
                      static_cast<unsigned long long>(seed), r.final_val_loss);
            if (evaluate_frr) {
                EvalSummary s = run_eval(model, entries, spec.eval, 1);
                frr_sum += s.frr_at_target;
                row.frr_clamped |= s.clamped;
            }
        }
        row.mean_final_val_loss = val_sum / spec.seeds.size();
        row.mean_frr_at_target = evaluate_frr ? frr_sum / spec.seeds.size() : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    CsvWriter csv(path, {"branches", "mean_final_val_loss", "mean_frr_pct_at_fa", "clamped"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.branches), csv_num(r.mean_final_val_loss),
                 csv_num(r.mean_frr_at_target), r.frr_clamped ? "1" : "0"});
}

struct FuseOutcome {
    float max_rel_deviation = 0.0f;
    std::string report;
};

/// Fuse a train-mode graph and verify equivalence on random inputs; the max
/// relative deviation over 20 random ~2 s clips is the report.
inline FuseOutcome fuse_with_report(const ModelGraph& train_graph, ModelGraph& fused_out,
                                    const FuseOptions& opt = {}, std::uint64_t seed = 0) {
    fused_out = fuse_model(train_graph, opt);
    ModelGraph train_copy = train_graph;
    train_copy.set_bn_mode(BnMode::eval);

    Rng rng(derive_seed(seed, "fuse-report"));
    float worst = 0.0f;
    for (int i = 0; i < 20; ++i) {
        Tensor x({train_copy.in_channels, 200});
        for (float& v : x.data) v = rng.uniform(-3.0f, 3.0f);
        Tensor a = graph_forward(train_copy, x);
        Tensor b = graph_forward(fused_out, x);
        for (std::size_t k = 0; k < a.size(); ++k) {
            const float denom =
                std::max({std::fabs(a.data[k]), std::fabs(b.data[k]), 1e-2f});
            worst = std::max(worst, std::fabs(a.data[k] - b.data[k]) / denom);
        }
    }
    FuseOutcome out;
    out.max_rel_deviation = worst;
    out.report = "fusion equivalence: max relative deviation " + csv_num(double(worst)) +
                 " over 20 random inputs";
    return out;
}

inline void write_bench_csv(const BenchReport& report, const std::string& path) {
    CsvWriter csv(path, {"graph", "mean_latency_ms", "median_latency_ms",
                         "peak_activation_bytes", "parameter_bytes"});
    for (const auto& r : report.rows)
        csv.row({r.graph_name, csv_num(r.mean_latency_ms), csv_num(r.median_latency_ms),
                 std::to_string(r.peak_activation_bytes), std::to_string(r.parameter_bytes)});
}

}  // namespace repcnn
