// repcnn: train a multi-branch 1-D conv wake-word detector, fuse it into an
// equivalent single-branch inference graph, and run/evaluate it as a causal
// streaming detector.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repcnn/experiment.hpp"

namespace fs = std::filesystem;
using namespace repcnn;

namespace {

ExperimentSpec spec_with_overrides(const std::string& spec_path, const std::string& out_dir,
                                   std::uint64_t seed, bool seed_set, int branches) {
    ExperimentSpec spec = load_experiment_spec(spec_path);
    if (!out_dir.empty()) spec.output_dir = out_dir;
    if (seed_set) spec.seeds = {seed};
    if (branches > 0) {
        spec.model.num_branches = branches;
        spec.model.type = ModelType::repcnn;
    }
    return spec;
}

int cmd_train(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed,
              bool seed_set, int branches) {
    ExperimentSpec spec = spec_with_overrides(spec_path, out_dir, seed, seed_set, branches);
    const auto runs = run_training(spec);
    for (const auto& r : runs)
        std::printf("seed %llu: final val loss %.6f -> %s\n",
                    static_cast<unsigned long long>(r.seed), r.final_val_loss,
                    r.model_path.c_str());
    std::printf("loss curves: %s\n",
                (fs::path(spec.output_dir) / "loss_curves.csv").string().c_str());
    return 0;
}

int cmd_fuse(const std::string& model_path, const std::string& out_path,
             const std::string& clip_upper, std::uint64_t seed) {
    ModelGraph train = load_model(model_path);
    if (train.mode == GraphMode::fused)
        throw std::runtime_error("fuse: " + model_path + " is already a fused model");

    FuseOptions opt;
    if (clip_upper == "calibrate") {
        Rng rng(derive_seed(seed, "clip-calibration"));
        std::vector<Tensor> calib;
        for (int i = 0; i < 20; ++i) {
            Tensor x({train.in_channels, 200});
            for (float& v : x.data) v = rng.uniform(-3.0f, 3.0f);
            calib.push_back(std::move(x));
        }
        opt.clip_upper = calibrate_clip_upper(train, calib);
        std::printf("calibrated clip upper bound: %g\n", opt.clip_upper);
    } else if (!clip_upper.empty()) {
        opt.clip_upper = std::stof(clip_upper);
    }

    ModelGraph fused;
    const FuseOutcome outcome = fuse_with_report(train, fused, opt, seed);
    save_model(fused, out_path);
    std::printf("%s\n", outcome.report.c_str());
    std::printf("parameters: %d -> %d; file: %s (%ju bytes) -> %s (%ju bytes)\n",
                param_count(train), param_count(fused), model_path.c_str(),
                static_cast<uintmax_t>(fs::file_size(model_path)), out_path.c_str(),
                static_cast<uintmax_t>(fs::file_size(out_path)));
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& spec_path,
             const std::string& out_dir, double fa_target, bool fa_set, int threads) {
    ExperimentSpec spec = load_experiment_spec(spec_path);
    if (spec.manifest.empty()) throw std::runtime_error("eval: spec has no manifest");
    if (fa_set) spec.eval.fa_target = fa_target;
    const std::string out = out_dir.empty() ? spec.output_dir : out_dir;

    ModelGraph graph = load_model(model_path);
    const auto entries = load_manifest(spec.manifest);
    EvalSummary s = run_eval(graph, entries, spec.eval, threads, out);
    std::printf("FRR @ %.3g FA/hr: %.3f%%%s\n", spec.eval.fa_target, s.frr_at_target,
                s.clamped ? " (clamped: target outside swept range)" : "");
    std::printf("AUC: %.4f  (%d positives, %d negatives, %.3f h negative audio)\n", s.auc,
                s.n_positive, s.n_negative, s.negative_hours);
    std::printf("wrote %s and %s\n", (fs::path(out) / "det.csv").string().c_str(),
                (fs::path(out) / "summary.csv").string().c_str());
    return 0;
}

int cmd_ablate(const std::string& spec_path, const std::string& out_dir,
               std::vector<int> branches, std::uint64_t seed, bool seed_set) {
    ExperimentSpec spec = spec_with_overrides(spec_path, out_dir, seed, seed_set, 0);
    if (branches.empty()) branches = {1, 2, 3, 4, 5};
    const auto rows = run_ablation(spec, branches);
    fs::create_directories(spec.output_dir);
    const auto csv_path = (fs::path(spec.output_dir) / "ablation.csv").string();
    write_ablation_csv(rows, csv_path);
    std::printf("branches  mean_val_loss  mean_FRR@%.3gFA/hr\n", spec.eval.fa_target);
    for (const auto& r : rows)
        std::printf("%8d  %13.6f  %10.3f%%%s\n", r.branches, r.mean_final_val_loss,
                    r.mean_frr_at_target, r.frr_clamped ? " (clamped)" : "");
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
}

int cmd_bench(const std::string& model_path, const std::string& out_dir, int outputs,
              std::uint64_t seed) {
    ModelGraph train = load_model(model_path);
    if (train.mode == GraphMode::fused)
        throw std::runtime_error(
            "bench: expected a train-mode model (the fused row is derived from it)");
    ModelGraph fused = fuse_model(train);
    BenchReport report = bench(train, fused, outputs, seed);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_bench_csv(report, (fs::path(out_dir) / "bench.csv").string());
    }
    std::printf("graph  mean_ms  median_ms  peak_act_bytes  param_bytes\n");
    for (const auto& r : report.rows)
        std::printf("%5s  %7.4f  %9.4f  %14zu  %11zu\n", r.graph_name.c_str(),
                    r.mean_latency_ms, r.median_latency_ms, r.peak_activation_bytes,
                    r.parameter_bytes);
    if (!out_dir.empty())
        std::printf("wrote %s\n", (fs::path(out_dir) / "bench.csv").string().c_str());
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed) {
    ExperimentSpec spec = load_experiment_spec(spec_path);
    const std::string out = out_dir.empty() ? spec.output_dir : out_dir;
    const std::string manifest = generate_synthetic_dataset(spec.synth, out, seed);
    const auto entries = load_manifest(manifest);
    std::printf("generated %zu utterances under %s\nmanifest: %s\n", entries.size(),
                out.c_str(), manifest.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "repcnn: multi-branch wake-word training with single-branch fused streaming inference"};
    app.require_subcommand(1);

    std::string spec_path, model_path, out_path;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<int> branches;
    double fa_target = 3.0;
    std::string clip_upper;
    int bench_outputs = 1000;

    auto* train = app.add_subcommand("train", "train one model per seed from a spec");
    train->add_option("--spec", spec_path, "experiment spec JSON")->required();
    train->add_option("--out", out_path, "output directory (overrides spec)");
    auto* train_seed = train->add_option("--seed", seed, "train a single seed");
    auto* train_branches =
        train->add_option("--branches", branches, "override branch count")->delimiter(',');

    auto* fuse = app.add_subcommand("fuse", "fold a trained model into its inference graph");
    fuse->add_option("--model", model_path, "train-mode model file")->required();
    fuse->add_option("--out", out_path, "fused model file")->required();
    fuse->add_option("--clip-upper", clip_upper,
                     "clip bound: a number, or 'calibrate' (default +inf)");
    fuse->add_option("--seed", seed, "seed for the equivalence-report inputs");

    auto* eval = app.add_subcommand("eval", "detection metrics on the manifest test splits");
    eval->add_option("--model", model_path, "model file (train-mode models are fused)")
        ->required();
    eval->add_option("--spec", spec_path, "experiment spec JSON")->required();
    eval->add_option("--out", out_path, "output directory for CSVs");
    auto* eval_fa = eval->add_option("--fa-target", fa_target, "FA/hr operating point");
    eval->add_option("--threads", threads, "scoring threads");

    auto* ablate = app.add_subcommand("ablate", "branch-count sweep (default 1..5)");
    ablate->add_option("--spec", spec_path, "experiment spec JSON")->required();
    ablate->add_option("--out", out_path, "output directory (overrides spec)");
    ablate->add_option("--branches", branches, "branch counts, e.g. 1,2,3")->delimiter(',');
    auto* ablate_seed = ablate->add_option("--seed", seed, "use a single seed");

    auto* bench_cmd = app.add_subcommand("bench", "latency/memory of train vs fused graphs");
    bench_cmd->add_option("--model", model_path, "train-mode model file")->required();
    bench_cmd->add_option("--out", out_path, "output directory for bench.csv");
    bench_cmd->add_option("--outputs", bench_outputs, "timed outputs per graph");
    bench_cmd->add_option("--seed", seed, "seed for benchmark input frames");

    auto* synth = app.add_subcommand("synth", "generate the synthetic keyword dataset");
    synth->add_option("--spec", spec_path, "experiment spec JSON (synth section)")->required();
    synth->add_option("--out", out_path, "output directory (overrides spec)");
    synth->add_option("--seed", seed, "dataset seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(spec_path, out_path, seed, !train_seed->empty(),
                             branches.empty() ? 0 : branches.front());
        if (fuse->parsed()) return cmd_fuse(model_path, out_path, clip_upper, seed);
        if (eval->parsed())
            return cmd_eval(model_path, spec_path, out_path, fa_target, !eval_fa->empty(),
                            threads);
        if (ablate->parsed())
            return cmd_ablate(spec_path, out_path, branches, seed, !ablate_seed->empty());
        if (bench_cmd->parsed()) return cmd_bench(model_path, out_path, bench_outputs, seed);
        if (synth->parsed()) return cmd_synth(spec_path, out_path, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
