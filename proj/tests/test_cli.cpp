#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
    const char* env = std::getenv("REPCNN_BIN");
    if (env) return env;
    for (const char* p : {"tools/repcnn", "build/tools/repcnn", "../tools/repcnn"})
        if (fs::exists(p)) return p;
    return "tools/repcnn";
}

int run_cmd(const std::string& args, const fs::path& log) {
    const std::string cmd = binary_path() + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class CliPipeline : public ::testing::Test {
protected:
    static fs::path dir;

    static void SetUpTestSuite() {
        dir = fs::temp_directory_path() / ("repcnn_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        std::ofstream spec(dir / "spec.json");
        spec << R"({
  "manifest": "data/manifest.tsv",
  "output_dir": "run",
  "seeds": [1],
  "model": {"width": 8, "stage_kernels": [7, 9], "num_branches": 2},
  "train": {"epochs": 1, "batch_positives": 4, "top_k": 10, "augment_gain": false},
  "eval": {"fa_target": 3.0},
  "synth": {"train_utterances": 10, "val_utterances": 3, "test_positive": 4,
            "test_negative": 2, "test_negative_seconds": 30.0}
})";
    }

    static void TearDownTestSuite() { fs::remove_all(dir); }

    std::string spec() const { return (dir / "spec.json").string(); }
};

fs::path CliPipeline::dir;

}  // namespace

TEST_F(CliPipeline, Step1SynthGeneratesDataset) {
    ASSERT_EQ(run_cmd("synth --spec " + spec() + " --out " + (dir / "data").string() +
                          " --seed 5",
                      dir / "synth.log"),
              0)
        << slurp(dir / "synth.log");
    EXPECT_TRUE(fs::exists(dir / "data" / "manifest.tsv"));
    EXPECT_TRUE(fs::exists(dir / "data" / "train_00000.wav"));
}

TEST_F(CliPipeline, Step2TrainWritesModelsAndCurves) {
    ASSERT_EQ(run_cmd("train --spec " + spec(), dir / "train.log"), 0)
        << slurp(dir / "train.log");
    EXPECT_TRUE(fs::exists(dir / "run" / "model_seed1.rpcn"));
    EXPECT_TRUE(fs::exists(dir / "run" / "loss_curves.csv"));

    // rerunning the same spec reproduces the CSV byte for byte
    ASSERT_EQ(run_cmd("train --spec " + spec() + " --out " + (dir / "run2").string(),
                      dir / "train2.log"),
              0);
    EXPECT_EQ(slurp(dir / "run" / "loss_curves.csv"), slurp(dir / "run2" / "loss_curves.csv"));
}

TEST_F(CliPipeline, Step3FuseReportsEquivalenceAndShrinks) {
    const auto in = (dir / "run" / "model_seed1.rpcn").string();
    const auto out = (dir / "run" / "fused.rpcn").string();
    ASSERT_EQ(run_cmd("fuse --model " + in + " --out " + out, dir / "fuse.log"), 0)
        << slurp(dir / "fuse.log");
    EXPECT_NE(slurp(dir / "fuse.log").find("max relative deviation"), std::string::npos);
    EXPECT_LT(fs::file_size(out), fs::file_size(in));

    // fusing a fused file fails with a one-line diagnostic
    EXPECT_NE(run_cmd("fuse --model " + out + " --out " + (dir / "x.rpcn").string(),
                      dir / "refuse.log"),
              0);
    EXPECT_NE(slurp(dir / "refuse.log").find("already a fused model"), std::string::npos);
}

TEST_F(CliPipeline, Step4EvalEmitsMonotoneDetCsv) {
    const auto fused = (dir / "run" / "fused.rpcn").string();
    ASSERT_EQ(run_cmd("eval --model " + fused + " --spec " + spec() + " --out " +
                          (dir / "evald").string(),
                      dir / "eval.log"),
              0)
        << slurp(dir / "eval.log");
    EXPECT_NE(slurp(dir / "eval.log").find("FRR @ 3"), std::string::npos);

    std::ifstream det(dir / "evald" / "det.csv");
    std::string line;
    std::getline(det, line);
    EXPECT_EQ(line, "threshold,fa_per_hr,frr_pct");
    double prev_fa = 1e30, prev_frr = -1.0, prev_thr = -1e30;
    int rows = 0;
    while (std::getline(det, line)) {
        std::istringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        const double thr = std::stod(a), fa = std::stod(b), frr = std::stod(c);
        EXPECT_GT(thr, prev_thr);
        EXPECT_LE(fa, prev_fa);
        EXPECT_GE(frr, prev_frr);
        prev_thr = thr;
        prev_fa = fa;
        prev_frr = frr;
        ++rows;
    }
    EXPECT_GT(rows, 0);

    const std::string summary = slurp(dir / "evald" / "summary.csv");
    EXPECT_NE(summary.find("frr_pct_at_fa"), std::string::npos);
}

TEST_F(CliPipeline, Step5BenchWritesBothRows) {
    const auto model = (dir / "run" / "model_seed1.rpcn").string();
    ASSERT_EQ(run_cmd("bench --model " + model + " --out " + (dir / "benchd").string() +
                          " --outputs 60",
                      dir / "bench.log"),
              0)
        << slurp(dir / "bench.log");
    const std::string csv = slurp(dir / "benchd" / "bench.csv");
    EXPECT_NE(csv.find("train,"), std::string::npos);
    EXPECT_NE(csv.find("fused,"), std::string::npos);
}

TEST_F(CliPipeline, Step6ValidationFailuresExitNonzero) {
    // spec referencing a missing manifest fails before any training
    std::ofstream bad(dir / "bad.json");
    bad << R"({"manifest": "nope/missing.tsv", "seeds": [1]})";
    bad.close();
    EXPECT_NE(run_cmd("train --spec " + (dir / "bad.json").string(), dir / "bad.log"), 0);
    const std::string log = slurp(dir / "bad.log");
    EXPECT_NE(log.find("error:"), std::string::npos);

    EXPECT_NE(run_cmd("eval --model nothere.rpcn --spec " + spec(), dir / "bad2.log"), 0);
}
