#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "repcnn/audio/synth.hpp"
#include "repcnn/model.hpp"
#include "repcnn/train/trainer.hpp"
#include "test_util.hpp"

using namespace repcnn;
namespace fs = std::filesystem;

namespace {

std::vector<int> oracle_topk(const std::vector<float>& losses, int k) {
    // full stable sort by descending loss, then take the first k indices
    std::vector<std::pair<float, int>> v;
    for (int i = 0; i < static_cast<int>(losses.size()); ++i) v.push_back({losses[i], i});
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
    });
    std::vector<int> out;
    for (int i = 0; i < k && i < static_cast<int>(v.size()); ++i) out.push_back(v[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

RepCNNConfig tiny_cfg() {
    RepCNNConfig cfg;
    cfg.width = 8;
    cfg.stage_kernels = {7, 9};
    cfg.num_branches = 2;
    return cfg;
}

struct TinyData {
    fs::path dir;
    std::vector<TrainUtterance> train, val;
    ~TinyData() { fs::remove_all(dir); }
};

TinyData make_tiny_dataset(int n_train, int n_val, std::uint64_t seed) {
    TinyData d;
    d.dir = fs::temp_directory_path() /
            ("repcnn_train_" + std::to_string(::getpid()) + "_" + std::to_string(seed));
    SynthSpec spec;
    spec.train_utterances = n_train;
    spec.val_utterances = n_val;
    spec.test_positive = 0;
    spec.test_negative = 0;
    const auto manifest = generate_synthetic_dataset(spec, d.dir.string(), seed);
    auto entries = load_manifest(manifest);
    std::vector<ManifestEntry> tr, va;
    for (auto& e : entries)
        (e.split == Split::train ? tr : va).push_back(e);
    d.train = load_train_utterances(tr, /*keep_samples=*/false);
    d.val = load_train_utterances(va, /*keep_samples=*/false);
    return d;
}

TrainConfig fast_cfg() {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_positives = 4;
    cfg.top_k = 12;
    cfg.augment_gain = false;
    return cfg;
}

}  // namespace

TEST(HardNegatives, SpecCases) {
    EXPECT_EQ(select_hard_negatives({1.0f, 3.0f, 2.0f}, 2), (std::vector<int>{1, 2}));
    EXPECT_EQ(select_hard_negatives({1.0f, 3.0f}, 5), (std::vector<int>{0, 1}));
    EXPECT_TRUE(select_hard_negatives({1.0f, 2.0f}, 0).empty());
    // stable ties: equal losses resolve to lower indices
    EXPECT_EQ(select_hard_negatives({5.0f, 5.0f, 5.0f, 5.0f}, 2), (std::vector<int>{0, 1}));
}

TEST(HardNegatives, MatchesFullSortOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1000;
        std::vector<float> losses(n);
        for (float& v : losses) v = rng.uniform_int(0, 200) / 40.0f;  // force ties
        const int k = rng.uniform_int(1, 100);
        EXPECT_EQ(select_hard_negatives(losses, k), oracle_topk(losses, k)) << trial;
    }
}

TEST(BatchLoss, AllPositivesIsPlainMeanFocal) {
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 1);
    model.set_bn_mode(BnMode::eval);
    Rng rng(5);
    Batch b;
    b.x = testutil::random_tensor({6, 16, 61}, rng);
    b.positive.assign(6, 1);
    TrainConfig cfg = fast_cfg();

    BatchLossResult r = batch_loss(model, b, cfg);
    Tensor logits = graph_forward(model, b.x);
    Tensor last({6});
    for (int i = 0; i < 6; ++i) last.at(i) = logits.at3(i, 0, logits.dim(2) - 1);
    Tensor ones = Tensor::full({6}, 1.0f);
    const auto direct = focal_loss(last, ones, cfg.focal_gamma, cfg.focal_alpha);
    EXPECT_NEAR(r.loss, direct.loss, 1e-6f);
}

TEST(BatchLoss, KZeroUsesOnlyPositives) {
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 2);
    model.set_bn_mode(BnMode::eval);
    Rng rng(7);
    Batch b;
    b.x = testutil::random_tensor({5, 16, 61}, rng);
    b.positive = {1, 0, 0, 1, 0};
    TrainConfig cfg = fast_cfg();
    cfg.top_k = 0;

    BatchLossResult r = batch_loss(model, b, cfg);
    EXPECT_TRUE(r.selected_negatives.empty());
    for (int i : {1, 2, 4}) EXPECT_EQ(r.sample_grad_logits[i], 0.0f);

    Tensor logits = graph_forward(model, b.x);
    double expect = 0.0;
    for (int i : {0, 3}) {
        auto [loss, g] = focal_loss_single(logits.at3(i, 0, logits.dim(2) - 1), 1.0f,
                                           cfg.focal_gamma, cfg.focal_alpha);
        expect += loss;
    }
    EXPECT_NEAR(r.loss, expect / 2.0, 1e-6);
}

TEST(BatchLoss, UnselectedNegativesContributeNoGradient) {
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 3);
    model.set_bn_mode(BnMode::eval);  // decouple samples so pruning is exact
    Rng rng(9);
    Batch full;
    full.x = testutil::random_tensor({4, 16, 61}, rng);
    full.positive = {1, 0, 0, 0};
    TrainConfig cfg = fast_cfg();
    cfg.top_k = 1;

    BatchLossResult rf = batch_loss(model, full, cfg);
    ASSERT_EQ(rf.selected_negatives.size(), 1u);
    const int kept = rf.selected_negatives[0];
    for (int i = 1; i < 4; ++i)
        if (i != kept) EXPECT_EQ(rf.sample_grad_logits[i], 0.0f);

    // removing the unselected negatives leaves every parameter grad bitwise
    // unchanged in eval mode
    Batch pruned;
    pruned.x = Tensor({2, 16, 61});
    for (int c = 0; c < 16; ++c)
        for (int t = 0; t < 61; ++t) {
            pruned.x.at3(0, c, t) = full.x.at3(0, c, t);
            pruned.x.at3(1, c, t) = full.x.at3(kept, c, t);
        }
    pruned.positive = {1, 0};
    BatchLossResult rp = batch_loss(model, pruned, cfg);
    EXPECT_EQ(rf.loss, rp.loss);
    for (const auto& [name, g] : rf.grads.by_name)
        EXPECT_EQ(g.data, rp.grads.at(name).data) << name;
}

TEST(Train, ZeroLearningRateLeavesModelUntouched) {
    TinyData d = make_tiny_dataset(8, 4, 21);
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 4);
    std::vector<float> before;
    detail::visit_params(model, [&](const std::string&, Tensor& t) {
        before.insert(before.end(), t.data.begin(), t.data.end());
    });

    TrainConfig cfg = fast_cfg();
    cfg.epochs = 2;
    cfg.optimizer.lr = 0.0f;
    TrainResult r = train_model(model, d.train, d.val, cfg, receptive_field(mcfg), 1);

    std::vector<float> after;
    detail::visit_params(model, [&](const std::string&, Tensor& t) {
        after.insert(after.end(), t.data.begin(), t.data.end());
    });
    EXPECT_EQ(before, after);
    ASSERT_EQ(r.curve.points.size(), 2u);
}

TEST(Train, ZeroLearningRateFlatLossCurve) {
    // a BN-free graph with positive-only batches: nothing at all changes
    // between epochs, so the curve is exactly flat
    TinyData d = make_tiny_dataset(6, 3, 25);
    ModelGraph model;
    model.mode = GraphMode::train;
    model.in_channels = 16;
    Rng rng(31);
    auto stem = Conv1dLayer::make(16, 8, 5, 2, 1, true);
    init_conv_uniform(stem, rng);
    auto dw = Conv1dLayer::make(8, 8, 49, 1, 8, true);
    init_conv_uniform(dw, rng);
    auto head = Conv1dLayer::make(8, 1, 1, 1, 1, true);
    init_conv_uniform(head, rng);
    model.layers.emplace_back(std::move(stem));
    model.layers.emplace_back(Activation{ActKind::relu, 0.0f, kInf});
    model.layers.emplace_back(std::move(dw));
    model.layers.emplace_back(Activation{ActKind::relu, 0.0f, kInf});
    model.layers.emplace_back(std::move(head));
    const int window = 1 + 4 + 48 * 2;  // receptive field of the hand graph

    TrainConfig cfg = fast_cfg();
    cfg.epochs = 3;
    cfg.optimizer.lr = 0.0f;
    cfg.negatives_per_positive = 0;
    cfg.top_k = 0;
    cfg.batch_positives = 64;  // one batch holding every positive
    TrainResult r = train_model(model, d.train, d.val, cfg, window, 1);
    ASSERT_EQ(r.curve.points.size(), 3u);
    for (std::size_t i = 1; i < r.curve.points.size(); ++i) {
        EXPECT_NEAR(r.curve.points[i].train_loss, r.curve.points[0].train_loss, 1e-9);
        EXPECT_EQ(r.curve.points[i].val_loss, r.curve.points[0].val_loss);
    }
}

TEST(Train, SmokeRunReducesLoss) {
    TinyData d = make_tiny_dataset(10, 4, 22);
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 5);
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 4;
    TrainResult r = train_model(model, d.train, d.val, cfg, receptive_field(mcfg), 2);
    ASSERT_EQ(r.curve.points.size(), 4u);
    EXPECT_LT(r.curve.points.back().train_loss, r.curve.points.front().train_loss);
    EXPECT_GT(r.final_val_loss, 0.0);
}

TEST(Train, SameSeedIsBitwiseReproducible) {
    TinyData d = make_tiny_dataset(6, 2, 23);
    RepCNNConfig mcfg = tiny_cfg();
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 2;

    auto run = [&](std::uint64_t seed) {
        ModelGraph model = build_repcnn(mcfg, 7);
        train_model(model, d.train, d.val, cfg, receptive_field(mcfg), seed);
        std::vector<float> w;
        detail::visit_params(model, [&](const std::string&, Tensor& t) {
            w.insert(w.end(), t.data.begin(), t.data.end());
        });
        return w;
    };
    EXPECT_EQ(run(11), run(11));
    EXPECT_NE(run(11), run(12));
}

TEST(Train, EmptyDatasetRejected) {
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 8);
    TrainConfig cfg = fast_cfg();
    std::vector<TrainUtterance> none;
    EXPECT_THROW(train_model(model, none, none, cfg, receptive_field(mcfg), 1),
                 std::invalid_argument);
}

TEST(Train, DivergenceAbortsWithDiagnostic) {
    TinyData d = make_tiny_dataset(4, 0, 24);
    RepCNNConfig mcfg = tiny_cfg();
    ModelGraph model = build_repcnn(mcfg, 9);
    // poison one weight; the forward pass then produces non-finite loss
    detail::visit_params(model, [&](const std::string& name, Tensor& t) {
        if (name == "l0.weight") t.data[0] = std::numeric_limits<float>::quiet_NaN();
    });
    TrainConfig cfg = fast_cfg();
    cfg.epochs = 1;
    try {
        train_model(model, d.train, d.val, cfg, receptive_field(mcfg), 1);
        FAIL() << "expected divergence error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos) << e.what();
    }
}

TEST(LossCurves, CsvExport) {
    const auto path = (fs::temp_directory_path() /
                       ("repcnn_curves_" + std::to_string(::getpid()) + ".csv"))
                          .string();
    export_loss_curves({}, path);
    {
        std::ifstream f(path);
        std::string line;
        std::getline(f, line);
        EXPECT_EQ(line, "seed,epoch,train_loss,val_loss");
        EXPECT_FALSE(std::getline(f, line));  // header only
    }

    std::vector<LossCurve> curves;
    for (std::uint64_t s : {1, 2, 3}) {
        LossCurve c;
        c.seed = s;
        for (int e = 1; e <= 10; ++e)
            c.points.push_back({e, 1.0 / e + static_cast<double>(s), 2.0 / e});
        curves.push_back(c);
    }
    export_loss_curves(curves, path);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);  // header
    int rows = 0;
    while (std::getline(f, line)) {
        ++rows;
        // round-trip parse one field and compare against the source
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1),
                   c3 = line.find(',', c2 + 1);
        const int seed = std::stoi(line.substr(0, c1));
        const int epoch = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        const double train = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        EXPECT_EQ(train, curves[seed - 1].points[epoch - 1].train_loss);
    }
    EXPECT_EQ(rows, 30);
    fs::remove(path);
}
