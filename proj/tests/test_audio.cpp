#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "repcnn/audio/augment.hpp"
#include "repcnn/audio/dataset.hpp"
#include "repcnn/audio/synth.hpp"
#include "repcnn/audio/wav.hpp"
#include "test_util.hpp"

using namespace repcnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("repcnn_test_" + tag + "_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
}

}  // namespace

TEST(Wav, RoundTrip) {
    auto dir = temp_dir("wav");
    Rng rng(1);
    std::vector<float> samples(16000);
    for (float& v : samples) v = rng.uniform(-0.9f, 0.9f);
    const auto p = (dir / "a.wav").string();
    write_wav(p, samples);

    Utterance u = read_wav(p);
    EXPECT_EQ(u.samples.size(), 16000u);  // exactly 1.0 s
    EXPECT_EQ(u.sample_rate, 16000);

    // write-then-read of int16-derived samples is bitwise stable
    const auto p2 = (dir / "b.wav").string();
    write_wav(p2, u.samples);
    EXPECT_EQ(file_bytes(p), file_bytes(p2));
    Utterance u2 = read_wav(p2);
    EXPECT_EQ(u.samples, u2.samples);
    fs::remove_all(dir);
}

TEST(Wav, MaxAmplitudeSquareWave) {
    auto dir = temp_dir("wavsq");
    std::vector<float> square(400);
    for (std::size_t i = 0; i < square.size(); ++i) square[i] = i % 2 ? 1.0f : -1.0f;
    const auto p = (dir / "sq.wav").string();
    write_wav(p, square);
    Utterance u = read_wav(p);
    for (std::size_t i = 0; i < u.samples.size(); ++i) {
        if (i % 2)
            EXPECT_FLOAT_EQ(u.samples[i], 32767.0f / 32768.0f);
        else
            EXPECT_FLOAT_EQ(u.samples[i], -1.0f);
    }
    fs::remove_all(dir);
}

TEST(Wav, FormatErrorsNameTheMismatch) {
    auto dir = temp_dir("wavbad");
    // stereo 44.1 kHz header
    std::ofstream f(dir / "bad.wav", std::ios::binary);
    auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<char*>(&v), 2); };
    f.write("RIFF", 4);
    u32(36);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    u32(16);
    u16(1);
    u16(2);  // stereo
    u32(44100);
    u32(44100 * 4);
    u16(4);
    u16(16);
    f.write("data", 4);
    u32(0);
    f.close();
    try {
        read_wav((dir / "bad.wav").string());
        FAIL() << "expected error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("2 channels"), std::string::npos) << e.what();
    }
    EXPECT_THROW(read_wav((dir / "missing.wav").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST(Gain, Formula) {
    std::vector<float> s{0.5f, -0.25f};
    EXPECT_EQ(gain_augment(s, 0.0f), s);
    auto q = gain_augment(s, -20.0f);
    EXPECT_NEAR(q[0], 0.05f, 1e-7);
    EXPECT_NEAR(q[1], -0.025f, 1e-7);
    auto loud = gain_augment({0.9f, -0.9f}, 10.0f);  // x3.16 saturates
    EXPECT_FLOAT_EQ(loud[0], 1.0f);
    EXPECT_FLOAT_EQ(loud[1], -1.0f);
}

TEST(MixNoise, SnrScaling) {
    Rng rng(7);
    std::vector<float> sig(4000), noise(4000);
    for (float& v : sig) v = rng.uniform(-0.3f, 0.3f);
    for (float& v : noise) v = rng.uniform(-0.3f, 0.3f);
    // equalize RMS so a 0 dB mix has noise scale exactly 1
    const double rs = detail::rms(sig), rn = detail::rms(noise);
    for (float& v : noise) v = static_cast<float>(v * rs / rn);

    auto mixed = mix_noise(sig, noise, 0.0f);
    for (std::size_t i = 0; i < sig.size(); ++i)
        EXPECT_NEAR(mixed[i], std::clamp(sig[i] + noise[i], -1.0f, 1.0f), 1e-6);

    auto same = mix_noise(sig, noise, std::numeric_limits<float>::infinity());
    EXPECT_EQ(same, sig);

    std::vector<float> silent(100, 0.0f);
    EXPECT_THROW(mix_noise(silent, noise, 10.0f), std::invalid_argument);
}

TEST(Rir, ImpulseCases) {
    std::vector<float> s{0.1f, 0.2f, -0.3f, 0.4f};
    EXPECT_EQ(rir_convolve(s, {1.0f}), s);

    std::vector<float> delayed = rir_convolve(s, {0.0f, 0.0f, 1.0f});
    EXPECT_FLOAT_EQ(delayed[0], 0.0f);
    EXPECT_FLOAT_EQ(delayed[1], 0.0f);
    EXPECT_FLOAT_EQ(delayed[2], 0.1f);
    EXPECT_FLOAT_EQ(delayed[3], 0.2f);
}

TEST(Rir, MatchesNaiveConvolution) {
    Rng rng(13);
    std::vector<float> s(500), h(37);
    for (float& v : s) v = rng.uniform(-0.2f, 0.2f);
    for (float& v : h) v = rng.uniform(-0.5f, 0.5f);
    auto got = rir_convolve(s, h);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j)
            if (i >= j) acc += static_cast<double>(h[j]) * s[i - j];
        EXPECT_NEAR(got[i], acc, 1e-5);
    }
}

namespace {

FeaturizedUtterance fake_utt(int total_frames, std::optional<KeywordSpan> span,
                             const std::string& id = "u") {
    FeaturizedUtterance f;
    f.id = id;
    f.features = Tensor({4, total_frames});
    for (int t = 0; t < total_frames; ++t)
        for (int c = 0; c < 4; ++c) f.features.at2(c, t) = static_cast<float>(t);
    f.span = span;
    return f;
}

}  // namespace

TEST(Harvest, PositiveWindowEndsAtEndFrame) {
    auto utt = fake_utt(300, KeywordSpan{110, 160});
    WindowSample w = harvest_positive(utt, 149);
    EXPECT_TRUE(w.positive);
    EXPECT_EQ(w.offset, 160 - 149);
    EXPECT_EQ(w.features.dim(1), 149);
    EXPECT_FLOAT_EQ(w.features.at2(0, 148), 159.0f);  // last frame is end-1
    // full keyword inside the window
    EXPECT_LE(w.offset, 110);
}

TEST(Harvest, Errors) {
    auto too_long = fake_utt(400, KeywordSpan{10, 200});
    EXPECT_THROW(harvest_positive(too_long, 149), std::invalid_argument);
    auto too_early = fake_utt(400, KeywordSpan{10, 100});
    EXPECT_THROW(harvest_positive(too_early, 149), std::invalid_argument);
    auto no_span = fake_utt(400, std::nullopt);
    EXPECT_THROW(harvest_positive(no_span, 149), std::invalid_argument);
}

TEST(Harvest, NegativesExcludeFullKeyword) {
    auto utt = fake_utt(400, KeywordSpan{200, 250});
    Rng rng(5);
    auto negs = harvest_negatives(utt, 149, 200, rng);
    EXPECT_EQ(negs.size(), 200u);
    for (const auto& w : negs) {
        EXPECT_FALSE(w.positive);
        const bool contains_full = w.offset <= 200 && w.offset + 149 >= 250;
        EXPECT_FALSE(contains_full) << "offset " << w.offset;
    }
}

TEST(Harvest, NoKeywordMeansAnyWindow) {
    auto utt = fake_utt(250, std::nullopt);
    Rng rng(6);
    auto negs = harvest_negatives(utt, 149, 20, rng);
    EXPECT_EQ(negs.size(), 20u);
}

TEST(Harvest, SeedDeterminism) {
    auto utt = fake_utt(400, KeywordSpan{200, 250});
    Rng a(9), b(9), c(10);
    auto na = harvest_negatives(utt, 149, 20, a);
    auto nb = harvest_negatives(utt, 149, 20, b);
    auto nc = harvest_negatives(utt, 149, 20, c);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(na[i].offset, nb[i].offset);
    bool differs = false;
    for (int i = 0; i < 20; ++i) differs |= na[i].offset != nc[i].offset;
    EXPECT_TRUE(differs);
}

TEST(Manifest, RoundTripAndValidation) {
    auto dir = temp_dir("manifest");
    write_wav((dir / "x.wav").string(), std::vector<float>(1600, 0.1f));
    std::vector<ManifestEntry> entries{{"x.wav", 10, 60, Split::train},
                                       {"x.wav", -1, -1, Split::test_negative}};
    const auto mpath = (dir / "manifest.tsv").string();
    save_manifest(mpath, entries);
    auto loaded = load_manifest(mpath);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].span_start, 10);
    EXPECT_TRUE(loaded[0].has_span());
    EXPECT_FALSE(loaded[1].has_span());
    EXPECT_EQ(loaded[1].split, Split::test_negative);

    std::ofstream bad(dir / "bad.tsv");
    bad << "nothere.wav\t-1\t-1\ttrain\n";
    bad.close();
    EXPECT_THROW(load_manifest((dir / "bad.tsv").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST(Synth, GeneratesFilesAndExactSpans) {
    auto dir = temp_dir("synth");
    SynthSpec spec;
    spec.train_utterances = 6;
    spec.val_utterances = 2;
    spec.test_positive = 2;
    spec.test_negative = 1;
    spec.test_negative_seconds = 8.0;
    const auto manifest = generate_synthetic_dataset(spec, dir.string(), 123);
    auto entries = load_manifest(manifest);
    ASSERT_EQ(entries.size(), 11u);

    const auto tmpl = keyword_template();
    int checked = 0;
    for (const auto& e : entries) {
        if (!e.has_span()) continue;
        Utterance u = read_wav(e.path);
        // cut the span out and correlate against the template
        const int a = e.span_start * 160;
        const int b = e.span_end * 160;
        ASSERT_LE(b, static_cast<int>(u.samples.size()));
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int i = 0; i < b - a && i < static_cast<int>(tmpl.size()); ++i) {
            dot += static_cast<double>(u.samples[a + i]) * tmpl[i];
            na += static_cast<double>(u.samples[a + i]) * u.samples[a + i];
            nb += static_cast<double>(tmpl[i]) * tmpl[i];
        }
        const double corr = dot / std::sqrt(na * nb);
        EXPECT_GT(corr, 0.9) << e.path;
        ++checked;
    }
    EXPECT_EQ(checked, 10);
    fs::remove_all(dir);
}

TEST(Synth, SeedDeterminism) {
    auto d1 = temp_dir("synth_a");
    auto d2 = temp_dir("synth_b");
    SynthSpec spec;
    spec.train_utterances = 2;
    spec.val_utterances = 1;
    spec.test_positive = 1;
    spec.test_negative = 1;
    spec.test_negative_seconds = 4.0;
    generate_synthetic_dataset(spec, d1.string(), 7);
    generate_synthetic_dataset(spec, d2.string(), 7);
    for (const auto& f : fs::directory_iterator(d1)) {
        const auto other = d2 / f.path().filename();
        ASSERT_TRUE(fs::exists(other));
        EXPECT_EQ(file_bytes(f.path()), file_bytes(other)) << f.path();
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Synth, DistractorsDifferFromKeyword) {
    // every graded distractor stays well below the keyword's self-correlation;
    // the hardest ones share a prefix, so about half the energy aligns
    Rng rng(3);
    const auto tmpl = keyword_template();
    for (int draw = 0; draw < 24; ++draw) {
        const auto dis = distractor_pattern(rng);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < tmpl.size(); ++i) {
            dot += static_cast<double>(tmpl[i]) * dis[i];
            na += static_cast<double>(tmpl[i]) * tmpl[i];
            nb += static_cast<double>(dis[i]) * dis[i];
        }
        EXPECT_LT(std::fabs(dot) / std::sqrt(na * nb), 0.75) << "draw " << draw;
    }
}
