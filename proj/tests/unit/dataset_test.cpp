// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <filesystem>
#include <random>
#include <numeric>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "lsic/dataset.hpp"
#include "lsic/error.hpp"
#include "lsic/labels.hpp"
#include "lsic/synth.hpp"

namespace {

using lsic::data::Split;

std::string line(const std::string& intent, const std::string& object, const std::string& action,
                 const std::string& speaker = "s1", const std::string& split = "train") {
    return R"({"path":"a.wav","intent":")" + intent + R"(","action":")" + action + R"(","object":")" + object +
           R"(","speaker_id":")" + speaker + R"(","split":")" + split + R"(","duration_s":1.5})";
}

lsic::ErrorCode record_error(const std::string& text) {
    try {
        lsic::data::parse_record(text, 3);
    } catch (const lsic::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "accepted: " << text;
    return lsic::ErrorCode::IoError;
}

TEST(Manifest, AcceptsCanonicalRecord) {
    auto r = lsic::data::parse_record(line("fan_increase_speed", "fan", "increase_speed"));
    EXPECT_EQ(r.intent, "fan_increase_speed");
    EXPECT_EQ(r.split, Split::Train);
    EXPECT_DOUBLE_EQ(r.duration_s, 1.5);
    auto again = lsic::data::parse_record(lsic::data::to_line(r));
    EXPECT_EQ(again.path, r.path);
    EXPECT_EQ(again.speaker_id, r.speaker_id);
    EXPECT_EQ(again.intent, r.intent);
}

TEST(Manifest, RejectsBadRecords) {
    EXPECT_EQ(record_error(line("lights_decrease", "lights", "decrease")), lsic::ErrorCode::UnknownLabel);
    EXPECT_EQ(record_error(line("lights_on", "tv", "on")), lsic::ErrorCode::InconsistentSlots);
    EXPECT_EQ(record_error(line("lights_on", "lights", "on", "s1", "holdout")), lsic::ErrorCode::MalformedRecord);
    EXPECT_EQ(record_error("{not json"), lsic::ErrorCode::MalformedRecord);
    EXPECT_EQ(record_error("[1,2]"), lsic::ErrorCode::MalformedRecord);
    EXPECT_EQ(record_error(R"({"path":"a.wav","intent":"lights_on"})"), lsic::ErrorCode::MalformedRecord);
}

TEST(Manifest, EmptyAndComments) {
    std::istringstream empty("");
    EXPECT_TRUE(lsic::data::parse_manifest(empty).records.empty());
    std::istringstream text("# header\n\n" + line("door_open", "door", "open") + "\n   \n" +
                            line("door_close", "door", "close", "s2", "test") + "\n");
    auto m = lsic::data::parse_manifest(text, "/data");
    ASSERT_EQ(m.records.size(), 2u);
    EXPECT_EQ(m.split(Split::Test).size(), 1u);
    EXPECT_EQ(m.resolve(m.records[0]), std::filesystem::path("/data/a.wav"));
}

TEST(Manifest, ErrorNamesLine) {
    std::istringstream text(line("lights_on", "lights", "on") + "\n" + line("tv_on", "tv", "off") + "\n");
    try {
        lsic::data::parse_manifest(text);
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::InconsistentSlots);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(LabelTaxonomy, TwentyPairs) {
    const auto& maps = lsic::LabelMaps::standard();
    EXPECT_EQ(maps.intents().size(), 20u);
    EXPECT_EQ(maps.actions().size(), 8u);
    EXPECT_EQ(maps.objects().size(), 8u);
    int valid = 0;
    for (const auto& o : maps.objects()) {
        for (const auto& a : maps.actions()) valid += maps.is_valid_pair(o, a);
    }
    EXPECT_EQ(valid, 20);
    EXPECT_FALSE(maps.is_valid_pair("lights", "decrease_volume"));
    EXPECT_TRUE(maps.is_valid_pair("speaker", "increase_volume"));
}

TEST(SplitCheck, ReferenceManifest) {
    auto m = lsic::data::make_reference_manifest();
    EXPECT_EQ(m.records.size(), 10200u);
    auto r = lsic::data::split_check(m);
    EXPECT_TRUE(r.ok());
    EXPECT_EQ(r.speakers[Split::Test].size(), 7u);
    EXPECT_TRUE(r.train_test_overlap.empty());
    EXPECT_EQ(r.counts[Split::Train], 8127u);
    EXPECT_EQ(r.counts[Split::Val], 1005u);
    EXPECT_EQ(r.counts[Split::Test], 1068u);
    std::set<std::string> all;
    for (const auto& rec : m.records) all.insert(rec.speaker_id);
    EXPECT_EQ(all.size(), 81u);
}

TEST(SplitCheck, Violations) {
    std::istringstream one(line("lights_on", "lights", "on", "x", "train") + "\n" +
                           line("lights_on", "lights", "on", "x", "val") + "\n" +
                           line("lights_on", "lights", "on", "x", "test") + "\n");
    auto r = lsic::data::split_check(lsic::data::parse_manifest(one));
    EXPECT_FALSE(r.speaker_disjoint());
    EXPECT_EQ(r.train_test_overlap, std::set<std::string>{"x"});
    EXPECT_EQ(r.val_test_overlap, std::set<std::string>{"x"});
    EXPECT_FALSE(r.ok());

    std::istringstream no_test(line("lights_on", "lights", "on", "a", "train") + "\n" +
                               line("lights_on", "lights", "on", "b", "val") + "\n");
    auto e = lsic::data::split_check(lsic::data::parse_manifest(no_test));
    EXPECT_TRUE(e.speaker_disjoint());
    EXPECT_EQ(e.empty_splits, std::vector<Split>{Split::Test});
    EXPECT_FALSE(e.ok());
    EXPECT_NE(e.to_text().find("test"), std::string::npos);
}

constexpr std::size_t kFrames = 16;

lsic::nn::ModelGraph toy_model(lsic::nn::HeadKind heads = lsic::nn::HeadKind::SingleIntent) {
    lsic::nn::ModelOptions o;
    o.block_filters = {8, 16};
    o.dense_units = 32;
    o.input_frames = kFrames;
    o.seed = 1;
    return lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 10, heads, o);
}

lsic::nn::FeatureSet toy_set(std::size_t per_class, std::uint64_t seed) {
    const auto& maps = lsic::LabelMaps::standard();
    std::mt19937_64 tpl_rng(12345);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> templates(20);
    for (auto& t : templates) {
        t.resize(kFrames * 10);
        for (auto& v : t) v = unit(tpl_rng);
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.2);
    lsic::nn::FeatureSet set;
    for (int k = 0; k < 20; ++k) {
        for (std::size_t r = 0; r < per_class; ++r) {
            lsic::MfccMatrix m;
            m.values = lsic::Matrix(kFrames, 10);
            for (std::size_t i = 0; i < m.values.data.size(); ++i) {
                m.values.data[i] = templates[static_cast<std::size_t>(k)][i] + nd(rng);
            }
            set.add(m, {k, maps.action_of(k), maps.object_of(k)});
        }
    }
    return set;
}

std::size_t trace(const lsic::data::Metrics& m) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < m.row_labels.size(); ++i) t += m.confusion[i][i];
    return t;
}

TEST(Evaluate, ConstantPredictorIsChance) {
    auto model = toy_model();
    auto& k = model.weights["intent/kernel"].f32;
    std::fill(k.begin(), k.end(), 0.0f);
    model.weights["intent/bias"].f32[0] = 5.0f;
    auto set = toy_set(3, 1);
    auto m = lsic::data::evaluate(model, set);
    EXPECT_EQ(m.total, 60u);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.05);
    EXPECT_EQ(static_cast<double>(trace(m)) / static_cast<double>(m.total), m.accuracy);
    for (std::size_t r = 0; r < 20; ++r) {
        std::size_t sum = 0;
        for (auto v : m.confusion[r]) sum += v;
        EXPECT_EQ(sum, 3u);
        EXPECT_EQ(m.confusion[r][0], 3u);
    }
    auto csv = m.confusion_csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
    EXPECT_EQ(csv.substr(0, csv.find('\n')).find("lights_on,lights_off"), 10u);
}

TEST(Evaluate, OrderIndependent) {
    auto model = toy_model();
    auto set = toy_set(2, 4);
    auto base = lsic::data::evaluate(model, set);
    EXPECT_EQ(static_cast<double>(trace(base)) / static_cast<double>(base.total), base.accuracy);

    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
    lsic::nn::FeatureSet shuffled;
    shuffled.frames = set.frames;
    shuffled.n_mfcc = set.n_mfcc;
    for (auto i : order) {
        auto s = set.sample(i);
        shuffled.data.insert(shuffled.data.end(), s.begin(), s.end());
        shuffled.labels.push_back(set.labels[i]);
    }
    auto again = lsic::data::evaluate(model, shuffled);
    EXPECT_EQ(again.accuracy, base.accuracy);
    EXPECT_EQ(again.mean_loss, base.mean_loss);
    EXPECT_EQ(again.confusion, base.confusion);
}

TEST(Evaluate, OverfitToyModel) {
    auto set = toy_set(2, 6);
    lsic::nn::TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 1;
    cfg.learning_rate = 3e-3;
    // Single-epoch rounds so early stopping never rewinds to the first
    // perfect epoch; training continues until the loss is small.
    auto model = toy_model();
    for (std::uint64_t round = 0; round < 400; ++round) {
        cfg.seed = round;
        model = lsic::nn::train(model, set, set, cfg).model;
    }
    auto m = lsic::data::evaluate(model, set);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_LT(m.mean_loss, 0.05);
}

TEST(Evaluate, SlotAccuracyBoundsIntent) {
    auto set = toy_set(2, 7);
    lsic::nn::TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 15;
    cfg.seed = 3;
    auto r = lsic::nn::train(toy_model(lsic::nn::HeadKind::Slots), set, set, cfg);
    auto m = lsic::data::evaluate(r.model, toy_set(2, 8));
    ASSERT_TRUE(m.action_accuracy && m.object_accuracy);
    EXPECT_LE(m.accuracy, std::min(*m.action_accuracy, *m.object_accuracy));
    EXPECT_EQ(m.col_labels.back(), "<invalid>");
    EXPECT_EQ(m.col_labels.size(), 21u);
}

TEST(Evaluate, EmptySet) {
    try {
        lsic::data::evaluate(toy_model(), lsic::nn::FeatureSet{});
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::EmptySplit);
    }
}

TEST(ExperimentGrid, Specs) {
    auto rpi = lsic::data::experiment_grid("rpi");
    auto wio = lsic::data::experiment_grid("wio");
    ASSERT_EQ(rpi.size(), 8u);
    ASSERT_EQ(wio.size(), 4u);
    for (const auto& s : wio) EXPECT_EQ(s.n_mfcc, 10u);
    EXPECT_EQ(rpi[5].id, "6");
    EXPECT_EQ(rpi[5].n_mfcc, 13u);
    EXPECT_TRUE(rpi[5].augment);
    EXPECT_EQ(rpi[5].arch, lsic::nn::ArchVariant::Gmp);
    std::set<std::tuple<std::size_t, bool, lsic::nn::ArchVariant>> distinct;
    for (const auto& s : rpi) distinct.insert({s.n_mfcc, s.augment, s.arch});
    EXPECT_EQ(distinct.size(), 8u);
    EXPECT_THROW(lsic::data::experiment_grid("esp"), lsic::Error);
}

class SynthCorpus : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = std::filesystem::temp_directory_path() / "lsic_dataset_test";
        std::filesystem::remove_all(dir_);
        manifest_ = lsic::synth::write_corpus(dir_);
    }
    static void TearDownTestSuite() { std::filesystem::remove_all(dir_); }

    static inline std::filesystem::path dir_;
    static inline lsic::data::Manifest manifest_;
};

TEST_F(SynthCorpus, ManifestOnDisk) {
    auto m = lsic::data::load_manifest(dir_ / "manifest.jsonl");
    EXPECT_EQ(m.records.size(), 80u);
    EXPECT_TRUE(lsic::data::split_check(m).ok());
    EXPECT_EQ(lsic::data::load_split(m, Split::Train).size(), 40u);
}

TEST_F(SynthCorpus, AugmentationTriples) {
    auto clips = lsic::data::load_split(manifest_, Split::Train);
    lsic::FrontendConfig fe;
    fe.n_mfcc = 10;
    lsic::AugmentParams aug;
    auto plain = lsic::data::extract_features(clips, fe);
    auto tripled = lsic::data::extract_features(clips, fe, &aug);
    EXPECT_EQ(plain.size(), clips.size());
    EXPECT_EQ(tripled.size(), 3 * plain.size());
    EXPECT_EQ(plain.frames, 198u);
    // originals come first in each triplet and match the plain features
    auto a = plain.sample(1);
    auto b = tripled.sample(3);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    EXPECT_EQ(tripled.labels[3].intent, plain.labels[1].intent);
}

TEST_F(SynthCorpus, WioGridRuns) {
    lsic::nn::TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.seed = 1;
    auto rows = lsic::data::run_experiment_grid("wio", manifest_, cfg);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[1].train_features, 3 * rows[0].train_features);
    EXPECT_GT(rows[2].parameters, rows[0].parameters);
    auto table = lsic::data::grid_table(rows);
    EXPECT_NE(table.find("Flattening"), std::string::npos);
    auto recs = lsic::data::grid_records(rows);
    EXPECT_EQ(std::count(recs.begin(), recs.end(), '\n'), 4);
}

TEST_F(SynthCorpus, EmptySplitEvaluation) {
    lsic::data::Manifest only_train = manifest_;
    std::erase_if(only_train.records, [](const auto& r) { return r.split != Split::Train; });
    auto model = lsic::nn::build_model(lsic::nn::ArchVariant::Gmp, 13, lsic::nn::HeadKind::SingleIntent);
    try {
        lsic::data::evaluate(model, only_train, Split::Test);
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::EmptySplit);
    }
}

}  // namespace
