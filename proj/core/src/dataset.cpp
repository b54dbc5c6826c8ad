// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"
#include "lsic/labels.hpp"
#include "lsic/nn/infer.hpp"

namespace lsic::data {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "unknown";
}

std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val" || s == "validation") return Split::Val;
    if (s == "test") return Split::Test;
    return std::nullopt;
}

std::vector<const ManifestRecord*> Manifest::split(Split s) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(&r);
    }
    return out;
}

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ManifestRecord parse_record(const std::string& line, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, where + ": not an object");

    ManifestRecord r;
    try {
        r.path = j.at("path").get<std::string>();
        r.intent = j.at("intent").get<std::string>();
        r.action = j.at("action").get<std::string>();
        r.object = j.at("object").get<std::string>();
        r.speaker_id = j.at("speaker_id").get<std::string>();
        const auto split = j.at("split").get<std::string>();
        auto s = parse_split(split);
        if (!s) throw Error(ErrorCode::MalformedRecord, where + ": unknown split '" + split + "'");
        r.split = *s;
        r.duration_s = j.value("duration_s", 0.0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }

    const auto& maps = LabelMaps::standard();
    if (!maps.intent_index(r.intent)) throw Error(ErrorCode::UnknownLabel, where + ": intent '" + r.intent + "'");
    if (!maps.object_index(r.object)) throw Error(ErrorCode::UnknownLabel, where + ": object '" + r.object + "'");
    if (!maps.action_index(r.action)) throw Error(ErrorCode::UnknownLabel, where + ": action '" + r.action + "'");
    if (LabelMaps::join(r.object, r.action) != r.intent) {
        throw Error(ErrorCode::InconsistentSlots,
                    where + ": intent '" + r.intent + "' vs (" + r.object + ", " + r.action + ")");
    }
    return r;
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        m.records.push_back(parse_record(line, line_no));
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
    try {
        return parse_manifest(in, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string to_line(const ManifestRecord& r) {
    ordered_json j;
    j["path"] = r.path;
    j["intent"] = r.intent;
    j["action"] = r.action;
    j["object"] = r.object;
    j["speaker_id"] = r.speaker_id;
    j["split"] = to_string(r.split);
    j["duration_s"] = r.duration_s;
    return j.dump();
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& r : m.records) out << to_line(r) << '\n';
}

SplitReport split_check(const Manifest& m) {
    SplitReport rep;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        rep.speakers[s];
        rep.counts[s] = 0;
    }
    for (const auto& r : m.records) {
        rep.speakers[r.split].insert(r.speaker_id);
        ++rep.counts[r.split];
    }
    const auto& test = rep.speakers[Split::Test];
    for (const auto& s : rep.speakers[Split::Train]) {
        if (test.contains(s)) rep.train_test_overlap.insert(s);
    }
    for (const auto& s : rep.speakers[Split::Val]) {
        if (test.contains(s)) rep.val_test_overlap.insert(s);
    }
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        if (rep.counts[s] == 0) rep.empty_splits.push_back(s);
    }
    return rep;
}

std::string SplitReport::to_text() const {
    std::ostringstream os;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        os << std::left << std::setw(6) << to_string(s) << " records=" << counts.at(s)
           << " speakers=" << speakers.at(s).size() << "\n";
    }
    os << "train/test speaker overlap: " << train_test_overlap.size() << "\n";
    os << "val/test speaker overlap: " << val_test_overlap.size() << "\n";
    for (Split s : empty_splits) os << "empty split: " << to_string(s) << "\n";
    os << (ok() ? "OK" : "VIOLATION") << "\n";
    return os.str();
}

std::string SplitReport::to_record() const {
    ordered_json j;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        ordered_json sj;
        sj["records"] = counts.at(s);
        sj["speakers"] = speakers.at(s).size();
        j[std::string(to_string(s))] = sj;
    }
    j["train_test_overlap"] = train_test_overlap;
    j["val_test_overlap"] = val_test_overlap;
    std::vector<std::string> empty;
    for (Split s : empty_splits) empty.emplace_back(to_string(s));
    j["empty_splits"] = empty;
    j["ok"] = ok();
    return j.dump();
}

Manifest make_reference_manifest(std::uint64_t seed) {
    constexpr int kSpeakers = 81;
    constexpr int kTestSpeakers = 7;
    constexpr std::size_t kTrain = 8127, kVal = 1005, kTest = 1068;

    const auto& maps = LabelMaps::standard();
    std::mt19937_64 rng(seed);
    Manifest m;
    auto add = [&](Split split, std::size_t count, int first_speaker, int speakers) {
        for (std::size_t i = 0; i < count; ++i) {
            const int intent = static_cast<int>(i % kNumIntents);
            const int speaker = first_speaker + static_cast<int>(rng() % static_cast<std::uint64_t>(speakers));
            ManifestRecord r;
            r.intent = maps.intents()[static_cast<std::size_t>(intent)];
            r.object = maps.objects()[static_cast<std::size_t>(maps.object_of(intent))];
            r.action = maps.actions()[static_cast<std::size_t>(maps.action_of(intent))];
            r.speaker_id = "spk" + std::to_string(speaker);
            r.split = split;
            r.path = std::string(to_string(split)) + "/" + r.speaker_id + "_" + std::to_string(i) + ".wav";
            r.duration_s = 1.5;
            m.records.push_back(std::move(r));
        }
    };
    // Speakers 0..73 record train and val; 74..80 only test.
    add(Split::Train, kTrain, 0, kSpeakers - kTestSpeakers);
    add(Split::Val, kVal, 0, kSpeakers - kTestSpeakers);
    add(Split::Test, kTest, kSpeakers - kTestSpeakers, kTestSpeakers);
    return m;
}

nn::SampleLabels labels_of(const ManifestRecord& r) {
    const auto& maps = LabelMaps::standard();
    return {*maps.intent_index(r.intent), *maps.action_index(r.action), *maps.object_index(r.object)};
}

std::vector<LoadedClip> load_split(const Manifest& m, Split split) {
    std::vector<LoadedClip> out;
    for (const auto* r : m.split(split)) {
        AudioClip clip = read_wav(m.resolve(*r));
        require_sample_rate(clip);
        out.push_back({std::move(clip), labels_of(*r)});
    }
    return out;
}

nn::FeatureSet extract_features(const std::vector<LoadedClip>& clips, const FrontendConfig& cfg,
                                const AugmentParams* augmentation) {
    nn::FeatureSet set;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const AudioClip windowed = fit_length(clips[i].clip, kWindowSamples);
        if (augmentation) {
            AugmentParams p = *augmentation;
            p.seed = augmentation->seed + i;
            for (const auto& variant : augment_triplet(windowed, p)) set.add(mfcc(variant, cfg), clips[i].labels);
        } else {
            set.add(mfcc(windowed, cfg), clips[i].labels);
        }
    }
    return set;
}

Metrics evaluate(const nn::ModelGraph& model, const nn::FeatureSet& set) {
    if (set.size() == 0) throw Error(ErrorCode::EmptySplit, "nothing to evaluate");
    const auto& maps = LabelMaps::standard();
    const bool slots = model.head_kind == nn::HeadKind::Slots;

    Metrics m;
    m.total = set.size();
    m.row_labels = maps.intents();
    m.col_labels = maps.intents();
    if (slots) m.col_labels.emplace_back("<invalid>");
    m.confusion.assign(m.row_labels.size(), std::vector<std::size_t>(m.col_labels.size(), 0));

    const nn::InferenceSession session(model);
    const auto all_labels = nn::head_labels(model, set.labels);
    std::vector<double> losses;
    losses.reserve(set.size());
    std::size_t correct = 0, action_ok = 0, object_ok = 0;
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < set.size(); start += kBatch) {
        const std::size_t n = std::min(kBatch, set.size() - start);
        auto preds = session.run_batch(
            std::span<const float>(set.data).subspan(start * set.sample_size(), n * set.sample_size()), n,
            set.frames);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = start + i;
            const auto& truth = set.labels[idx];
            const auto& p = preds[i];
            double loss = 0.0;
            for (std::size_t h = 0; h < p.heads.size(); ++h) {
                const double prob = p.heads[h].probs[static_cast<std::size_t>(all_labels[h][idx])];
                loss += -std::log(std::max(prob, 1e-300));
            }
            losses.push_back(loss);

            std::size_t col = m.col_labels.size() - 1;
            if (auto pi = maps.intent_index(p.intent)) col = static_cast<std::size_t>(*pi);
            ++m.confusion[static_cast<std::size_t>(truth.intent)][col];
            if (col == static_cast<std::size_t>(truth.intent)) ++correct;
            if (slots) {
                if (maps.action_index(p.action) == truth.action) ++action_ok;
                if (maps.object_index(p.object) == truth.object) ++object_ok;
            }
        }
    }
    // Sorted summation keeps the mean independent of sample order.
    std::sort(losses.begin(), losses.end());
    double sum = 0.0;
    for (double l : losses) sum += l;
    const auto total = static_cast<double>(set.size());
    m.mean_loss = sum / total;
    m.accuracy = static_cast<double>(correct) / total;
    if (slots) {
        m.action_accuracy = static_cast<double>(action_ok) / total;
        m.object_accuracy = static_cast<double>(object_ok) / total;
    }
    return m;
}

Metrics evaluate(const nn::ModelGraph& model, const Manifest& manifest, Split split) {
    const auto clips = load_split(manifest, split);
    if (clips.empty()) throw Error(ErrorCode::EmptySplit, std::string(to_string(split)) + " split is empty");
    return evaluate(model, extract_features(clips, model.frontend));
}

std::string Metrics::confusion_csv() const {
    std::ostringstream os;
    os << "true\\pred";
    for (const auto& c : col_labels) os << ',' << c;
    os << '\n';
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        os << row_labels[r];
        for (std::size_t v : confusion[r]) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

std::string Metrics::to_record() const {
    ordered_json j;
    j["samples"] = total;
    j["accuracy"] = accuracy;
    j["mean_loss"] = mean_loss;
    if (action_accuracy) j["action_accuracy"] = *action_accuracy;
    if (object_accuracy) j["object_accuracy"] = *object_accuracy;
    return j.dump();
}

std::vector<ExperimentSpec> experiment_grid(const std::string& grid_id) {
    using nn::ArchVariant;
    if (grid_id == "rpi") {
        return {
            {"1", 10, false, ArchVariant::Gmp},     {"2", 10, true, ArchVariant::Gmp},
            {"3", 10, false, ArchVariant::Flatten}, {"4", 10, true, ArchVariant::Flatten},
            {"5", 13, false, ArchVariant::Gmp},     {"6", 13, true, ArchVariant::Gmp},
            {"7", 13, false, ArchVariant::Flatten}, {"8", 13, true, ArchVariant::Flatten},
        };
    }
    if (grid_id == "wio") {
        return {
            {"A", 10, false, ArchVariant::Gmp},
            {"B", 10, true, ArchVariant::Gmp},
            {"C", 10, false, ArchVariant::Flatten},
            {"D", 10, true, ArchVariant::Flatten},
        };
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown grid '" + grid_id + "' (expected rpi or wio)");
}

std::vector<ExperimentRow> run_experiment_grid(const std::string& grid_id, const Manifest& manifest,
                                               const nn::TrainConfig& train_cfg, const GridOptions& options) {
    const auto specs = experiment_grid(grid_id);
    const auto train_clips = load_split(manifest, Split::Train);
    const auto val_clips = load_split(manifest, Split::Val);
    const auto test_clips = load_split(manifest, Split::Test);
    if (train_clips.empty() || val_clips.empty() || test_clips.empty()) {
        throw Error(ErrorCode::EmptySplit, "experiment grid needs non-empty train, val and test splits");
    }

    // Feature sets are shared by experiments with the same MFCC count.
    std::map<std::pair<std::size_t, bool>, nn::FeatureSet> train_cache;
    std::map<std::size_t, std::pair<nn::FeatureSet, nn::FeatureSet>> eval_cache;

    std::vector<ExperimentRow> rows;
    for (const auto& spec : specs) {
        FrontendConfig fe = options.model.frontend;
        fe.n_mfcc = spec.n_mfcc;
        auto key = std::make_pair(spec.n_mfcc, spec.augment);
        if (!train_cache.contains(key)) {
            train_cache[key] = extract_features(train_clips, fe, spec.augment ? &options.augment : nullptr);
        }
        if (!eval_cache.contains(spec.n_mfcc)) {
            eval_cache[spec.n_mfcc] = {extract_features(val_clips, fe), extract_features(test_clips, fe)};
        }
        const auto& train_set = train_cache[key];
        const auto& [val_set, test_set] = eval_cache[spec.n_mfcc];

        nn::ModelOptions mo = options.model;
        mo.frontend = fe;
        mo.seed = train_cfg.seed;
        auto model = nn::build_model(spec.arch, spec.n_mfcc, options.heads, mo);
        auto result = nn::train(std::move(model), train_set, val_set, train_cfg);
        const Metrics metrics = evaluate(result.model, test_set);

        ExperimentRow row;
        row.spec = spec;
        row.accuracy = 100.0 * metrics.accuracy;
        row.test_loss = metrics.mean_loss;
        row.parameters = nn::count_params(result.model);
        row.train_features = train_set.size();
        row.best_epoch = result.best_epoch;
        row.stopped_epoch = result.stopped_epoch;
        if (options.on_row) options.on_row(row);
        rows.push_back(row);
    }
    return rows;
}

std::string grid_table(const std::vector<ExperimentRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(5) << "Exp" << std::setw(7) << "MFCCs" << std::setw(14) << "Augmentation"
       << std::setw(20) << "Architecture" << std::right << std::setw(13) << "Accuracy(%)" << std::setw(11)
       << "Test Loss" << std::setw(12) << "Parameters" << "\n";
    os << std::fixed;
    for (const auto& r : rows) {
        os << std::left << std::setw(5) << r.spec.id << std::setw(7) << r.spec.n_mfcc << std::setw(14)
           << (r.spec.augment ? "With" : "Without") << std::setw(20)
           << (r.spec.arch == nn::ArchVariant::Gmp ? "Global Max Pooling" : "Flattening") << std::right
           << std::setw(13) << std::setprecision(2) << r.accuracy << std::setw(11) << std::setprecision(4)
           << r.test_loss << std::setw(12) << r.parameters << "\n";
    }
    return os.str();
}

std::string grid_records(const std::vector<ExperimentRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        ordered_json j;
        j["exp"] = r.spec.id;
        j["mfccs"] = r.spec.n_mfcc;
        j["augmentation"] = r.spec.augment ? "With" : "Without";
        j["architecture"] = r.spec.arch == nn::ArchVariant::Gmp ? "Global Max Pooling" : "Flattening";
        j["accuracy"] = r.accuracy;
        j["test_loss"] = r.test_loss;
        j["parameters"] = r.parameters;
        j["train_features"] = r.train_features;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace lsic::data
