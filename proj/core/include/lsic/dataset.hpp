// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lsic/augment.hpp"
#include "lsic/nn/model.hpp"
#include "lsic/nn/train.hpp"

namespace lsic::data {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

struct ManifestRecord {
    std::string path;  // relative paths resolve against Manifest::base_dir
    std::string intent;
    std::string action;
    std::string object;
    std::string speaker_id;
    Split split = Split::Train;
    double duration_s = 0.0;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRecord> records;

    std::vector<const ManifestRecord*> split(Split s) const;
    std::filesystem::path resolve(const ManifestRecord& r) const;
};

// One JSON object per line with fields path, intent, action, object,
// speaker_id, split, duration_s. Blank lines and '#' comments are skipped.
// Throws MalformedRecord, UnknownLabel, InconsistentSlots.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {});
ManifestRecord parse_record(const std::string& line, std::size_t line_no = 0);
std::string to_line(const ManifestRecord& r);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

struct SplitReport {
    std::map<Split, std::set<std::string>> speakers;
    std::map<Split, std::size_t> counts;
    std::set<std::string> train_test_overlap;
    std::set<std::string> val_test_overlap;
    std::vector<Split> empty_splits;

    bool speaker_disjoint() const { return train_test_overlap.empty() && val_test_overlap.empty(); }
    bool ok() const { return speaker_disjoint() && empty_splits.empty(); }
    std::string to_text() const;
    std::string to_record() const;
};

SplitReport split_check(const Manifest& m);

// 10,200 records from 81 speakers; 7 held-out test speakers; split sizes
// 8127 / 1005 / 1068 (train / val / test). No audio is referenced.
Manifest make_reference_manifest(std::uint64_t seed = 0);

struct Metrics {
    std::size_t total = 0;
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;  // slots models add an "<invalid>" column
    std::vector<std::vector<std::size_t>> confusion;
    std::optional<double> action_accuracy;
    std::optional<double> object_accuracy;

    std::string confusion_csv() const;
    std::string to_record() const;
};

Metrics evaluate(const nn::ModelGraph& model, const nn::FeatureSet& set);
/// Throws EmptySplit.
Metrics evaluate(const nn::ModelGraph& model, const Manifest& manifest, Split split);

nn::SampleLabels labels_of(const ManifestRecord& r);

struct LoadedClip {
    AudioClip clip;
    nn::SampleLabels labels;
};

std::vector<LoadedClip> load_split(const Manifest& m, Split split);

// Features for the model window. With augmentation every clip contributes
// {original, noisy, pitch-shifted}; noise seeds are params.seed + clip index.
nn::FeatureSet extract_features(const std::vector<LoadedClip>& clips, const FrontendConfig& cfg,
                                const AugmentParams* augmentation = nullptr);

struct ExperimentSpec {
    std::string id;
    std::size_t n_mfcc = 10;
    bool augment = false;
    nn::ArchVariant arch = nn::ArchVariant::Gmp;
};

/// "rpi" (1-8) or "wio" (A-D). Throws ConfigInvalid.
std::vector<ExperimentSpec> experiment_grid(const std::string& grid_id);

struct ExperimentRow {
    ExperimentSpec spec;
    double accuracy = 0.0;  // percent, test split
    double test_loss = 0.0;
    std::size_t parameters = 0;
    std::size_t train_features = 0;
    int best_epoch = 0;
    int stopped_epoch = 0;
};

struct GridOptions {
    nn::HeadKind heads = nn::HeadKind::SingleIntent;
    AugmentParams augment;
    nn::ModelOptions model;
    std::function<void(const ExperimentRow&)> on_row;
};

std::vector<ExperimentRow> run_experiment_grid(const std::string& grid_id, const Manifest& manifest,
                                               const nn::TrainConfig& train_cfg, const GridOptions& options = {});

std::string grid_table(const std::vector<ExperimentRow>& rows);
std::string grid_records(const std::vector<ExperimentRow>& rows);

}  // namespace lsic::data
