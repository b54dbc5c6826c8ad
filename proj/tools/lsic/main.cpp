// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//
// lsic: command-line front end for the speech-intent pipeline.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lsic/audio.hpp"
#include "lsic/augment.hpp"
#include "lsic/bus.hpp"
#include "lsic/dataset.hpp"
#include "lsic/devices.hpp"
#include "lsic/error.hpp"
#include "lsic/mfcc.hpp"
#include "lsic/model_store.hpp"
#include "lsic/mqtt.hpp"
#include "lsic/nn/infer.hpp"
#include "lsic/nn/model.hpp"
#include "lsic/nn/train.hpp"
#include "lsic/quant.hpp"
#include "lsic/serve.hpp"
#include "lsic/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct Globals {
    std::uint64_t seed = 0;
    std::string broker;
    double threshold = 0.75;
    bool verbose = false;
};

void log(const Globals& g, const std::string& msg) {
    if (g.verbose) std::cerr << "[lsic] " << msg << "\n";
}

void note(const std::string& msg) { std::cerr << "[lsic] " << msg << "\n"; }

lsic::nn::ArchVariant arch_arg(const std::string& s) {
    auto v = lsic::nn::parse_arch(s);
    if (!v) throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "unknown architecture '" + s + "'");
    return *v;
}

lsic::nn::HeadKind heads_arg(const std::string& s) {
    auto v = lsic::nn::parse_head_kind(s);
    if (!v) throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "unknown head kind '" + s + "'");
    return *v;
}

lsic::data::Split split_arg(const std::string& s) {
    auto v = lsic::data::parse_split(s);
    if (!v) throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "unknown split '" + s + "'");
    return *v;
}

lsic::nn::ModelGraph load_model(const std::string& path) {
    if (!fs::exists(path)) throw lsic::Error(lsic::ErrorCode::IoError, "model file not found: " + path);
    return lsic::store::load(path);
}

std::shared_ptr<lsic::mqtt::MqttClient> mqtt_client(const Globals& g, const std::string& client_id) {
    if (g.broker.empty()) {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "mqtt transport needs --broker or LSIC_BROKER_URL");
    }
    lsic::mqtt::ClientOptions opts;
    opts.broker = lsic::mqtt::parse_broker_url(g.broker);
    opts.client_id = client_id;
    auto client = std::make_shared<lsic::mqtt::MqttClient>(opts);
    client->connect();
    return client;
}

// --- features -------------------------------------------------------------

struct FeaturesArgs {
    std::string wav;
    std::size_t n_mfcc = 13;
    std::string out;
    bool csv = false;
};

int cmd_features(const Globals&, const FeaturesArgs& a) {
    auto clip = lsic::read_wav(a.wav);
    lsic::require_sample_rate(clip);
    auto cfg = lsic::FrontendConfig::with_mfcc(a.n_mfcc);
    auto m = lsic::mfcc(lsic::fit_length(clip, lsic::kWindowSamples), cfg);
    if (!a.out.empty()) lsic::save_feature_cache(a.out, m);
    if (a.csv) {
        std::cout << std::setprecision(9);
        for (std::size_t t = 0; t < m.frames(); ++t) {
            for (std::size_t k = 0; k < m.n_mfcc(); ++k) {
                std::cout << (k ? "," : "") << m.values(t, k);
            }
            std::cout << "\n";
        }
    } else {
        ordered_json j;
        j["wav"] = a.wav;
        j["frames"] = m.frames();
        j["n_mfcc"] = m.n_mfcc();
        if (!a.out.empty()) j["cache"] = a.out;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

// --- augment --------------------------------------------------------------

struct AugmentArgs {
    std::string wav;
    std::string out_dir;
    double snr_db = 20.0;
    double semitones = 2.0;
};

int cmd_augment(const Globals& g, const AugmentArgs& a) {
    lsic::AugmentParams p{a.snr_db, a.semitones, g.seed};
    p.validate();
    auto clip = lsic::read_wav(a.wav);
    lsic::require_sample_rate(clip);
    auto triplet = lsic::augment_triplet(clip, p);
    fs::create_directories(a.out_dir);
    const std::string stem = fs::path(a.wav).stem().string();
    const char* suffix[3] = {"orig", "noise", "pitch"};
    for (int i = 0; i < 3; ++i) {
        fs::path out = fs::path(a.out_dir) / (stem + "_" + suffix[i] + ".wav");
        lsic::write_wav(out, triplet[static_cast<std::size_t>(i)]);
        std::cout << out.string() << "\n";
    }
    return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string out;
    std::size_t n_mfcc = 13;
    std::string arch = "gmp";
    std::string heads = "single_intent";
    bool augment = false;
    int max_epochs = 300;
    int patience = 20;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::string history;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
    lsic::nn::TrainConfig cfg;
    cfg.max_epochs = a.max_epochs;
    cfg.patience = a.patience;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.seed = g.seed;
    cfg.validate();
    const auto arch = arch_arg(a.arch);
    const auto heads = heads_arg(a.heads);

    auto manifest = lsic::data::load_manifest(a.manifest);
    auto train_clips = lsic::data::load_split(manifest, lsic::data::Split::Train);
    auto val_clips = lsic::data::load_split(manifest, lsic::data::Split::Val);
    if (train_clips.empty()) throw lsic::Error(lsic::ErrorCode::EmptySplit, "manifest has no train records");
    if (val_clips.empty()) throw lsic::Error(lsic::ErrorCode::EmptySplit, "manifest has no val records");

    lsic::nn::ModelOptions mo;
    mo.frontend = lsic::FrontendConfig::with_mfcc(a.n_mfcc);
    mo.seed = g.seed;
    lsic::AugmentParams aug;
    aug.seed = g.seed;
    auto train_set = lsic::data::extract_features(train_clips, mo.frontend, a.augment ? &aug : nullptr);
    auto val_set = lsic::data::extract_features(val_clips, mo.frontend);
    log(g, "train features: " + std::to_string(train_set.size()) + ", val: " + std::to_string(val_set.size()));

    std::ofstream history;
    if (!a.history.empty()) {
        history.open(a.history);
        if (!history) throw lsic::Error(lsic::ErrorCode::IoError, "cannot write " + a.history);
    }
    auto model = lsic::nn::build_model(arch, a.n_mfcc, heads, mo);
    auto result = lsic::nn::train(std::move(model), train_set, val_set, cfg, [&](const lsic::nn::EpochRecord& r) {
        if (history) history << lsic::nn::to_record(r) << "\n";
        log(g, lsic::nn::to_record(r));
    });
    const std::size_t bytes = lsic::store::save(result.model, a.out);

    ordered_json j;
    j["model"] = a.out;
    j["arch"] = std::string(lsic::nn::to_string(arch));
    j["heads"] = std::string(lsic::nn::to_string(heads));
    j["n_mfcc"] = a.n_mfcc;
    j["parameters"] = lsic::nn::count_params(result.model);
    j["train_features"] = train_set.size();
    j["best_epoch"] = result.best_epoch;
    j["stopped_epoch"] = result.stopped_epoch;
    j["best_val_acc"] = result.best_val_acc;
    j["bytes"] = bytes;
    std::cout << j.dump() << "\n";
    return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string manifest;
    std::string split = "test";
    std::string confusion;
};

int cmd_eval(const Globals&, const EvalArgs& a) {
    auto model = load_model(a.model);
    auto manifest = lsic::data::load_manifest(a.manifest);
    auto metrics = lsic::data::evaluate(model, manifest, split_arg(a.split));
    if (!a.confusion.empty()) {
        std::ofstream out(a.confusion);
        if (!out) throw lsic::Error(lsic::ErrorCode::IoError, "cannot write " + a.confusion);
        out << metrics.confusion_csv();
    }
    std::cout << metrics.to_record() << "\n";
    return 0;
}

// --- quantize -------------------------------------------------------------

struct QuantizeArgs {
    std::string model;
    std::string mode;
    std::string out;
    std::string manifest;  // calibration and/or report data
    std::string calib_split = "train";
    std::string eval_split = "test";
    bool report = false;
};

int cmd_quantize(const Globals&, const QuantizeArgs& a) {
    using lsic::nn::QuantMode;
    auto model = load_model(a.model);
    if (model.quant != QuantMode::Fp32) {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "quantize expects an fp32 model");
    }
    std::optional<lsic::data::Manifest> manifest;
    if (!a.manifest.empty()) manifest = lsic::data::load_manifest(a.manifest);

    auto calibration = [&]() -> std::optional<lsic::quant::RangeMap> {
        if (!manifest) return std::nullopt;
        auto clips = lsic::data::load_split(*manifest, split_arg(a.calib_split));
        auto set = lsic::data::extract_features(clips, model.frontend);
        return lsic::quant::calibrate_activations(model, set);
    };

    if (a.report) {
        if (!manifest) throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "--report needs --manifest");
        auto ranges = calibration();
        std::map<QuantMode, lsic::nn::ModelGraph> models;
        for (auto mode : {QuantMode::Fp32, QuantMode::Fp16Weights, QuantMode::Int8Weights, QuantMode::Int8Full}) {
            models[mode] = lsic::quant::quantize_model(model, mode, ranges);
        }
        auto eval_clips = lsic::data::load_split(*manifest, split_arg(a.eval_split));
        auto eval_set = lsic::data::extract_features(eval_clips, model.frontend);
        auto report = lsic::quant::size_report(models, eval_set);
        std::cout << report.to_table();
        return 0;
    }

    if (a.mode.empty() || a.out.empty()) {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "quantize needs --mode and --out (or --report)");
    }
    auto mode = lsic::nn::parse_quant_mode(a.mode);
    if (!mode) throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "unknown quantization mode '" + a.mode + "'");
    std::optional<lsic::quant::RangeMap> ranges;
    if (*mode == QuantMode::Int8Full) ranges = calibration();
    auto q = lsic::quant::quantize_model(model, *mode, ranges);
    const std::size_t bytes = lsic::store::save(q, a.out);
    ordered_json j;
    j["model"] = a.out;
    j["mode"] = std::string(lsic::nn::to_string(*mode));
    j["payload_bytes"] = lsic::quant::payload_bytes(q);
    j["file_bytes"] = bytes;
    std::cout << j.dump() << "\n";
    return 0;
}

// --- infer ----------------------------------------------------------------

struct InferArgs {
    std::string model;
    std::string wav;
};

int cmd_infer(const Globals&, const InferArgs& a) {
    auto model = load_model(a.model);
    auto clip = lsic::read_wav(a.wav);
    auto p = lsic::nn::predict(model, clip);
    ordered_json j;
    j["intent"] = p.intent;
    j["confidence"] = p.confidence;
    ordered_json top = ordered_json::array();
    for (const auto& [label, prob] : p.top_k(3)) top.push_back({{"label", label}, {"prob", prob}});
    j["top3"] = top;
    if (model.head_kind == lsic::nn::HeadKind::Slots) {
        j["action"] = p.action;
        j["object"] = p.object;
        j["valid_pair"] = p.valid_pair;
    }
    std::cout << j.dump() << "\n";
    return 0;
}

// --- serve ----------------------------------------------------------------

struct ServeArgs {
    std::string model;
    std::vector<std::string> wavs;
    std::string watch;
    int poll_ms = 200;
    std::size_t max_files = 0;
    int idle_exit_ms = 0;
    std::string transport = "loopback";
    bool with_fleet = false;
    std::string topic = std::string(lsic::bus::kCommandTopic);
    std::string client_id = "lsic-serve";
};

void print_fleet(const lsic::devices::Fleet& fleet) {
    for (const auto& n : fleet.snapshot()) {
        ordered_json j;
        j["device_id"] = n.device_id;
        j["fields"] = ordered_json::parse(n.state.fields_json());
        j["last_seq"] = n.last_seq;
        j["handled"] = n.handled;
        std::cout << j.dump() << "\n";
    }
}

int cmd_serve(const Globals& g, const ServeArgs& a) {
    lsic::bus::GateConfig gate{g.threshold};
    gate.validate();
    if (a.wavs.empty() == a.watch.empty()) {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "serve needs exactly one of --wav or --watch");
    }
    lsic::nn::InferenceSession session(load_model(a.model));

    std::shared_ptr<lsic::bus::Bus> bus;
    std::unique_ptr<lsic::devices::Fleet> fleet;
    lsic::devices::FleetConfig fleet_cfg;
    fleet_cfg.command_topic = a.topic;
    if (a.transport == "loopback") {
        auto loop = std::make_shared<lsic::bus::LoopbackBus>();
        loop->connect();
        bus = loop;
        if (a.with_fleet) fleet = lsic::devices::run_fleet(bus, fleet_cfg);
    } else if (a.transport == "mqtt") {
        bus = mqtt_client(g, a.client_id);
        if (a.with_fleet) {
            fleet = lsic::devices::run_fleet(
                [&](const std::string& id) -> std::shared_ptr<lsic::bus::Bus> { return mqtt_client(g, id); },
                fleet_cfg);
        }
    } else {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "unknown transport '" + a.transport + "'");
    }

    lsic::bus::CommandPublisher publisher(*bus, a.client_id, a.topic);
    lsic::serve::PathSource source;
    if (!a.wavs.empty()) {
        std::vector<fs::path> files(a.wavs.begin(), a.wavs.end());
        source = lsic::serve::file_list_source(files);
    } else {
        lsic::serve::WatchOptions w;
        w.poll = std::chrono::milliseconds(a.poll_ms);
        w.max_files = a.max_files;
        w.idle_timeout = std::chrono::milliseconds(a.idle_exit_ms);
        w.stop_requested = [] { return g_stop.load(); };
        source = lsic::serve::directory_source(a.watch, w);
    }

    std::size_t failures = 0;
    lsic::serve::run_pipeline(source, session, gate, publisher, [&](const lsic::serve::ClipOutcome& o) {
        std::cout << o.to_record() << std::endl;
        if (o.error) {
            ++failures;
            note(o.source_id + ": " + *o.error);
        } else if (!o.decision) {
            note(o.source_id + ": rejected (" + std::string(lsic::bus::to_string(o.decision.reason)) +
                 "), nothing published");
        }
    });

    if (fleet) {
        // MQTT deliveries are asynchronous; give the nodes a moment to settle.
        if (a.transport == "mqtt") std::this_thread::sleep_for(std::chrono::milliseconds(300));
        print_fleet(*fleet);
        fleet->shutdown();
    }
    return failures == 0 ? 0 : 1;
}

// --- devices --------------------------------------------------------------

struct DevicesArgs {
    std::string transport = "mqtt";
    std::string replay;
    int duration_s = 0;
    std::string topic = std::string(lsic::bus::kCommandTopic);
};

int cmd_devices(const Globals& g, const DevicesArgs& a) {
    if (!a.replay.empty()) {
        // Offline: replay a JSONL command log and print the final fleet.
        std::ifstream in(a.replay);
        if (!in) throw lsic::Error(lsic::ErrorCode::IoError, "cannot open " + a.replay);
        std::vector<lsic::bus::CommandMsg> log_msgs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            log_msgs.push_back(lsic::bus::parse_command(line));
        }
        for (const auto& [kind, state] : lsic::devices::replay(log_msgs)) {
            ordered_json j;
            j["kind"] = std::string(lsic::devices::to_string(kind));
            j["fields"] = ordered_json::parse(state.fields_json());
            std::cout << j.dump() << "\n";
        }
        return 0;
    }
    if (a.transport != "mqtt") {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid,
                          "devices runs over mqtt; use --replay for an offline run");
    }
    lsic::devices::FleetConfig cfg;
    cfg.command_topic = a.topic;
    cfg.on_effect = [](const std::string& id, const lsic::devices::Effect& e) {
        ordered_json j;
        j["device_id"] = id;
        j["effect"] = e.to_string();
        std::cout << j.dump() << std::endl;
    };
    std::vector<std::shared_ptr<lsic::mqtt::MqttClient>> clients;
    auto fleet = lsic::devices::run_fleet(
        [&](const std::string& id) -> std::shared_ptr<lsic::bus::Bus> {
            clients.push_back(mqtt_client(g, id));
            return clients.back();
        },
        cfg);
    note("fleet online: " + std::to_string(fleet->size()) + " nodes on " + g.broker);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(a.duration_s);
    while (!g_stop && (a.duration_s <= 0 || std::chrono::steady_clock::now() < deadline)) {
        bool lost = false;
        for (const auto& c : clients) lost = lost || !c->connected();
        if (lost) throw lsic::Error(lsic::ErrorCode::NotConnected, "lost broker connection");
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    fleet->shutdown();
    print_fleet(*fleet);
    return 0;
}

// --- experiments ----------------------------------------------------------

struct ExperimentsArgs {
    std::string grid;
    std::string manifest;
    int max_epochs = 300;
    int patience = 20;
    std::string heads = "single_intent";
    std::string format = "table";
};

int cmd_experiments(const Globals& g, const ExperimentsArgs& a) {
    lsic::nn::TrainConfig cfg;
    cfg.max_epochs = a.max_epochs;
    cfg.patience = a.patience;
    cfg.seed = g.seed;
    cfg.validate();
    if (a.format != "table" && a.format != "jsonl") {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "--format must be table or jsonl");
    }
    lsic::data::experiment_grid(a.grid);  // validate before loading audio
    auto manifest = lsic::data::load_manifest(a.manifest);
    lsic::data::GridOptions opts;
    opts.heads = heads_arg(a.heads);
    opts.augment.seed = g.seed;
    opts.on_row = [&](const lsic::data::ExperimentRow& r) {
        log(g, "finished experiment " + r.spec.id);
    };
    auto rows = lsic::data::run_experiment_grid(a.grid, manifest, cfg, opts);
    std::cout << (a.format == "table" ? lsic::data::grid_table(rows) : lsic::data::grid_records(rows));
    return 0;
}

// --- split-check ----------------------------------------------------------

struct SplitCheckArgs {
    std::string manifest;
    bool reference_shape = false;
    bool json = false;
};

int cmd_split_check(const Globals& g, const SplitCheckArgs& a) {
    if (a.manifest.empty() == !a.reference_shape) {
        throw lsic::Error(lsic::ErrorCode::ConfigInvalid, "give exactly one of --manifest or --reference-shape");
    }
    auto manifest =
        a.reference_shape ? lsic::data::make_reference_manifest(g.seed) : lsic::data::load_manifest(a.manifest);
    auto report = lsic::data::split_check(manifest);
    std::cout << (a.json ? report.to_record() + "\n" : report.to_text());
    if (!report.ok()) {
        note("split check failed");
        return 1;
    }
    return 0;
}

// --- synth-corpus ---------------------------------------------------------

struct SynthArgs {
    std::string out;
    int train = 2;
    int val = 1;
    int test = 1;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
    lsic::synth::CorpusOptions o;
    o.train_per_class = a.train;
    o.val_per_class = a.val;
    o.test_per_class = a.test;
    o.seed = g.seed;
    auto m = lsic::synth::write_corpus(a.out, o);
    std::cout << (fs::path(a.out) / "manifest.jsonl").string() << "\n";
    log(g, std::to_string(m.records.size()) + " clips written");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Luganda smart-home speech intent pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_version_flag("--version", "lsic 0.1.0");

    Globals g;
    app.add_option("--seed", g.seed, "RNG seed")->envname("LSIC_SEED");
    app.add_option("--broker", g.broker, "MQTT broker, e.g. mqtt://127.0.0.1:1883")->envname("LSIC_BROKER_URL");
    app.add_option("--threshold", g.threshold, "confidence gate")->check(CLI::Range(0.0, 1.0));
    app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

    std::function<int()> run;

    FeaturesArgs fa;
    auto* features = app.add_subcommand("features", "MFCC features for one WAV");
    features->add_option("--wav", fa.wav)->required()->check(CLI::ExistingFile);
    features->add_option("--n-mfcc", fa.n_mfcc)->check(CLI::IsMember({10, 13}));
    features->add_option("--out", fa.out, "write a binary feature cache");
    features->add_flag("--csv", fa.csv, "print the matrix as CSV");
    features->callback([&] { run = [&] { return cmd_features(g, fa); }; });

    AugmentArgs aa;
    auto* augment = app.add_subcommand("augment", "write the noise / pitch triplet for one WAV");
    augment->add_option("--wav", aa.wav)->required()->check(CLI::ExistingFile);
    augment->add_option("--out-dir", aa.out_dir)->required();
    augment->add_option("--snr-db", aa.snr_db);
    augment->add_option("--semitones", aa.semitones);
    augment->callback([&] { run = [&] { return cmd_augment(g, aa); }; });

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a model from a manifest");
    train->add_option("--manifest", ta.manifest)->required()->check(CLI::ExistingFile);
    train->add_option("--out", ta.out)->required();
    train->add_option("--n-mfcc", ta.n_mfcc)->check(CLI::IsMember({10, 13}));
    train->add_option("--arch", ta.arch, "gmp | flatten")->check(CLI::IsMember({"gmp", "flatten"}));
    train->add_option("--heads", ta.heads, "single_intent | slots")
        ->check(CLI::IsMember({"single_intent", "slots"}));
    train->add_flag("--augment", ta.augment);
    train->add_option("--max-epochs", ta.max_epochs)->check(CLI::PositiveNumber);
    train->add_option("--patience", ta.patience)->check(CLI::PositiveNumber);
    train->add_option("--batch-size", ta.batch_size)->check(CLI::PositiveNumber);
    train->add_option("--lr", ta.lr)->check(CLI::PositiveNumber);
    train->add_option("--history", ta.history, "per-epoch JSONL log");
    train->callback([&] { run = [&] { return cmd_train(g, ta); }; });

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "accuracy, loss and confusion matrix on a split");
    eval->add_option("--model", ea.model)->required();
    eval->add_option("--manifest", ea.manifest)->required()->check(CLI::ExistingFile);
    eval->add_option("--split", ea.split)->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--confusion", ea.confusion, "write the confusion matrix as CSV");
    eval->callback([&] { run = [&] { return cmd_eval(g, ea); }; });

    QuantizeArgs qa;
    auto* quantize = app.add_subcommand("quantize", "post-training quantization");
    quantize->add_option("--model", qa.model)->required();
    quantize->add_option("--mode", qa.mode, "fp32_baseline | fp16_weights | int8_weights | int8_full");
    quantize->add_option("--out", qa.out);
    quantize->add_option("--manifest", qa.manifest, "calibration / report data")->check(CLI::ExistingFile);
    quantize->add_option("--calib-split", qa.calib_split)->check(CLI::IsMember({"train", "val", "test"}));
    quantize->add_option("--eval-split", qa.eval_split)->check(CLI::IsMember({"train", "val", "test"}));
    quantize->add_flag("--report", qa.report, "size/accuracy table over all modes");
    quantize->callback([&] { run = [&] { return cmd_quantize(g, qa); }; });

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "classify one WAV");
    infer->add_option("--model", ia.model)->required();
    infer->add_option("--wav", ia.wav)->required()->check(CLI::ExistingFile);
    infer->callback([&] { run = [&] { return cmd_infer(g, ia); }; });

    ServeArgs sa;
    auto* serve = app.add_subcommand("serve", "WAV files or a watched directory -> gate -> publish");
    serve->add_option("--model", sa.model)->required();
    serve->add_option("--wav", sa.wavs)->check(CLI::ExistingFile);
    serve->add_option("--watch", sa.watch)->check(CLI::ExistingDirectory);
    serve->add_option("--poll-ms", sa.poll_ms)->check(CLI::PositiveNumber);
    serve->add_option("--max-files", sa.max_files);
    serve->add_option("--idle-exit-ms", sa.idle_exit_ms, "stop watching after this long without new files");
    serve->add_option("--transport", sa.transport)->check(CLI::IsMember({"loopback", "mqtt"}));
    serve->add_flag("--with-fleet", sa.with_fleet, "run the virtual devices in-process");
    serve->add_option("--topic", sa.topic);
    serve->add_option("--client-id", sa.client_id);
    serve->callback([&] { run = [&] { return cmd_serve(g, sa); }; });

    DevicesArgs da;
    auto* devices = app.add_subcommand("devices", "run the virtual device fleet");
    devices->add_option("--transport", da.transport)->check(CLI::IsMember({"mqtt"}));
    devices->add_option("--replay", da.replay, "replay a JSONL command log offline")->check(CLI::ExistingFile);
    devices->add_option("--duration-s", da.duration_s, "0 runs until interrupted");
    devices->add_option("--topic", da.topic);
    devices->callback([&] { run = [&] { return cmd_devices(g, da); }; });

    ExperimentsArgs xa;
    auto* experiments = app.add_subcommand("experiments", "train and score an experiment grid");
    experiments->add_option("--grid", xa.grid)->required()->check(CLI::IsMember({"rpi", "wio"}));
    experiments->add_option("--manifest", xa.manifest)->required()->check(CLI::ExistingFile);
    experiments->add_option("--max-epochs", xa.max_epochs)->check(CLI::PositiveNumber);
    experiments->add_option("--patience", xa.patience)->check(CLI::PositiveNumber);
    experiments->add_option("--heads", xa.heads)->check(CLI::IsMember({"single_intent", "slots"}));
    experiments->add_option("--format", xa.format)->check(CLI::IsMember({"table", "jsonl"}));
    experiments->callback([&] { run = [&] { return cmd_experiments(g, xa); }; });

    SplitCheckArgs ca;
    auto* split_check = app.add_subcommand("split-check", "speaker-disjointness report");
    split_check->add_option("--manifest", ca.manifest)->check(CLI::ExistingFile);
    split_check->add_flag("--reference-shape", ca.reference_shape,
                          "check a generated 81-speaker manifest instead of a file");
    split_check->add_flag("--json", ca.json);
    split_check->callback([&] { run = [&] { return cmd_split_check(g, ca); }; });

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth-corpus", "write a small synthetic corpus for smoke tests");
    synth->add_option("--out", ya.out)->required();
    synth->add_option("--train-per-class", ya.train)->check(CLI::PositiveNumber);
    synth->add_option("--val-per-class", ya.val)->check(CLI::PositiveNumber);
    synth->add_option("--test-per-class", ya.test)->check(CLI::PositiveNumber);
    synth->callback([&] { run = [&] { return cmd_synth(g, ya); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        return run ? run() : 2;
    } catch (const lsic::Error& e) {
        std::cerr << "lsic: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "lsic: " << e.what() << "\n";
        return 1;
    }
}
