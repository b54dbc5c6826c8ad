// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/serve.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"

namespace lsic::serve {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string ClipOutcome::to_record() const {
    ordered_json j;
    j["source"] = source_id;
    if (error) {
        j["error"] = *error;
        return j.dump();
    }
    j["intent"] = prediction.intent;
    j["confidence"] = prediction.confidence;
    j["accepted"] = decision.accepted;
    if (!decision.accepted) j["reason"] = std::string(bus::to_string(decision.reason));
    if (receipt) j["seq"] = seq;
    return j.dump();
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// gate + publish half of process_clip
void decide_and_publish(ClipOutcome& out, const bus::GateConfig& gate_cfg, bus::CommandPublisher& publisher) {
    out.decision = bus::gate(out.prediction, gate_cfg);
    if (!out.decision) return;
    try {
        out.receipt = publisher.publish(out.decision.command);
        out.seq = publisher.last_seq();
    } catch (const Error& e) {
        out.error = e.what();
    }
}

}  // namespace

ClipOutcome process_clip(const nn::InferenceSession& session, const AudioClip& clip,
                         const bus::GateConfig& gate_cfg, bus::CommandPublisher& publisher) {
    const auto t0 = std::chrono::steady_clock::now();
    ClipOutcome out;
    out.source_id = clip.source_id.value_or("");
    out.prediction = session.predict(clip);
    decide_and_publish(out, gate_cfg, publisher);
    out.latency_ms = ms_since(t0);
    return out;
}

PathSource file_list_source(std::vector<fs::path> files) {
    auto state = std::make_shared<std::pair<std::vector<fs::path>, std::size_t>>(std::move(files), 0);
    return [state]() -> std::optional<fs::path> {
        if (state->second >= state->first.size()) return std::nullopt;
        return state->first[state->second++];
    };
}

PathSource directory_source(fs::path dir, WatchOptions opts) {
    struct State {
        fs::path dir;
        WatchOptions opts;
        std::set<std::string> seen;
        std::deque<fs::path> ready;
        std::size_t yielded = 0;
    };
    auto st = std::make_shared<State>();
    st->dir = std::move(dir);
    st->opts = std::move(opts);
    if (!fs::is_directory(st->dir)) {
        throw Error(ErrorCode::IoError, "watch directory does not exist: " + st->dir.string());
    }
    return [st]() -> std::optional<fs::path> {
        if (st->opts.max_files && st->yielded >= st->opts.max_files) return std::nullopt;
        auto idle_since = std::chrono::steady_clock::now();
        while (st->ready.empty()) {
            if (st->opts.stop_requested && st->opts.stop_requested()) return std::nullopt;
            std::vector<fs::path> found;
            std::error_code ec;
            for (const auto& entry : fs::directory_iterator(st->dir, ec)) {
                if (!entry.is_regular_file()) continue;
                auto ext = entry.path().extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
                if (ext != ".wav") continue;
                if (st->seen.insert(entry.path().filename().string()).second) found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            for (auto& p : found) st->ready.push_back(std::move(p));
            if (!st->ready.empty()) break;
            if (st->opts.idle_timeout.count() > 0 &&
                std::chrono::steady_clock::now() - idle_since >= st->opts.idle_timeout) {
                return std::nullopt;
            }
            std::this_thread::sleep_for(st->opts.poll);
        }
        ++st->yielded;
        auto p = std::move(st->ready.front());
        st->ready.pop_front();
        return p;
    };
}

void run_pipeline(const PathSource& source, const nn::InferenceSession& session, const bus::GateConfig& gate_cfg,
                  bus::CommandPublisher& publisher, const std::function<void(const ClipOutcome&)>& on_outcome) {
    struct Pending {
        ClipOutcome outcome;
        std::chrono::steady_clock::time_point t0;
    };
    Channel<Ingested> ingested(4);
    Channel<Pending> predicted(4);

    std::thread ingest([&] {
        while (auto path = source()) {
            Ingested item;
            item.source_id = path->filename().string();
            try {
                item.clip = read_wav(*path);
                item.clip->source_id = item.source_id;
            } catch (const Error& e) {
                item.error = e.what();
            }
            if (!ingested.push(std::move(item))) break;
        }
        ingested.close();
    });

    std::thread infer([&] {
        while (auto item = ingested.pop()) {
            Pending p;
            p.t0 = std::chrono::steady_clock::now();
            p.outcome.source_id = item->source_id;
            if (!item->clip) {
                p.outcome.error = item->error;
            } else {
                try {
                    p.outcome.prediction = session.predict(*item->clip);
                } catch (const Error& e) {
                    p.outcome.error = e.what();
                }
            }
            if (!predicted.push(std::move(p))) break;
        }
        predicted.close();
    });

    while (auto p = predicted.pop()) {
        if (!p->outcome.error) decide_and_publish(p->outcome, gate_cfg, publisher);
        p->outcome.latency_ms = ms_since(p->t0);
        if (on_outcome) on_outcome(p->outcome);
    }
    ingest.join();
    infer.join();
}

}  // namespace lsic::serve
