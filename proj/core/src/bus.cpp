// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/bus.hpp"

#include <chrono>
#include <map>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"
#include "lsic/labels.hpp"

namespace lsic::bus {

using nlohmann::ordered_json;

std::string serialize(const CommandMsg& msg) {
    ordered_json j;
    j["v"] = msg.v;
    j["intent"] = msg.intent;
    j["action"] = msg.action;
    j["object"] = msg.object;
    j["confidence"] = msg.confidence;
    j["source"] = msg.source;
    j["seq"] = msg.seq;
    j["ts_ms"] = msg.ts_ms;
    return j.dump();
}

CommandMsg parse_command(std::string_view payload) {
    try {
        auto j = ordered_json::parse(payload);
        CommandMsg m;
        m.v = j.at("v").get<int>();
        if (m.v != 1) throw Error(ErrorCode::MalformedRecord, "unsupported command schema v" + std::to_string(m.v));
        m.intent = j.at("intent").get<std::string>();
        m.action = j.at("action").get<std::string>();
        m.object = j.at("object").get<std::string>();
        m.confidence = j.at("confidence").get<double>();
        m.source = j.at("source").get<std::string>();
        m.seq = j.at("seq").get<std::uint64_t>();
        m.ts_ms = j.at("ts_ms").get<std::int64_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("bad command message: ") + e.what());
    }
}

void GateConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "gate threshold must be in (0, 1]");
    }
}

std::string_view to_string(RejectReason r) {
    return r == RejectReason::LowConfidence ? "LowConfidence" : "InvalidPair";
}

GateDecision gate(const nn::Prediction& p, const GateConfig& cfg) {
    GateDecision d;
    if (!(p.confidence >= cfg.threshold)) {
        d.reason = RejectReason::LowConfidence;
        return d;
    }
    if (!LabelMaps::standard().is_valid_pair(p.object, p.action)) {
        d.reason = RejectReason::InvalidPair;
        return d;
    }
    d.accepted = true;
    d.command.intent = LabelMaps::join(p.object, p.action);
    d.command.action = p.action;
    d.command.object = p.object;
    d.command.confidence = p.confidence;
    return d;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
    std::size_t fi = 0, ti = 0;
    while (true) {
        const std::size_t fend = std::min(filter.find('/', fi), filter.size());
        const std::string_view level = filter.substr(fi, fend - fi);
        if (level == "#") return fend == filter.size();
        const std::size_t tend = std::min(topic.find('/', ti), topic.size());
        if (ti > topic.size()) return false;
        if (level != "+" && level != topic.substr(ti, tend - ti)) return false;
        const bool filter_done = fend == filter.size();
        const bool topic_done = tend == topic.size();
        if (filter_done || topic_done) {
            if (filter_done && topic_done) return true;
            // "a/#" also matches "a".
            return topic_done && filter.substr(fend) == "/#";
        }
        fi = fend + 1;
        ti = tend + 1;
    }
}

struct LoopbackBus::State {
    struct Entry {
        std::string filter;
        Handler handler;
        std::recursive_mutex mutex;
        bool active = true;
    };

    mutable std::mutex mutex;
    bool connected = false;
    std::uint64_t next_id = 1;
    std::uint64_t published = 0;
    std::map<std::uint64_t, std::shared_ptr<Entry>> entries;
};

LoopbackBus::LoopbackBus() : state_(std::make_shared<State>()) {}

LoopbackBus::~LoopbackBus() = default;

void LoopbackBus::connect() {
    std::lock_guard lock(state_->mutex);
    state_->connected = true;
}

void LoopbackBus::disconnect() {
    std::lock_guard lock(state_->mutex);
    state_->connected = false;
}

bool LoopbackBus::connected() const {
    std::lock_guard lock(state_->mutex);
    return state_->connected;
}

std::uint64_t LoopbackBus::published_count() const {
    std::lock_guard lock(state_->mutex);
    return state_->published;
}

DeliveryReceipt LoopbackBus::publish(const std::string& topic, const std::string& payload) {
    std::vector<std::shared_ptr<State::Entry>> targets;
    {
        std::lock_guard lock(state_->mutex);
        if (!state_->connected) throw Error(ErrorCode::NotConnected, "loopback bus is not connected");
        ++state_->published;
        for (const auto& [id, entry] : state_->entries) {
            if (topic_matches(entry->filter, topic)) targets.push_back(entry);
        }
    }
    DeliveryReceipt receipt;
    receipt.topic = topic;
    receipt.bytes = payload.size();
    receipt.acknowledged = true;
    for (const auto& entry : targets) {
        std::lock_guard lock(entry->mutex);
        if (!entry->active) continue;
        entry->handler(topic, payload);
        ++receipt.local_deliveries;
    }
    return receipt;
}

Subscription LoopbackBus::subscribe(const std::string& filter, Handler handler) {
    auto entry = std::make_shared<State::Entry>();
    entry->filter = filter;
    entry->handler = std::move(handler);
    std::uint64_t id = 0;
    {
        std::lock_guard lock(state_->mutex);
        if (!state_->connected) throw Error(ErrorCode::NotConnected, "loopback bus is not connected");
        id = state_->next_id++;
        state_->entries.emplace(id, entry);
    }
    std::weak_ptr<State> weak = state_;
    return Subscription([weak, id, entry] {
        {
            std::lock_guard lock(entry->mutex);
            entry->active = false;
        }
        if (auto state = weak.lock()) {
            std::lock_guard lock(state->mutex);
            state->entries.erase(id);
        }
    });
}

DeliveryReceipt publish(Bus& bus, const std::string& topic, const CommandMsg& msg) {
    return bus.publish(topic, serialize(msg));
}

std::int64_t unix_millis() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

CommandPublisher::CommandPublisher(Bus& bus, std::string source, std::string topic, Clock clock)
    : bus_(bus), source_(std::move(source)), topic_(std::move(topic)), clock_(std::move(clock)) {
    if (!clock_) clock_ = unix_millis;
}

DeliveryReceipt CommandPublisher::publish(CommandMsg msg) {
    // Holding the lock across the send keeps seq order equal to wire order.
    std::lock_guard lock(mutex_);
    if (!bus_.connected()) throw Error(ErrorCode::NotConnected, "bus is not connected");
    msg.source = source_;
    msg.seq = seq_.load() + 1;
    msg.ts_ms = clock_();
    auto receipt = bus::publish(bus_, topic_, msg);
    seq_.store(msg.seq);
    return receipt;
}

}  // namespace lsic::bus
