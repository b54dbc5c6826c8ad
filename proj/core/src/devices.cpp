// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/devices.hpp"

#include <algorithm>
#include <mutex>

#include <nlohmann/json.hpp>

#include "lsic/error.hpp"

namespace lsic::devices {

using nlohmann::ordered_json;

const std::vector<DeviceKind>& all_kinds() {
    static const std::vector<DeviceKind> kinds = {DeviceKind::Lights, DeviceKind::Alarm,  DeviceKind::Tv,
                                                  DeviceKind::Fridge, DeviceKind::Camera, DeviceKind::Door,
                                                  DeviceKind::Fan,    DeviceKind::Speaker};
    return kinds;
}

std::string_view to_string(DeviceKind k) {
    switch (k) {
        case DeviceKind::Lights: return "lights";
        case DeviceKind::Alarm: return "alarm";
        case DeviceKind::Tv: return "tv";
        case DeviceKind::Fridge: return "fridge";
        case DeviceKind::Camera: return "camera";
        case DeviceKind::Door: return "door";
        case DeviceKind::Fan: return "fan";
        case DeviceKind::Speaker: return "speaker";
    }
    return "?";
}

std::optional<DeviceKind> parse_kind(std::string_view object) {
    for (auto k : all_kinds()) {
        if (to_string(k) == object) return k;
    }
    return std::nullopt;
}

namespace {

// Demo actuator wired to each device.
std::string_view actuator_of(DeviceKind k) {
    switch (k) {
        case DeviceKind::Lights: return "solar bulb";
        case DeviceKind::Alarm: return "buzzer";
        case DeviceKind::Tv: return "blue LED";
        case DeviceKind::Fridge: return "yellow LED";
        case DeviceKind::Camera: return "red LED";
        case DeviceKind::Door: return "servo";
        case DeviceKind::Fan: return "dc motor";
        case DeviceKind::Speaker: return "speaker";
    }
    return "?";
}

}  // namespace

DeviceState DeviceState::initial(DeviceKind k) {
    DeviceState s;
    s.kind = k;
    return s;
}

std::string DeviceState::fields_json() const {
    ordered_json j = ordered_json::object();
    if (kind == DeviceKind::Door) {
        j["position"] = open ? "open" : "closed";
    } else {
        j["power"] = power ? "on" : "off";
    }
    if (kind == DeviceKind::Fan && speed) j["speed"] = *speed;
    if (kind == DeviceKind::Speaker && volume) j["volume"] = *volume;
    return j.dump();
}

bool DeviceState::within_bounds() const {
    if (speed && (kind != DeviceKind::Fan || !power || *speed < kFanMinSpeed || *speed > kFanMaxSpeed)) return false;
    if (volume && (kind != DeviceKind::Speaker || !power || *volume < kVolumeMin || *volume > kVolumeMax)) {
        return false;
    }
    if (kind == DeviceKind::Fan && power && !speed) return false;
    if (kind == DeviceKind::Speaker && power && !volume) return false;
    if (kind != DeviceKind::Door && open) return false;
    return true;
}

std::string Effect::to_string() const {
    std::string s = actuator + " -> " + action;
    if (warning) s += " (warning: " + *warning + ")";
    return s;
}

Transition apply_command(const DeviceState& state, const bus::CommandMsg& msg) {
    const auto kind = parse_kind(msg.object);
    if (!kind || *kind != state.kind) {
        throw Error(ErrorCode::WrongDevice, "command for '" + msg.object + "' sent to " +
                                                std::string(to_string(state.kind)));
    }
    Transition t{state, {}};
    DeviceState& s = t.state;
    Effect& e = t.effect;
    e.actuator = std::string(actuator_of(state.kind));
    const std::string& a = msg.action;

    auto bad_action = [&] {
        throw Error(ErrorCode::MalformedRecord,
                    "action '" + a + "' does not apply to " + std::string(to_string(state.kind)));
    };

    if (state.kind == DeviceKind::Door) {
        if (a == "open") {
            s.open = true;
        } else if (a == "close") {
            s.open = false;
        } else {
            bad_action();
        }
        e.action = s.open ? "open" : "close";
    } else if (a == "on") {
        s.power = true;
        if (s.kind == DeviceKind::Fan && !s.speed) s.speed = kFanDefaultSpeed;
        if (s.kind == DeviceKind::Speaker && !s.volume) s.volume = kVolumeDefault;
        e.action = "on";
    } else if (a == "off") {
        s.power = false;
        s.speed.reset();
        s.volume.reset();
        e.action = "off";
    } else if (state.kind == DeviceKind::Fan && (a == "increase_speed" || a == "decrease_speed")) {
        if (!s.power) {
            e.action = "none";
            e.warning = "fan is off, speed unchanged";
        } else {
            const int step = a == "increase_speed" ? 1 : -1;
            s.speed = std::clamp(*s.speed + step, kFanMinSpeed, kFanMaxSpeed);
            e.action = "speed " + std::to_string(*s.speed);
        }
    } else if (state.kind == DeviceKind::Speaker && (a == "increase_volume" || a == "decrease_volume")) {
        if (!s.power) {
            e.action = "none";
            e.warning = "speaker is off, volume unchanged";
        } else {
            const int step = a == "increase_volume" ? 1 : -1;
            s.volume = std::clamp(*s.volume + step, kVolumeMin, kVolumeMax);
            e.action = "volume " + std::to_string(*s.volume);
        }
    } else {
        bad_action();
    }
    e.changed = !(s == state);
    return t;
}

std::string state_topic(std::string_view device_id) { return "devices/" + std::string(device_id) + "/state"; }

struct Fleet::Node {
    std::string id;
    DeviceKind kind;
    std::shared_ptr<bus::Bus> bus;
    std::function<std::int64_t()> clock;
    std::function<void(const std::string&, const Effect&)> on_effect;

    mutable std::mutex mutex;
    DeviceState state;
    std::uint64_t last_seq = 0;
    std::map<std::string, std::uint64_t> seen;  // source -> highest seq
    std::size_t handled = 0;
    std::size_t ignored = 0;
    std::size_t duplicates = 0;
    bus::Subscription sub;

    std::string state_payload() const {
        ordered_json j;
        j["device_id"] = id;
        j["kind"] = std::string(to_string(kind));
        j["fields"] = ordered_json::parse(state.fields_json());
        j["last_seq"] = last_seq;
        j["ts_ms"] = clock();
        return j.dump();
    }

    void publish_state() {
        std::string payload;
        {
            std::lock_guard lock(mutex);
            payload = state_payload();
        }
        try {
            bus->publish(state_topic(id), payload);
        } catch (const Error&) {
            // state reports are best effort
        }
    }

    void on_message(const std::string& payload) {
        bus::CommandMsg msg;
        try {
            msg = bus::parse_command(payload);
        } catch (const Error&) {
            return;
        }
        std::optional<Effect> effect;
        {
            std::lock_guard lock(mutex);
            if (msg.object != to_string(kind)) {
                ++ignored;
                return;
            }
            auto it = seen.find(msg.source);
            if (it != seen.end() && msg.seq <= it->second) {
                ++duplicates;
                return;
            }
            seen[msg.source] = msg.seq;
            try {
                auto t = apply_command(state, msg);
                state = t.state;
                effect = t.effect;
            } catch (const Error&) {
                ++ignored;
                return;
            }
            last_seq = msg.seq;
            ++handled;
        }
        if (on_effect && effect) on_effect(id, *effect);
        publish_state();
    }
};

Fleet::~Fleet() { shutdown(); }

std::vector<NodeSnapshot> Fleet::snapshot() const {
    std::vector<NodeSnapshot> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) {
        std::lock_guard lock(n->mutex);
        out.push_back({n->id, n->state, n->last_seq, n->handled, n->ignored, n->duplicates});
    }
    return out;
}

std::optional<NodeSnapshot> Fleet::node(std::string_view device_id) const {
    for (const auto& n : nodes_) {
        if (n->id == device_id) {
            std::lock_guard lock(n->mutex);
            return NodeSnapshot{n->id, n->state, n->last_seq, n->handled, n->ignored, n->duplicates};
        }
    }
    return std::nullopt;
}

std::size_t Fleet::size() const { return nodes_.size(); }

bool Fleet::running() const { return running_; }

void Fleet::shutdown() {
    for (auto& n : nodes_) n->sub.reset();
    running_ = false;
}

std::unique_ptr<Fleet> run_fleet(const BusFactory& factory, const FleetConfig& cfg) {
    std::unique_ptr<Fleet> fleet(new Fleet());
    auto clock = cfg.clock ? cfg.clock : std::function<std::int64_t()>(bus::unix_millis);
    for (auto kind : cfg.kinds) {
        auto node = std::make_unique<Fleet::Node>();
        node->id = cfg.id_prefix + std::string(to_string(kind));
        node->kind = kind;
        node->state = DeviceState::initial(kind);
        node->clock = clock;
        node->on_effect = cfg.on_effect;
        node->bus = factory(node->id);
        if (!node->bus || !node->bus->connected()) {
            throw Error(ErrorCode::NotConnected, "bus for " + node->id + " is not connected");
        }
        fleet->nodes_.push_back(std::move(node));
    }
    for (auto& node : fleet->nodes_) {
        Fleet::Node* raw = node.get();
        node->sub = node->bus->subscribe(cfg.command_topic,
                                         [raw](const std::string&, const std::string& p) { raw->on_message(p); });
    }
    fleet->running_ = true;
    for (auto& node : fleet->nodes_) node->publish_state();
    return fleet;
}

std::unique_ptr<Fleet> run_fleet(std::shared_ptr<bus::Bus> bus, const FleetConfig& cfg) {
    return run_fleet([bus](const std::string&) { return bus; }, cfg);
}

std::map<DeviceKind, DeviceState> replay(const std::vector<bus::CommandMsg>& log) {
    std::map<DeviceKind, DeviceState> states;
    for (auto k : all_kinds()) states.emplace(k, DeviceState::initial(k));
    for (const auto& msg : log) {
        const auto kind = parse_kind(msg.object);
        if (!kind) continue;
        states[*kind] = apply_command(states[*kind], msg).state;
    }
    return states;
}

}  // namespace lsic::devices
