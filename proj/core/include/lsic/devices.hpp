// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsic/bus.hpp"

namespace lsic::devices {

enum class DeviceKind { Lights, Alarm, Tv, Fridge, Camera, Door, Fan, Speaker };

inline constexpr std::size_t kNumDeviceKinds = 8;
inline constexpr int kFanMinSpeed = 1;
inline constexpr int kFanMaxSpeed = 3;
inline constexpr int kFanDefaultSpeed = 2;
inline constexpr int kVolumeMin = 0;
inline constexpr int kVolumeMax = 10;
inline constexpr int kVolumeDefault = 5;

const std::vector<DeviceKind>& all_kinds();
std::string_view to_string(DeviceKind k);  // same as the object label
std::optional<DeviceKind> parse_kind(std::string_view object);

// speed is set only while a fan is powered; volume only while a speaker is.
struct DeviceState {
    DeviceKind kind = DeviceKind::Lights;
    bool power = false;   // unused for the door
    bool open = false;    // door only
    std::optional<int> speed;
    std::optional<int> volume;

    static DeviceState initial(DeviceKind k);
    bool operator==(const DeviceState&) const = default;

    // Device-specific fields, e.g. {"power":"on","speed":2}.
    std::string fields_json() const;
    bool within_bounds() const;
};

struct Effect {
    std::string actuator;   // "servo", "dc motor", ...
    std::string action;     // "open", "speed 3", "none"
    bool changed = false;
    std::optional<std::string> warning;

    std::string to_string() const;  // "servo -> open"
};

struct Transition {
    DeviceState state;
    Effect effect;
};

/// Pure transition. Throws WrongDevice when msg.object is not state.kind, and
/// MalformedRecord when the action does not apply to this kind.
Transition apply_command(const DeviceState& state, const bus::CommandMsg& msg);

struct NodeSnapshot {
    std::string device_id;
    DeviceState state;
    std::uint64_t last_seq = 0;
    std::size_t handled = 0;
    std::size_t ignored = 0;     // other devices' commands
    std::size_t duplicates = 0;  // (source, seq) already seen
};

struct FleetConfig {
    std::vector<DeviceKind> kinds = all_kinds();
    std::string command_topic = std::string(bus::kCommandTopic);
    std::string id_prefix = "node-";
    std::function<std::int64_t()> clock;  // defaults to unix millis
    std::function<void(const std::string& device_id, const Effect&)> on_effect;
};

std::string state_topic(std::string_view device_id);

// Builds the per-node transport, keyed by the node's client id. Returning
// the same shared bus for every node is fine for the loopback.
using BusFactory = std::function<std::shared_ptr<bus::Bus>(const std::string& client_id)>;

class Fleet {
public:
    ~Fleet();
    Fleet(const Fleet&) = delete;
    Fleet& operator=(const Fleet&) = delete;

    std::vector<NodeSnapshot> snapshot() const;
    std::optional<NodeSnapshot> node(std::string_view device_id) const;
    std::size_t size() const;
    void shutdown();
    bool running() const;

private:
    friend std::unique_ptr<Fleet> run_fleet(const BusFactory&, const FleetConfig&);
    Fleet() = default;

    struct Node;
    std::vector<std::unique_ptr<Node>> nodes_;
    bool running_ = false;
};

/// One node per kind, each subscribed to the command topic and publishing its
/// state at startup and after every handled command. Throws NotConnected.
std::unique_ptr<Fleet> run_fleet(const BusFactory& factory, const FleetConfig& cfg = {});
std::unique_ptr<Fleet> run_fleet(std::shared_ptr<bus::Bus> bus, const FleetConfig& cfg = {});

// Offline replay from the initial state; used for determinism checks.
std::map<DeviceKind, DeviceState> replay(const std::vector<bus::CommandMsg>& log);

}  // namespace lsic::devices
