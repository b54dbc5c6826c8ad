// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <chrono>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fake_broker.hpp"
#include "lsic/bus.hpp"
#include "lsic/devices.hpp"
#include "lsic/error.hpp"
#include "lsic/labels.hpp"
#include "lsic/mqtt.hpp"

namespace {

using namespace lsic::devices;
using lsic::bus::CommandMsg;
using namespace std::chrono_literals;

CommandMsg cmd(const std::string& object, const std::string& action, std::uint64_t seq = 1,
               const std::string& source = "hub") {
    CommandMsg m;
    m.intent = object + "_" + action;
    m.object = object;
    m.action = action;
    m.confidence = 0.9;
    m.source = source;
    m.seq = seq;
    return m;
}

TEST(DeviceState, Initial) {
    EXPECT_EQ(all_kinds().size(), kNumDeviceKinds);
    for (auto k : all_kinds()) {
        auto s = DeviceState::initial(k);
        EXPECT_FALSE(s.power);
        EXPECT_FALSE(s.open);
        EXPECT_FALSE(s.speed);
        EXPECT_FALSE(s.volume);
        EXPECT_TRUE(s.within_bounds());
        EXPECT_EQ(parse_kind(to_string(k)), k);
    }
    EXPECT_FALSE(parse_kind("toaster"));
    EXPECT_EQ(DeviceState::initial(DeviceKind::Door).fields_json(), R"({"position":"closed"})");
    EXPECT_EQ(DeviceState::initial(DeviceKind::Fan).fields_json(), R"({"power":"off"})");
}

TEST(ApplyCommand, DoorOpens) {
    auto t = apply_command(DeviceState::initial(DeviceKind::Door), cmd("door", "open"));
    EXPECT_TRUE(t.state.open);
    EXPECT_TRUE(t.effect.changed);
    EXPECT_EQ(t.effect.to_string(), "servo -> open");
    auto back = apply_command(t.state, cmd("door", "close"));
    EXPECT_FALSE(back.state.open);
}

TEST(ApplyCommand, IdempotentOff) {
    auto s = DeviceState::initial(DeviceKind::Lights);
    auto t = apply_command(s, cmd("lights", "off"));
    EXPECT_EQ(t.state, s);
    EXPECT_FALSE(t.effect.changed);
    EXPECT_FALSE(t.effect.warning);
    auto on = apply_command(s, cmd("lights", "on")).state;
    EXPECT_EQ(apply_command(on, cmd("lights", "on")).state, on);
}

TEST(ApplyCommand, FanAdjustWhileOffWarns) {
    auto s = DeviceState::initial(DeviceKind::Fan);
    auto t = apply_command(s, cmd("fan", "increase_speed"));
    EXPECT_EQ(t.state, s);
    EXPECT_FALSE(t.effect.changed);
    ASSERT_TRUE(t.effect.warning);
    EXPECT_EQ(t.effect.action, "none");
}

TEST(ApplyCommand, FanSpeedClamps) {
    auto s = apply_command(DeviceState::initial(DeviceKind::Fan), cmd("fan", "on")).state;
    EXPECT_EQ(s.speed, kFanDefaultSpeed);
    s = apply_command(s, cmd("fan", "increase_speed")).state;
    EXPECT_EQ(s.speed, 3);
    auto t = apply_command(s, cmd("fan", "increase_speed"));
    EXPECT_EQ(t.state.speed, 3);
    EXPECT_FALSE(t.effect.changed);
    for (int i = 0; i < 5; ++i) s = apply_command(s, cmd("fan", "decrease_speed")).state;
    EXPECT_EQ(s.speed, 1);
    EXPECT_EQ(apply_command(s, cmd("fan", "increase_speed")).effect.to_string(), "dc motor -> speed 2");
    s = apply_command(s, cmd("fan", "off")).state;
    EXPECT_FALSE(s.speed);
    EXPECT_EQ(apply_command(s, cmd("fan", "on")).state.speed, kFanDefaultSpeed);
}

TEST(ApplyCommand, SpeakerVolumeClamps) {
    auto s = apply_command(DeviceState::initial(DeviceKind::Speaker), cmd("speaker", "on")).state;
    EXPECT_EQ(s.volume, kVolumeDefault);
    for (int i = 0; i < 20; ++i) s = apply_command(s, cmd("speaker", "increase_volume")).state;
    EXPECT_EQ(s.volume, kVolumeMax);
    for (int i = 0; i < 20; ++i) s = apply_command(s, cmd("speaker", "decrease_volume")).state;
    EXPECT_EQ(s.volume, kVolumeMin);
    EXPECT_EQ(s.fields_json(), R"({"power":"on","volume":0})");
}

TEST(ApplyCommand, Errors) {
    try {
        apply_command(DeviceState::initial(DeviceKind::Tv), cmd("lights", "on"));
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::WrongDevice);
    }
    EXPECT_THROW(apply_command(DeviceState::initial(DeviceKind::Lights), cmd("lights", "open")), lsic::Error);
    EXPECT_THROW(apply_command(DeviceState::initial(DeviceKind::Door), cmd("door", "on")), lsic::Error);
    EXPECT_THROW(apply_command(DeviceState::initial(DeviceKind::Tv), cmd("tv", "increase_volume")), lsic::Error);
}

TEST(ApplyCommand, Actuators) {
    const std::map<std::string, std::string> expect{{"lights", "solar bulb"}, {"alarm", "buzzer"},
                                                    {"tv", "blue LED"},       {"fridge", "yellow LED"},
                                                    {"camera", "red LED"},    {"door", "servo"},
                                                    {"fan", "dc motor"},      {"speaker", "speaker"}};
    for (auto k : all_kinds()) {
        const std::string obj(to_string(k));
        const std::string action = k == DeviceKind::Door ? "open" : "on";
        EXPECT_EQ(apply_command(DeviceState::initial(k), cmd(obj, action)).effect.actuator, expect.at(obj));
    }
}

std::vector<CommandMsg> random_log(std::mt19937_64& rng, std::size_t n) {
    const auto& maps = lsic::LabelMaps::standard();
    std::uniform_int_distribution<int> pick(0, 19);
    std::vector<CommandMsg> log;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = pick(rng);
        log.push_back(cmd(maps.objects()[static_cast<std::size_t>(maps.object_of(k))],
                          maps.actions()[static_cast<std::size_t>(maps.action_of(k))], i + 1));
    }
    return log;
}

TEST(Replay, DeterministicAndBounded) {
    std::mt19937_64 rng(2026);
    for (int trial = 0; trial < 1000; ++trial) {
        auto log = random_log(rng, 1 + static_cast<std::size_t>(trial % 50));
        auto a = replay(log);
        auto b = replay(log);
        ASSERT_EQ(a, b) << trial;
        ASSERT_EQ(a.size(), kNumDeviceKinds);
        for (const auto& [k, s] : a) ASSERT_TRUE(s.within_bounds()) << trial;
        // Every intermediate state also respects the bounds.
        auto s = DeviceState::initial(DeviceKind::Fan);
        for (const auto& m : log) {
            if (m.object != "fan") continue;
            s = apply_command(s, m).state;
            ASSERT_TRUE(s.within_bounds());
        }
    }
}

TEST(Fleet, InitialStatesAndRouting) {
    auto bus = std::make_shared<lsic::bus::LoopbackBus>();
    bus->connect();
    std::vector<std::pair<std::string, std::string>> states;
    auto watch = bus->subscribe("devices/+/state", [&](const std::string& t, const std::string& p) {
        states.emplace_back(t, p);
    });
    std::vector<std::string> effects;
    FleetConfig cfg;
    cfg.clock = [] { return std::int64_t{42}; };
    cfg.on_effect = [&](const std::string& id, const Effect& e) { effects.push_back(id + ":" + e.to_string()); };
    auto fleet = run_fleet(bus, cfg);
    EXPECT_TRUE(fleet->running());
    ASSERT_EQ(fleet->size(), 8u);
    ASSERT_EQ(states.size(), 8u);
    std::set<std::string> ids;
    for (const auto& s : fleet->snapshot()) ids.insert(s.device_id);
    EXPECT_EQ(ids.size(), 8u);
    auto first = nlohmann::json::parse(states[0].second);
    EXPECT_EQ(states[0].first, "devices/node-lights/state");
    EXPECT_EQ(first["device_id"], "node-lights");
    EXPECT_EQ(first["kind"], "lights");
    EXPECT_EQ(first["fields"]["power"], "off");
    EXPECT_EQ(first["last_seq"], 0);
    EXPECT_EQ(first["ts_ms"], 42);

    lsic::bus::publish(*bus, std::string(lsic::bus::kCommandTopic), cmd("lights", "on", 1));
    EXPECT_EQ(states.size(), 9u);
    EXPECT_EQ(states.back().first, "devices/node-lights/state");
    EXPECT_EQ(effects, std::vector<std::string>{"node-lights:solar bulb -> on"});
    for (const auto& s : fleet->snapshot()) {
        if (s.device_id == "node-lights") {
            EXPECT_TRUE(s.state.power);
            EXPECT_EQ(s.handled, 1u);
            EXPECT_EQ(s.last_seq, 1u);
        } else {
            EXPECT_EQ(s.state, DeviceState::initial(s.state.kind));
            EXPECT_EQ(s.ignored, 1u);
        }
    }
    fleet->shutdown();
    EXPECT_FALSE(fleet->running());
    lsic::bus::publish(*bus, std::string(lsic::bus::kCommandTopic), cmd("lights", "off", 2));
    EXPECT_TRUE(fleet->node("node-lights")->state.power);
}

TEST(Fleet, DeduplicatesBySourceAndSeq) {
    auto bus = std::make_shared<lsic::bus::LoopbackBus>();
    bus->connect();
    auto fleet = run_fleet(bus);
    const std::string topic(lsic::bus::kCommandTopic);
    lsic::bus::publish(*bus, topic, cmd("fan", "on", 1));
    lsic::bus::publish(*bus, topic, cmd("fan", "increase_speed", 2));
    lsic::bus::publish(*bus, topic, cmd("fan", "increase_speed", 2));  // duplicate
    lsic::bus::publish(*bus, topic, cmd("fan", "decrease_speed", 1));  // stale
    lsic::bus::publish(*bus, topic, cmd("fan", "decrease_speed", 1, "other-hub"));
    auto fan = fleet->node("node-fan");
    ASSERT_TRUE(fan);
    EXPECT_EQ(fan->duplicates, 2u);
    EXPECT_EQ(fan->handled, 3u);
    EXPECT_EQ(fan->state.speed, 2);
    EXPECT_FALSE(fleet->node("node-toaster"));
}

TEST(Fleet, NotConnected) {
    auto bus = std::make_shared<lsic::bus::LoopbackBus>();
    try {
        run_fleet(bus);
        FAIL();
    } catch (const lsic::Error& e) {
        EXPECT_EQ(e.code(), lsic::ErrorCode::NotConnected);
    }
}

TEST(Fleet, OverMqttWithDuplicateDelivery) {
    lsic::testing::FakeBroker broker({.duplicate_deliveries = true});
    auto make = [&](const std::string& id) {
        lsic::mqtt::ClientOptions o;
        o.broker = lsic::mqtt::parse_broker_url(broker.url());
        o.client_id = id;
        auto c = std::make_shared<lsic::mqtt::MqttClient>(o);
        c->connect();
        return c;
    };
    auto fleet = run_fleet([&](const std::string& id) -> std::shared_ptr<lsic::bus::Bus> { return make(id); });
    auto ids = broker.client_ids();
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 8u);

    auto hub = make("hub");
    lsic::bus::CommandPublisher pub(*hub, "hub");
    pub.publish(cmd("door", "open"));
    pub.publish(cmd("speaker", "on"));
    pub.publish(cmd("speaker", "increase_volume"));
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    while (std::chrono::steady_clock::now() < deadline) {
        auto sp = fleet->node("node-speaker");
        if (sp->duplicates >= 2 && sp->handled == 2) break;
        std::this_thread::sleep_for(10ms);
    }
    auto door = fleet->node("node-door");
    auto speaker = fleet->node("node-speaker");
    EXPECT_TRUE(door->state.open);
    EXPECT_EQ(door->handled, 1u);
    EXPECT_EQ(door->duplicates, 1u);
    EXPECT_EQ(speaker->state.volume, 6);
    EXPECT_EQ(speaker->handled, 2u);
    EXPECT_EQ(speaker->duplicates, 2u);
    fleet->shutdown();
}

}  // namespace
