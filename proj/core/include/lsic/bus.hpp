// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsic/nn/infer.hpp"

namespace lsic::bus {

inline constexpr std::string_view kCommandTopic = "rpi/broadcast";

struct CommandMsg {
    int v = 1;
    std::string intent;
    std::string action;
    std::string object;
    double confidence = 0.0;
    std::string source;
    std::uint64_t seq = 0;
    std::int64_t ts_ms = 0;

    bool operator==(const CommandMsg&) const = default;
};

// Canonical text form, fields in the order v, intent, action, object,
// confidence, source, seq, ts_ms.
std::string serialize(const CommandMsg& msg);
/// Throws MalformedRecord.
CommandMsg parse_command(std::string_view payload);

struct GateConfig {
    double threshold = 0.75;

    void validate() const;
};

enum class RejectReason { LowConfidence, InvalidPair };
std::string_view to_string(RejectReason r);

struct GateDecision {
    bool accepted = false;
    CommandMsg command;  // populated (minus source/seq/ts) when accepted
    RejectReason reason = RejectReason::LowConfidence;

    explicit operator bool() const { return accepted; }
};

/// Accepts when confidence >= threshold and (object, action) is a valid pair.
GateDecision gate(const nn::Prediction& p, const GateConfig& cfg = {});

/// MQTT-style filter match with '+' (one level) and '#' (trailing, any depth).
bool topic_matches(std::string_view filter, std::string_view topic);

using Handler = std::function<void(const std::string& topic, const std::string& payload)>;

// Move-only handle; destroying or resetting it stops deliveries.
class Subscription {
public:
    Subscription() = default;
    explicit Subscription(std::function<void()> cancel) : cancel_(std::move(cancel)) {}
    Subscription(Subscription&& other) noexcept : cancel_(std::move(other.cancel_)) { other.cancel_ = nullptr; }
    Subscription& operator=(Subscription&& other) noexcept {
        if (this != &other) {
            reset();
            cancel_ = std::move(other.cancel_);
            other.cancel_ = nullptr;
        }
        return *this;
    }
    Subscription(const Subscription&) = delete;
    Subscription& operator=(const Subscription&) = delete;
    ~Subscription() { reset(); }

    void reset() {
        if (cancel_) {
            auto cancel = std::move(cancel_);
            cancel_ = nullptr;
            cancel();
        }
    }
    bool active() const { return static_cast<bool>(cancel_); }

private:
    std::function<void()> cancel_;
};

struct DeliveryReceipt {
    std::string topic;
    std::size_t bytes = 0;
    std::size_t local_deliveries = 0;  // loopback: handlers invoked
    std::uint16_t packet_id = 0;       // MQTT QoS 1 packet id
    bool acknowledged = false;
};

// Publish/subscribe transport. Handlers for one subscription never run
// concurrently; publishers may be concurrent.
class Bus {
public:
    virtual ~Bus() = default;

    virtual bool connected() const = 0;
    /// Throws NotConnected, PublishTimeout.
    virtual DeliveryReceipt publish(const std::string& topic, const std::string& payload) = 0;
    /// Throws NotConnected.
    virtual Subscription subscribe(const std::string& filter, Handler handler) = 0;
};

// In-process bus. Delivery is synchronous on the publishing thread, so one
// publisher's messages reach every subscriber in publish order.
class LoopbackBus : public Bus {
public:
    LoopbackBus();
    ~LoopbackBus() override;

    void connect();
    void disconnect();

    bool connected() const override;
    DeliveryReceipt publish(const std::string& topic, const std::string& payload) override;
    Subscription subscribe(const std::string& filter, Handler handler) override;

    std::uint64_t published_count() const;

private:
    struct State;
    std::shared_ptr<State> state_;
};

/// Serializes msg and publishes it as-is.
DeliveryReceipt publish(Bus& bus, const std::string& topic, const CommandMsg& msg);

// Stamps source, a per-source increasing seq and ts_ms on every command.
class CommandPublisher {
public:
    using Clock = std::function<std::int64_t()>;

    CommandPublisher(Bus& bus, std::string source, std::string topic = std::string(kCommandTopic),
                     Clock clock = {});

    DeliveryReceipt publish(CommandMsg msg);
    const std::string& source() const { return source_; }
    const std::string& topic() const { return topic_; }
    std::uint64_t last_seq() const { return seq_.load(); }

private:
    Bus& bus_;
    std::string source_;
    std::string topic_;
    Clock clock_;
    std::mutex mutex_;
    std::atomic<std::uint64_t> seq_{0};
};

std::int64_t unix_millis();

}  // namespace lsic::bus
