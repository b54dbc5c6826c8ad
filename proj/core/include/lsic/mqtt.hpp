// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsic/bus.hpp"

namespace lsic::mqtt {

// MQTT 3.1.1 control packet types (high nibble of the fixed header).
enum class PacketType : std::uint8_t {
    Connect = 1,
    Connack = 2,
    Publish = 3,
    Puback = 4,
    Subscribe = 8,
    Suback = 9,
    Unsubscribe = 10,
    Unsuback = 11,
    Pingreq = 12,
    Pingresp = 13,
    Disconnect = 14,
};

using Bytes = std::vector<std::uint8_t>;

struct Packet {
    PacketType type = PacketType::Connect;
    std::uint8_t flags = 0;  // low nibble of the fixed header
    Bytes body;              // variable header + payload
};

void encode_remaining_length(std::size_t len, Bytes& out);
Bytes encode(const Packet& p);

// Pops one complete packet from the front of buf, if one is buffered.
// Throws ProtocolError on a malformed fixed header.
std::optional<Packet> try_decode(Bytes& buf);

struct ConnectParams {
    std::string client_id;
    std::uint16_t keepalive_s = 30;
    bool clean_session = true;
};

struct PublishPacket {
    std::string topic;
    std::string payload;
    int qos = 0;
    bool dup = false;
    std::uint16_t packet_id = 0;
};

Packet make_connect(const ConnectParams& c);
Packet make_connack(std::uint8_t return_code, bool session_present = false);
Packet make_publish(const PublishPacket& p);
Packet make_puback(std::uint16_t packet_id);
Packet make_subscribe(std::uint16_t packet_id, const std::string& filter, int qos);
Packet make_suback(std::uint16_t packet_id, std::uint8_t granted);
Packet make_unsubscribe(std::uint16_t packet_id, const std::string& filter);
Packet make_pingreq();
Packet make_pingresp();
Packet make_disconnect();

// Parsers throw ProtocolError on truncated or inconsistent bodies.
ConnectParams parse_connect(const Packet& p);
PublishPacket parse_publish(const Packet& p);
std::uint16_t parse_packet_id(const Packet& p);  // PUBACK, SUBACK, UNSUBACK, SUBSCRIBE
std::uint8_t parse_connack_code(const Packet& p);
std::pair<std::string, int> parse_subscribe_filter(const Packet& p);
std::uint8_t parse_suback_code(const Packet& p);

struct BrokerAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
};

/// Accepts "mqtt://host:port", "tcp://host:port", "host:port" or "host".
/// Throws ConfigInvalid.
BrokerAddress parse_broker_url(std::string_view url);

struct ClientOptions {
    BrokerAddress broker;
    std::string client_id = "lsic";
    std::uint16_t keepalive_s = 30;
    std::chrono::milliseconds connect_timeout{3000};
    std::chrono::milliseconds ack_timeout{3000};
};

// QoS 1 publisher/subscriber over a plain TCP socket. A reader thread owns
// the socket input; incoming PUBLISH messages are handed to a dispatcher
// thread so handlers may publish without stalling acknowledgements.
class MqttClient : public bus::Bus {
public:
    explicit MqttClient(ClientOptions opts);
    ~MqttClient() override;

    MqttClient(const MqttClient&) = delete;
    MqttClient& operator=(const MqttClient&) = delete;

    /// Throws NotConnected (unreachable broker, refused) or ProtocolError.
    void connect();
    void disconnect();

    bool connected() const override;
    bus::DeliveryReceipt publish(const std::string& topic, const std::string& payload) override;
    bus::Subscription subscribe(const std::string& filter, bus::Handler handler) override;

    const ClientOptions& options() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

}  // namespace lsic::mqtt
