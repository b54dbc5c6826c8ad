// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/mqtt.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fcntl.h>
#include <map>
#include <mutex>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <thread>

#include "lsic/error.hpp"

namespace lsic::mqtt {
namespace {

[[noreturn]] void protocol_error(const std::string& what) { throw Error(ErrorCode::ProtocolError, what); }

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put_str(Bytes& out, std::string_view s) {
    if (s.size() > 0xffff) protocol_error("string field longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(const Bytes& b) : b_(b) {}
    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::string str() {
        const std::size_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::string rest() {
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), b_.size() - pos_);
        pos_ = b_.size();
        return s;
    }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) protocol_error("truncated packet body");
    }
    const Bytes& b_;
    std::size_t pos_ = 0;
};

Packet packet(PacketType t, std::uint8_t flags, Bytes body = {}) {
    Packet p;
    p.type = t;
    p.flags = flags;
    p.body = std::move(body);
    return p;
}

void expect(const Packet& p, PacketType t) {
    if (p.type != t) protocol_error("unexpected packet type " + std::to_string(static_cast<int>(p.type)));
}

}  // namespace

void encode_remaining_length(std::size_t len, Bytes& out) {
    if (len > 268435455) protocol_error("remaining length exceeds 268435455");
    do {
        std::uint8_t byte = len % 128;
        len /= 128;
        if (len > 0) byte |= 0x80;
        out.push_back(byte);
    } while (len > 0);
}

Bytes encode(const Packet& p) {
    Bytes out;
    out.reserve(p.body.size() + 5);
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint8_t>(p.type) << 4) | (p.flags & 0x0f)));
    encode_remaining_length(p.body.size(), out);
    out.insert(out.end(), p.body.begin(), p.body.end());
    return out;
}

std::optional<Packet> try_decode(Bytes& buf) {
    if (buf.size() < 2) return std::nullopt;
    std::size_t len = 0;
    std::size_t mult = 1;
    std::size_t i = 1;
    while (true) {
        if (i >= buf.size()) return std::nullopt;
        if (i > 4) protocol_error("remaining length longer than 4 bytes");
        const std::uint8_t b = buf[i++];
        len += (b & 0x7f) * mult;
        if ((b & 0x80) == 0) break;
        mult *= 128;
    }
    if (buf.size() - i < len) return std::nullopt;
    const std::uint8_t type = buf[0] >> 4;
    if (type == 0 || type == 15) protocol_error("reserved packet type " + std::to_string(type));
    Packet p;
    p.type = static_cast<PacketType>(type);
    p.flags = buf[0] & 0x0f;
    p.body.assign(buf.begin() + static_cast<std::ptrdiff_t>(i), buf.begin() + static_cast<std::ptrdiff_t>(i + len));
    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(i + len));
    return p;
}

Packet make_connect(const ConnectParams& c) {
    Bytes body;
    put_str(body, "MQTT");
    body.push_back(4);  // protocol level 3.1.1
    body.push_back(c.clean_session ? 0x02 : 0x00);
    put_u16(body, c.keepalive_s);
    put_str(body, c.client_id);
    return packet(PacketType::Connect, 0, std::move(body));
}

Packet make_connack(std::uint8_t return_code, bool session_present) {
    return packet(PacketType::Connack, 0, {static_cast<std::uint8_t>(session_present ? 1 : 0), return_code});
}

Packet make_publish(const PublishPacket& p) {
    if (p.qos < 0 || p.qos > 1) protocol_error("only QoS 0 and 1 are supported");
    Bytes body;
    put_str(body, p.topic);
    if (p.qos > 0) put_u16(body, p.packet_id);
    body.insert(body.end(), p.payload.begin(), p.payload.end());
    const std::uint8_t flags = static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1));
    return packet(PacketType::Publish, flags, std::move(body));
}

Packet make_puback(std::uint16_t id) {
    Bytes body;
    put_u16(body, id);
    return packet(PacketType::Puback, 0, std::move(body));
}

Packet make_subscribe(std::uint16_t id, const std::string& filter, int qos) {
    Bytes body;
    put_u16(body, id);
    put_str(body, filter);
    body.push_back(static_cast<std::uint8_t>(qos));
    return packet(PacketType::Subscribe, 0x02, std::move(body));
}

Packet make_suback(std::uint16_t id, std::uint8_t granted) {
    Bytes body;
    put_u16(body, id);
    body.push_back(granted);
    return packet(PacketType::Suback, 0, std::move(body));
}

Packet make_unsubscribe(std::uint16_t id, const std::string& filter) {
    Bytes body;
    put_u16(body, id);
    put_str(body, filter);
    return packet(PacketType::Unsubscribe, 0x02, std::move(body));
}

Packet make_pingreq() { return packet(PacketType::Pingreq, 0); }
Packet make_pingresp() { return packet(PacketType::Pingresp, 0); }
Packet make_disconnect() { return packet(PacketType::Disconnect, 0); }

ConnectParams parse_connect(const Packet& p) {
    expect(p, PacketType::Connect);
    Reader r(p.body);
    if (r.str() != "MQTT") protocol_error("bad protocol name");
    if (r.u8() != 4) protocol_error("unsupported protocol level");
    const std::uint8_t flags = r.u8();
    ConnectParams c;
    c.clean_session = (flags & 0x02) != 0;
    c.keepalive_s = r.u16();
    c.client_id = r.str();
    return c;
}

PublishPacket parse_publish(const Packet& p) {
    expect(p, PacketType::Publish);
    Reader r(p.body);
    PublishPacket out;
    out.dup = (p.flags & 0x08) != 0;
    out.qos = (p.flags >> 1) & 0x03;
    if (out.qos > 2) protocol_error("invalid QoS 3");
    out.topic = r.str();
    if (out.qos > 0) out.packet_id = r.u16();
    out.payload = r.rest();
    return out;
}

std::uint16_t parse_packet_id(const Packet& p) {
    Reader r(p.body);
    return r.u16();
}

std::uint8_t parse_connack_code(const Packet& p) {
    expect(p, PacketType::Connack);
    Reader r(p.body);
    r.u8();
    return r.u8();
}

std::pair<std::string, int> parse_subscribe_filter(const Packet& p) {
    expect(p, PacketType::Subscribe);
    Reader r(p.body);
    r.u16();
    std::string filter = r.str();
    const int qos = r.u8();
    return {std::move(filter), qos};
}

std::uint8_t parse_suback_code(const Packet& p) {
    expect(p, PacketType::Suback);
    Reader r(p.body);
    r.u16();
    return r.u8();
}

BrokerAddress parse_broker_url(std::string_view url) {
    BrokerAddress addr;
    for (std::string_view scheme : {"mqtt://", "tcp://"}) {
        if (url.substr(0, scheme.size()) == scheme) {
            url.remove_prefix(scheme.size());
            break;
        }
    }
    if (url.find("://") != std::string_view::npos) {
        throw Error(ErrorCode::ConfigInvalid, "unsupported broker scheme in '" + std::string(url) + "'");
    }
    while (!url.empty() && url.back() == '/') url.remove_suffix(1);
    if (url.empty()) throw Error(ErrorCode::ConfigInvalid, "empty broker address");
    const auto colon = url.rfind(':');
    if (colon == std::string_view::npos) {
        addr.host = std::string(url);
        return addr;
    }
    addr.host = std::string(url.substr(0, colon));
    const auto port_text = url.substr(colon + 1);
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535 ||
        addr.host.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "bad broker address '" + std::string(url) + "'");
    }
    addr.port = static_cast<std::uint16_t>(port);
    return addr;
}

struct MqttClient::Impl {
    struct Entry {
        std::string filter;
        bus::Handler handler;
        std::recursive_mutex mutex;
        bool active = true;
    };

    ClientOptions opts;
    int fd = -1;
    std::atomic<bool> connected{false};
    std::atomic<bool> running{false};

    std::mutex send_mutex;
    std::atomic<std::int64_t> last_send_ms{0};

    std::mutex mutex;
    std::condition_variable cv;
    std::optional<std::uint8_t> connack;
    std::map<std::uint16_t, bool> pending;
    std::map<std::uint16_t, std::uint8_t> subacks;
    std::uint16_t next_id = 0;
    std::map<std::uint64_t, std::shared_ptr<Entry>> entries;
    std::uint64_t next_entry = 1;

    std::mutex queue_mutex;
    std::condition_variable queue_cv;
    std::deque<std::pair<std::string, std::string>> queue;
    bool stop_dispatch = false;

    std::thread reader;
    std::thread dispatcher;

    static std::int64_t now_ms() {
        using namespace std::chrono;
        return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
    }

    void send(const Packet& p) {
        const Bytes bytes = encode(p);
        std::lock_guard lock(send_mutex);
        if (fd < 0) throw Error(ErrorCode::NotConnected, "mqtt socket closed");
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::NotConnected, std::string("mqtt send failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
        last_send_ms = now_ms();
    }

    std::uint16_t allocate_id() {
        // caller holds mutex
        do {
            ++next_id;
        } while (next_id == 0 || pending.count(next_id) || subacks.count(next_id));
        return next_id;
    }

    void mark_lost() {
        connected = false;
        cv.notify_all();
    }

    void handle(const Packet& p) {
        switch (p.type) {
            case PacketType::Connack: {
                std::lock_guard lock(mutex);
                connack = parse_connack_code(p);
                cv.notify_all();
                break;
            }
            case PacketType::Puback: {
                std::lock_guard lock(mutex);
                auto it = pending.find(parse_packet_id(p));
                if (it != pending.end()) it->second = true;
                cv.notify_all();
                break;
            }
            case PacketType::Suback: {
                std::lock_guard lock(mutex);
                Reader r(p.body);
                const std::uint16_t id = r.u16();
                subacks[id] = r.u8();
                cv.notify_all();
                break;
            }
            case PacketType::Publish: {
                auto msg = parse_publish(p);
                if (msg.qos == 1) send(make_puback(msg.packet_id));
                {
                    std::lock_guard lock(queue_mutex);
                    queue.emplace_back(std::move(msg.topic), std::move(msg.payload));
                }
                queue_cv.notify_one();
                break;
            }
            case PacketType::Pingresp:
            case PacketType::Unsuback:
                break;
            default:
                protocol_error("unexpected packet from broker");
        }
    }

    void read_loop() {
        Bytes buf;
        std::uint8_t chunk[4096];
        const std::int64_t ping_every = std::max<std::int64_t>(1, opts.keepalive_s) * 1000 / 2;
        while (running) {
            pollfd pfd{fd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, 50);
            if (rc < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (rc > 0) {
                const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
                if (n <= 0) {
                    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
                    break;
                }
                buf.insert(buf.end(), chunk, chunk + n);
                try {
                    while (auto p = try_decode(buf)) handle(*p);
                } catch (const Error&) {
                    break;
                }
            }
            if (connected && opts.keepalive_s > 0 && now_ms() - last_send_ms >= ping_every) {
                try {
                    send(make_pingreq());
                } catch (const Error&) {
                    break;
                }
            }
        }
        mark_lost();
    }

    void dispatch_loop() {
        while (true) {
            std::pair<std::string, std::string> msg;
            {
                std::unique_lock lock(queue_mutex);
                queue_cv.wait(lock, [&] { return stop_dispatch || !queue.empty(); });
                if (queue.empty()) return;
                msg = std::move(queue.front());
                queue.pop_front();
            }
            std::vector<std::shared_ptr<Entry>> targets;
            {
                std::lock_guard lock(mutex);
                for (const auto& [id, e] : entries) {
                    if (bus::topic_matches(e->filter, msg.first)) targets.push_back(e);
                }
            }
            for (const auto& e : targets) {
                std::lock_guard lock(e->mutex);
                if (!e->active) continue;
                try {
                    e->handler(msg.first, msg.second);
                } catch (...) {
                    // a faulty handler must not take down the connection
                }
            }
        }
    }

    void close_socket() {
        std::lock_guard lock(send_mutex);
        if (fd >= 0) {
            ::close(fd);
            fd = -1;
        }
    }

    void shutdown() {
        if (connected) {
            try {
                send(make_disconnect());
            } catch (const Error&) {
            }
        }
        running = false;
        {
            std::lock_guard lock(send_mutex);
            if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        }
        if (reader.joinable() && reader.get_id() != std::this_thread::get_id()) reader.join();
        {
            std::lock_guard lock(queue_mutex);
            stop_dispatch = true;
        }
        queue_cv.notify_all();
        if (dispatcher.joinable() && dispatcher.get_id() != std::this_thread::get_id()) dispatcher.join();
        close_socket();
        mark_lost();
    }
};

namespace {

int open_socket(const BrokerAddress& addr, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(addr.port);
    if (int rc = ::getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw Error(ErrorCode::NotConnected,
                    "cannot resolve broker " + addr.host + ": " + ::gai_strerror(rc));
    }
    std::string last_error = "no addresses";
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        const int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof(err);
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                rc = -1;
                errno = ETIMEDOUT;
            }
        }
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            break;
        }
        last_error = std::strerror(errno);
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        throw Error(ErrorCode::NotConnected, "cannot connect to broker " + addr.host + ":" +
                                                 std::to_string(addr.port) + ": " + last_error);
    }
    return fd;
}

}  // namespace

MqttClient::MqttClient(ClientOptions opts) : impl_(std::make_shared<Impl>()) { impl_->opts = std::move(opts); }

MqttClient::~MqttClient() { disconnect(); }

const ClientOptions& MqttClient::options() const { return impl_->opts; }

bool MqttClient::connected() const { return impl_->connected; }

void MqttClient::connect() {
    auto& s = *impl_;
    if (s.connected) return;
    s.shutdown();
    s.connack.reset();
    s.stop_dispatch = false;
    s.fd = open_socket(s.opts.broker, s.opts.connect_timeout);
    s.running = true;
    s.reader = std::thread([&s] { s.read_loop(); });
    try {
        s.send(make_connect({s.opts.client_id, s.opts.keepalive_s, true}));
    } catch (...) {
        s.shutdown();
        throw;
    }
    std::uint8_t code = 0xff;
    {
        std::unique_lock lock(s.mutex);
        const bool got = s.cv.wait_for(lock, s.opts.connect_timeout,
                                       [&] { return s.connack.has_value() || !s.running; });
        if (got && s.connack) code = *s.connack;
    }
    if (code != 0) {
        s.shutdown();
        if (code == 0xff) throw Error(ErrorCode::NotConnected, "no CONNACK from broker");
        throw Error(ErrorCode::NotConnected, "broker refused connection, code " + std::to_string(code));
    }
    s.connected = true;
    s.dispatcher = std::thread([&s] { s.dispatch_loop(); });
}

void MqttClient::disconnect() { impl_->shutdown(); }

bus::DeliveryReceipt MqttClient::publish(const std::string& topic, const std::string& payload) {
    auto& s = *impl_;
    if (!s.connected) throw Error(ErrorCode::NotConnected, "mqtt client is not connected");
    std::uint16_t id = 0;
    {
        std::lock_guard lock(s.mutex);
        id = s.allocate_id();
        s.pending[id] = false;
    }
    PublishPacket p{topic, payload, 1, false, id};
    auto wait_ack = [&](std::chrono::milliseconds t) {
        std::unique_lock lock(s.mutex);
        return s.cv.wait_for(lock, t, [&] { return s.pending[id] || !s.connected; }) && s.pending[id];
    };
    bool acked = false;
    try {
        s.send(make_publish(p));
        acked = wait_ack(s.opts.ack_timeout / 2);
        if (!acked && s.connected) {
            p.dup = true;
            s.send(make_publish(p));
            acked = wait_ack(s.opts.ack_timeout - s.opts.ack_timeout / 2);
        }
    } catch (...) {
        std::lock_guard lock(s.mutex);
        s.pending.erase(id);
        throw;
    }
    {
        std::lock_guard lock(s.mutex);
        s.pending.erase(id);
    }
    if (!acked) {
        if (!s.connected) throw Error(ErrorCode::NotConnected, "connection lost before PUBACK");
        throw Error(ErrorCode::PublishTimeout, "no PUBACK for packet " + std::to_string(id) + " on " + topic);
    }
    bus::DeliveryReceipt r;
    r.topic = topic;
    r.bytes = payload.size();
    r.packet_id = id;
    r.acknowledged = true;
    return r;
}

bus::Subscription MqttClient::subscribe(const std::string& filter, bus::Handler handler) {
    auto& s = *impl_;
    if (!s.connected) throw Error(ErrorCode::NotConnected, "mqtt client is not connected");
    auto entry = std::make_shared<Impl::Entry>();
    entry->filter = filter;
    entry->handler = std::move(handler);
    std::uint64_t entry_id = 0;
    std::uint16_t id = 0;
    {
        std::lock_guard lock(s.mutex);
        entry_id = s.next_entry++;
        s.entries.emplace(entry_id, entry);
        id = s.allocate_id();
        s.subacks.erase(id);
    }
    auto drop = [&] {
        std::lock_guard lock(s.mutex);
        s.entries.erase(entry_id);
        s.subacks.erase(id);
    };
    std::optional<std::uint8_t> code;
    try {
        s.send(make_subscribe(id, filter, 1));
        std::unique_lock lock(s.mutex);
        s.cv.wait_for(lock, s.opts.ack_timeout, [&] { return s.subacks.count(id) || !s.connected; });
        if (auto it = s.subacks.find(id); it != s.subacks.end()) code = it->second;
    } catch (...) {
        drop();
        throw;
    }
    if (!code) {
        drop();
        if (!s.connected) throw Error(ErrorCode::NotConnected, "connection lost before SUBACK");
        throw Error(ErrorCode::PublishTimeout, "no SUBACK for " + filter);
    }
    {
        std::lock_guard lock(s.mutex);
        s.subacks.erase(id);
    }
    if (*code == 0x80) {
        drop();
        throw Error(ErrorCode::ProtocolError, "broker rejected subscription to " + filter);
    }
    std::weak_ptr<Impl> weak = impl_;
    return bus::Subscription([weak, entry_id, entry] {
        {
            std::lock_guard lock(entry->mutex);
            entry->active = false;
        }
        auto impl = weak.lock();
        if (!impl) return;
        bool last = true;
        std::uint16_t unsub_id = 0;
        {
            std::lock_guard lock(impl->mutex);
            impl->entries.erase(entry_id);
            for (const auto& [eid, e] : impl->entries) {
                if (e->filter == entry->filter) last = false;
            }
            if (last) unsub_id = impl->allocate_id();
        }
        if (last && impl->connected) {
            try {
                impl->send(make_unsubscribe(unsub_id, entry->filter));
            } catch (const Error&) {
            }
        }
    });
}

}  // namespace lsic::mqtt
