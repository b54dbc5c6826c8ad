// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lsic/audio.hpp"
#include "lsic/bus.hpp"
#include "lsic/nn/infer.hpp"

namespace lsic::serve {

struct ClipOutcome {
    std::string source_id;
    nn::Prediction prediction;
    bus::GateDecision decision;
    std::optional<bus::DeliveryReceipt> receipt;  // set when published
    std::optional<std::string> error;             // ingest or publish failure
    std::uint64_t seq = 0;
    double latency_ms = 0.0;                      // predict + gate + publish

    // {"source":..,"intent":..,"confidence":..,"accepted":..,"reason"?:..,"seq"?:..}
    std::string to_record() const;
};

/// predict -> gate -> publish on accept. A rejected clip publishes nothing.
ClipOutcome process_clip(const nn::InferenceSession& session, const AudioClip& clip,
                         const bus::GateConfig& gate_cfg, bus::CommandPublisher& publisher);

// Minimal blocking FIFO; close() wakes consumers once it drains.
template <typename T>
class Channel {
public:
    explicit Channel(std::size_t capacity = 8) : capacity_(capacity) {}

    bool push(T value) {
        std::unique_lock lock(m_);
        not_full_.wait(lock, [&] { return closed_ || q_.size() < capacity_; });
        if (closed_) return false;
        q_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(m_);
        not_empty_.wait(lock, [&] { return closed_ || !q_.empty(); });
        if (q_.empty()) return std::nullopt;
        T v = std::move(q_.front());
        q_.pop_front();
        not_full_.notify_one();
        return v;
    }

    void close() {
        std::lock_guard lock(m_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::size_t capacity_;
    std::mutex m_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> q_;
    bool closed_ = false;
};

// An ingested item: a decoded clip or the reason it could not be read.
struct Ingested {
    std::string source_id;
    std::optional<AudioClip> clip;
    std::string error;
};

// Yields WAV paths; returns nullopt when input is exhausted.
using PathSource = std::function<std::optional<std::filesystem::path>()>;

PathSource file_list_source(std::vector<std::filesystem::path> files);

struct WatchOptions {
    std::chrono::milliseconds poll{200};
    std::size_t max_files = 0;                 // 0: unlimited
    std::chrono::milliseconds idle_timeout{0};  // 0: wait forever
    std::function<bool()> stop_requested;
};

// Polls dir for new *.wav files, oldest name first; each file is yielded once.
PathSource directory_source(std::filesystem::path dir, WatchOptions opts);

// ingest thread -> inference thread -> publisher thread. One clip is in
// inference at a time and outcomes are emitted in ingest order.
void run_pipeline(const PathSource& source, const nn::InferenceSession& session, const bus::GateConfig& gate_cfg,
                  bus::CommandPublisher& publisher, const std::function<void(const ClipOutcome&)>& on_outcome);

}  // namespace lsic::serve
