// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedtext/transport/transport.hpp"

namespace fedtext::transport {

inline constexpr std::uint64_t kPollOverheadBytes = 128;
inline constexpr double kBytesPerMB = 1e6;
/// Counterparty of every client and server operation.
inline constexpr std::string_view kStoreEndpoint = "store";

struct LinkCounters {
    std::uint64_t transmitted_bytes = 0;
    std::uint64_t received_bytes = 0;
    std::uint64_t poll_count = 0;
    std::uint64_t empty_polls = 0;

    LinkCounters& operator+=(const LinkCounters& o) {
        transmitted_bytes += o.transmitted_bytes;
        received_bytes += o.received_bytes;
        poll_count += o.poll_count;
        empty_polls += o.empty_polls;
        return *this;
    }
    friend bool operator==(const LinkCounters&, const LinkCounters&) = default;
};

using LedgerKey = std::pair<int, std::string>;  // (round, endpoint)

/// Thread-safe, monotone byte counters per (round, endpoint).
class CommLedger {
public:
    void add(int round, std::string_view endpoint, const LinkCounters& delta);
    std::map<LedgerKey, LinkCounters> snapshot() const;
    LinkCounters at(int round, std::string_view endpoint) const;

private:
    mutable std::mutex mutex_;
    std::map<LedgerKey, LinkCounters> entries_;
};

/// Accounting view of a backend for one named endpoint. Every call is charged
/// to the endpoint and mirrored on the store side:
///   put/post: endpoint transmits the payload, store receives it;
///   get/poll: store transmits what is returned, endpoint receives it;
///   an empty poll or a get miss charges kPollOverheadBytes received to the endpoint only.
class Endpoint final : public Transport {
public:
    Endpoint(Transport& backend, CommLedger& ledger, std::string name)
        : backend_(backend), ledger_(ledger), name_(std::move(name)) {}

    void set_round(int round) { round_ = round; }
    int round() const { return round_; }
    const std::string& name() const { return name_; }

    void put(const BlobKey& key, ByteView bytes) override;
    Bytes get(const BlobKey& key) override;
    bool post(const SyncMessage& msg) override;
    std::vector<SyncMessage> poll(const MessageFilter& filter) override;

private:
    void charge(std::uint64_t tx, std::uint64_t rx, std::uint64_t store_tx, std::uint64_t store_rx, bool polled,
                bool empty);

    Transport& backend_;
    CommLedger& ledger_;
    std::string name_;
    std::atomic<int> round_{0};
};

struct EndpointSummary {
    std::string endpoint;
    LinkCounters total;
    double mean_transmitted_bytes = 0.0;  // per round
    double mean_received_bytes = 0.0;

    double mean_transmitted_mb() const { return mean_transmitted_bytes / kBytesPerMB; }
    double mean_received_mb() const { return mean_received_bytes / kBytesPerMB; }
};

struct LedgerReport {
    std::vector<std::pair<LedgerKey, LinkCounters>> rows;  // sorted by round, then endpoint
    std::vector<EndpointSummary> endpoints;                // averages over the rounds present in the ledger
    std::size_t rounds = 0;

    const EndpointSummary* find(std::string_view endpoint) const;
};

LedgerReport ledger_report(const CommLedger& ledger);

/// round,endpoint,transmitted_bytes,received_bytes,poll_count,empty_polls,transmitted_mb,received_mb
void write_ledger_csv(const std::filesystem::path& path, const LedgerReport& report);

}  // namespace fedtext::transport
