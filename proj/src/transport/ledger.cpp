// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/transport/ledger.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>

namespace fedtext::transport {

void CommLedger::add(int round, std::string_view endpoint, const LinkCounters& delta) {
    std::lock_guard lock(mutex_);
    entries_[{round, std::string(endpoint)}] += delta;
}

std::map<LedgerKey, LinkCounters> CommLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

LinkCounters CommLedger::at(int round, std::string_view endpoint) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find({round, std::string(endpoint)});
    return it == entries_.end() ? LinkCounters{} : it->second;
}

void Endpoint::charge(std::uint64_t tx, std::uint64_t rx, std::uint64_t store_tx, std::uint64_t store_rx,
                      bool polled, bool empty) {
    const int r = round_;
    ledger_.add(r, name_, {tx, rx, polled ? 1u : 0u, empty ? 1u : 0u});
    if (store_tx || store_rx) ledger_.add(r, kStoreEndpoint, {store_tx, store_rx, 0, 0});
}

void Endpoint::put(const BlobKey& key, ByteView bytes) {
    backend_.put(key, bytes);
    charge(bytes.size(), 0, 0, bytes.size(), false, false);
}

Bytes Endpoint::get(const BlobKey& key) {
    try {
        auto bytes = backend_.get(key);
        charge(0, bytes.size(), bytes.size(), 0, false, false);
        return bytes;
    } catch (const NotFound&) {
        charge(0, kPollOverheadBytes, 0, 0, true, true);
        throw;
    }
}

bool Endpoint::post(const SyncMessage& msg) {
    const bool appended = backend_.post(msg);
    charge(SyncMessage::kEncodedSize, 0, 0, SyncMessage::kEncodedSize, false, false);
    return appended;
}

std::vector<SyncMessage> Endpoint::poll(const MessageFilter& filter) {
    auto found = backend_.poll(filter);
    if (found.empty()) {
        charge(0, kPollOverheadBytes, 0, 0, true, true);
    } else {
        const auto n = found.size() * SyncMessage::kEncodedSize;
        charge(0, n, n, 0, true, false);
    }
    return found;
}

const EndpointSummary* LedgerReport::find(std::string_view endpoint) const {
    for (const auto& e : endpoints)
        if (e.endpoint == endpoint) return &e;
    return nullptr;
}

LedgerReport ledger_report(const CommLedger& ledger) {
    LedgerReport report;
    std::set<int> rounds;
    std::map<std::string, LinkCounters> totals;
    for (const auto& [key, counters] : ledger.snapshot()) {
        report.rows.emplace_back(key, counters);
        rounds.insert(key.first);
        totals[key.second] += counters;
    }
    report.rounds = rounds.size();
    for (const auto& [name, total] : totals) {
        EndpointSummary s{name, total, 0.0, 0.0};
        if (report.rounds) {
            s.mean_transmitted_bytes = static_cast<double>(total.transmitted_bytes) / static_cast<double>(report.rounds);
            s.mean_received_bytes = static_cast<double>(total.received_bytes) / static_cast<double>(report.rounds);
        }
        report.endpoints.push_back(std::move(s));
    }
    return report;
}

void write_ledger_csv(const std::filesystem::path& path, const LedgerReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,endpoint,transmitted_bytes,received_bytes,poll_count,empty_polls,transmitted_mb,received_mb\n";
    for (const auto& [key, c] : report.rows)
        out << fmt::format("{},{},{},{},{},{},{:.6f},{:.6f}\n", key.first, key.second, c.transmitted_bytes,
                           c.received_bytes, c.poll_count, c.empty_polls,
                           static_cast<double>(c.transmitted_bytes) / kBytesPerMB,
                           static_cast<double>(c.received_bytes) / kBytesPerMB);
}

}  // namespace fedtext::transport
