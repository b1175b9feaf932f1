// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/transport/transport.hpp"

#include "fedtext/transport/wire.hpp"

namespace fedtext::transport {

WireDtype parse_wire_dtype(std::string_view name) {
    if (name == "f32") return WireDtype::F32;
    if (name == "f64") return WireDtype::F64;
    throw std::invalid_argument("wire dtype must be \"f32\" or \"f64\"");
}

std::string_view to_string(WireDtype d) { return d == WireDtype::F32 ? "f32" : "f64"; }

std::size_t payload_size(const seqnet::ArchitectureSpec& arch, WireDtype dtype) {
    const auto layout = seqnet::Parameters<double>::zeros(arch);
    std::size_t n = 8;
    for (const auto& t : layout)
        n += 2 + t.name.size() + 1 + 4 * static_cast<std::size_t>(t.rank) +
             value_width(dtype) * static_cast<std::size_t>(t.size());
    return n;
}

void BlobKey::validate() const {
    if ((ns == Namespace::Local) != client.has_value())
        throw std::invalid_argument("blob key: local keys need a client id and global keys must not have one");
}

std::string BlobKey::to_string() const {
    return ns == Namespace::Global ? "global/r" + std::to_string(round)
                                   : "local/r" + std::to_string(round) + "/c" + std::to_string(client.value_or(-1));
}

void BlobKey::encode(ByteWriter& w) const {
    w.put(static_cast<std::uint8_t>(ns));
    w.put(static_cast<std::int32_t>(round));
    w.put(static_cast<std::int32_t>(client.value_or(-1)));
}

BlobKey BlobKey::decode(ByteReader& r) {
    BlobKey k;
    const auto ns = r.get<std::uint8_t>();
    if (ns > 1) throw WireError("bad blob namespace");
    k.ns = static_cast<Namespace>(ns);
    k.round = r.get<std::int32_t>();
    const auto c = r.get<std::int32_t>();
    if (k.ns == Namespace::Local) k.client = c;
    return k;
}

void SyncMessage::encode(ByteWriter& w) const {
    w.put(static_cast<std::uint8_t>(kind));
    w.put(static_cast<std::int32_t>(round));
    w.put(static_cast<std::int32_t>(sender));
    w.put(timestamp_ms);
}

SyncMessage SyncMessage::decode(ByteReader& r) {
    SyncMessage m;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw WireError("bad message kind");
    m.kind = static_cast<Kind>(kind);
    m.round = r.get<std::int32_t>();
    m.sender = r.get<std::int32_t>();
    m.timestamp_ms = r.get<std::int64_t>();
    return m;
}

void MessageFilter::encode(ByteWriter& w) const {
    w.put(static_cast<std::uint8_t>((kind ? 1 : 0) | (round ? 2 : 0) | (sender ? 4 : 0)));
    w.put(static_cast<std::uint8_t>(kind.value_or(SyncMessage::Kind::ClientDone)));
    w.put(static_cast<std::int32_t>(round.value_or(0)));
    w.put(static_cast<std::int32_t>(sender.value_or(0)));
}

MessageFilter MessageFilter::decode(ByteReader& r) {
    MessageFilter f;
    const auto flags = r.get<std::uint8_t>();
    const auto kind = r.get<std::uint8_t>();
    const auto round = r.get<std::int32_t>();
    const auto sender = r.get<std::int32_t>();
    if (flags & 1) {
        if (kind > 1) throw WireError("bad message kind");
        f.kind = static_cast<SyncMessage::Kind>(kind);
    }
    if (flags & 2) f.round = round;
    if (flags & 4) f.sender = sender;
    return f;
}

void InMemoryTransport::put(const BlobKey& key, ByteView bytes) {
    key.validate();
    std::lock_guard lock(mutex_);
    blobs_[key].assign(bytes.begin(), bytes.end());
}

Bytes InMemoryTransport::get(const BlobKey& key) {
    key.validate();
    std::lock_guard lock(mutex_);
    const auto it = blobs_.find(key);
    if (it == blobs_.end()) throw NotFound(key);
    return it->second;
}

bool InMemoryTransport::post(const SyncMessage& msg) {
    std::lock_guard lock(mutex_);
    if (!posted_.insert(msg.identity()).second) return false;
    board_.push_back(msg);
    return true;
}

std::vector<SyncMessage> InMemoryTransport::poll(const MessageFilter& filter) {
    std::lock_guard lock(mutex_);
    std::vector<SyncMessage> out;
    for (const auto& m : board_)
        if (filter.matches(m)) out.push_back(m);
    return out;
}

}  // namespace fedtext::transport
