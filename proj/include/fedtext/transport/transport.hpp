// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fedtext/transport/bytes.hpp"

namespace fedtext::transport {

inline constexpr int kServer = -1;

struct BlobKey {
    enum class Namespace : std::uint8_t { Global = 0, Local = 1 };
    Namespace ns = Namespace::Global;
    int round = 0;
    std::optional<int> client;

    static BlobKey global(int round) { return {Namespace::Global, round, std::nullopt}; }
    static BlobKey local(int round, int client) { return {Namespace::Local, round, client}; }

    /// Throws std::invalid_argument unless Local keys carry a client and Global keys do not.
    void validate() const;
    std::string to_string() const;

    static constexpr std::size_t kEncodedSize = 9;
    void encode(ByteWriter& w) const;
    static BlobKey decode(ByteReader& r);

    friend auto operator<=>(const BlobKey&, const BlobKey&) = default;
};

struct SyncMessage {
    enum class Kind : std::uint8_t { ClientDone = 0, GlobalPublished = 1 };
    Kind kind = Kind::ClientDone;
    int round = 0;
    int sender = kServer;
    std::int64_t timestamp_ms = 0;

    /// (kind, round, sender): at most one message per identity.
    std::tuple<Kind, int, int> identity() const { return {kind, round, sender}; }

    static constexpr std::size_t kEncodedSize = 17;
    void encode(ByteWriter& w) const;
    static SyncMessage decode(ByteReader& r);

    friend bool operator==(const SyncMessage&, const SyncMessage&) = default;
};

struct MessageFilter {
    std::optional<SyncMessage::Kind> kind;
    std::optional<int> round;
    std::optional<int> sender;

    bool matches(const SyncMessage& m) const {
        return (!kind || m.kind == *kind) && (!round || m.round == *round) && (!sender || m.sender == *sender);
    }

    static constexpr std::size_t kEncodedSize = 10;
    void encode(ByteWriter& w) const;
    static MessageFilter decode(ByteReader& r);
};

class NotFound : public std::runtime_error {
public:
    explicit NotFound(const BlobKey& key) : std::runtime_error("blob not found: " + key.to_string()), key_(key) {}
    const BlobKey& key() const { return key_; }

private:
    BlobKey key_;
};

/// Backend unreachable or failed mid-operation.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BlobStore {
public:
    virtual ~BlobStore() = default;
    /// Last writer wins per key.
    virtual void put(const BlobKey& key, ByteView bytes) = 0;
    /// Throws NotFound for an absent key.
    virtual Bytes get(const BlobKey& key) = 0;
};

class MessageBoard {
public:
    virtual ~MessageBoard() = default;
    /// Appends unless a message with the same identity exists; returns whether it was appended.
    virtual bool post(const SyncMessage& msg) = 0;
    /// Matching messages in posting order.
    virtual std::vector<SyncMessage> poll(const MessageFilter& filter) = 0;
};

class Transport : public BlobStore, public MessageBoard {};

class InMemoryTransport final : public Transport {
public:
    void put(const BlobKey& key, ByteView bytes) override;
    Bytes get(const BlobKey& key) override;
    bool post(const SyncMessage& msg) override;
    std::vector<SyncMessage> poll(const MessageFilter& filter) override;

private:
    std::mutex mutex_;
    std::map<BlobKey, Bytes> blobs_;
    std::vector<SyncMessage> board_;
    std::set<std::tuple<SyncMessage::Kind, int, int>> posted_;
};

}  // namespace fedtext::transport
