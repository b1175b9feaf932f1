// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "fedtext/transport/transport.hpp"

namespace fedtext::transport {

// Frame: u32 LE length of everything after it, then one byte (opcode in a
// request, status in a response), then the payload. One request per connection.
enum class Opcode : std::uint8_t { Put = 1, Get = 2, Post = 3, Poll = 4 };
enum class Status : std::uint8_t { Ok = 0, NotFound = 1, Error = 2 };

inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

struct Address {
    std::string host;
    std::uint16_t port = 0;

    /// "HOST:PORT"; the port may be 0 for a server picking an ephemeral port.
    static Address parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Client side of the socket protocol.
class SocketTransport final : public Transport {
public:
    explicit SocketTransport(Address address, std::chrono::milliseconds io_timeout = std::chrono::seconds(60));

    void put(const BlobKey& key, ByteView bytes) override;
    Bytes get(const BlobKey& key) override;
    bool post(const SyncMessage& msg) override;
    std::vector<SyncMessage> poll(const MessageFilter& filter) override;

private:
    std::pair<Status, Bytes> call(Opcode op, ByteView payload);

    Address address_;
    std::chrono::milliseconds io_timeout_;
};

/// Serves the four operations over TCP from a backing store.
class SocketServer {
public:
    explicit SocketServer(std::shared_ptr<Transport> backend);
    ~SocketServer();
    SocketServer(const SocketServer&) = delete;
    SocketServer& operator=(const SocketServer&) = delete;

    /// Binds and starts the accept loop on a background thread.
    void start(const Address& address);
    void stop();
    /// Actual bound port (useful after binding port 0).
    std::uint16_t port() const { return port_; }
    std::uint64_t requests_served() const { return served_.load(); }

private:
    void loop();
    void handle(int fd);

    std::shared_ptr<Transport> backend_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> served_{0};
    std::thread thread_;
};

}  // namespace fedtext::transport
