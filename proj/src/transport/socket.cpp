// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/transport/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace fedtext::transport {
namespace {

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    ~Fd() {
        if (fd_ >= 0) ::close(fd_);
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    int get() const { return fd_; }

private:
    int fd_;
};

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

void set_timeouts(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const auto w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw TransportError(sys_error("socket send failed"));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void read_all(int fd, std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const auto r = ::recv(fd, data, n, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw TransportError(sys_error("socket receive failed"));
        }
        if (r == 0) throw TransportError("connection closed mid-frame");
        data += r;
        n -= static_cast<std::size_t>(r);
    }
}

void send_frame(int fd, std::uint8_t tag, ByteView payload) {
    Bytes header;
    ByteWriter w(header);
    w.put(static_cast<std::uint32_t>(payload.size() + 1));
    w.put(tag);
    write_all(fd, header.data(), header.size());
    write_all(fd, payload.data(), payload.size());
}

std::pair<std::uint8_t, Bytes> recv_frame(int fd) {
    std::uint8_t len_bytes[4];
    read_all(fd, len_bytes, 4);
    ByteReader lr({len_bytes, 4});
    const auto len = lr.get<std::uint32_t>();
    if (len < 1 || len > kMaxFrameBytes) throw TransportError("bad frame length " + std::to_string(len));
    std::uint8_t tag = 0;
    read_all(fd, &tag, 1);
    Bytes payload(len - 1);
    read_all(fd, payload.data(), payload.size());
    return {tag, std::move(payload)};
}

addrinfo* resolve(const Address& a, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto port = std::to_string(a.port);
    const int rc = ::getaddrinfo(a.host.empty() ? nullptr : a.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw TransportError("cannot resolve " + a.to_string() + ": " + ::gai_strerror(rc));
    return res;
}

}  // namespace

Address Address::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 == text.size())
        throw std::invalid_argument("address must be HOST:PORT, got '" + std::string(text) + "'");
    Address a;
    a.host = std::string(text.substr(0, colon));
    if (a.host.size() >= 2 && a.host.front() == '[' && a.host.back() == ']') a.host = a.host.substr(1, a.host.size() - 2);
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || port > 65535)
        throw std::invalid_argument("bad port in address '" + std::string(text) + "'");
    a.port = static_cast<std::uint16_t>(port);
    return a;
}

SocketTransport::SocketTransport(Address address, std::chrono::milliseconds io_timeout)
    : address_(std::move(address)), io_timeout_(io_timeout) {}

std::pair<Status, Bytes> SocketTransport::call(Opcode op, ByteView payload) {
    addrinfo* res = resolve(address_, false);
    int fd = -1;
    int last_errno = 0;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        last_errno = errno;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        errno = last_errno;
        throw TransportError(sys_error("cannot connect to " + address_.to_string()));
    }
    Fd guard(fd);
    set_timeouts(fd, io_timeout_);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    send_frame(fd, static_cast<std::uint8_t>(op), payload);
    auto [status, body] = recv_frame(fd);
    if (status > 2) throw TransportError("bad response status " + std::to_string(status));
    if (status == static_cast<std::uint8_t>(Status::Error))
        throw TransportError("server error: " + std::string(body.begin(), body.end()));
    return {static_cast<Status>(status), std::move(body)};
}

void SocketTransport::put(const BlobKey& key, ByteView bytes) {
    key.validate();
    Bytes req;
    ByteWriter w(req);
    key.encode(w);
    w.put_bytes(bytes);
    call(Opcode::Put, req);
}

Bytes SocketTransport::get(const BlobKey& key) {
    key.validate();
    Bytes req;
    ByteWriter w(req);
    key.encode(w);
    auto [status, body] = call(Opcode::Get, req);
    if (status == Status::NotFound) throw NotFound(key);
    return body;
}

bool SocketTransport::post(const SyncMessage& msg) {
    Bytes req;
    ByteWriter w(req);
    msg.encode(w);
    auto [status, body] = call(Opcode::Post, req);
    if (body.size() != 1) throw TransportError("bad post response");
    return body[0] != 0;
}

std::vector<SyncMessage> SocketTransport::poll(const MessageFilter& filter) {
    Bytes req;
    ByteWriter w(req);
    filter.encode(w);
    auto [status, body] = call(Opcode::Poll, req);
    if (body.size() % SyncMessage::kEncodedSize != 0) throw TransportError("bad poll response");
    std::vector<SyncMessage> out;
    ByteReader r(body);
    while (r.remaining()) out.push_back(SyncMessage::decode(r));
    return out;
}

SocketServer::SocketServer(std::shared_ptr<Transport> backend) : backend_(std::move(backend)) {}

SocketServer::~SocketServer() { stop(); }

void SocketServer::start(const Address& address) {
    if (running_) throw std::logic_error("server already running");
    addrinfo* res = resolve(address, true);
    int fd = -1;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError(sys_error("cannot listen on " + address.to_string()));
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    listen_fd_ = fd;
    running_ = true;
    thread_ = std::thread([this] { loop(); });
}

void SocketServer::stop() {
    if (!running_.exchange(false)) return;
    if (thread_.joinable()) thread_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
}

void SocketServer::loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&p, 1, 100);
        if (ready <= 0) continue;
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        Fd guard(fd);
        set_timeouts(fd, std::chrono::seconds(30));
        try {
            handle(fd);
        } catch (const std::exception&) {
            // a broken connection only affects that request
        }
    }
}

void SocketServer::handle(int fd) {
    auto [op, payload] = recv_frame(fd);
    ++served_;
    Bytes reply;
    ByteWriter w(reply);
    Status status = Status::Ok;
    try {
        ByteReader r(payload);
        switch (static_cast<Opcode>(op)) {
            case Opcode::Put: {
                const auto key = BlobKey::decode(r);
                backend_->put(key, r.get_bytes(r.remaining()));
                break;
            }
            case Opcode::Get: {
                const auto key = BlobKey::decode(r);
                try {
                    w.put_bytes(backend_->get(key));
                } catch (const NotFound&) {
                    status = Status::NotFound;
                }
                break;
            }
            case Opcode::Post:
                w.put(static_cast<std::uint8_t>(backend_->post(SyncMessage::decode(r)) ? 1 : 0));
                break;
            case Opcode::Poll:
                for (const auto& m : backend_->poll(MessageFilter::decode(r))) m.encode(w);
                break;
            default:
                throw WireError("unknown opcode " + std::to_string(op));
        }
    } catch (const std::exception& e) {
        status = Status::Error;
        reply.clear();
        w.put_string(e.what());
    }
    send_frame(fd, static_cast<std::uint8_t>(status), reply);
}

}  // namespace fedtext::transport
