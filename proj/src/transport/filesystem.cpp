// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/transport/filesystem.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>

namespace fedtext::transport {
namespace {

std::string errno_text(const std::string& what, const std::filesystem::path& p) {
    return what + " " + p.string() + ": " + std::strerror(errno);
}

class LockedFile {
public:
    LockedFile(const std::filesystem::path& p, int lock_op) {
        fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd_ < 0) throw TransportError(errno_text("cannot open", p));
        if (::flock(fd_, lock_op) != 0) {
            ::close(fd_);
            throw TransportError(errno_text("cannot lock", p));
        }
    }
    ~LockedFile() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    LockedFile(const LockedFile&) = delete;
    LockedFile& operator=(const LockedFile&) = delete;

    Bytes read_all() const {
        Bytes out;
        std::uint8_t buf[1 << 14];
        ::lseek(fd_, 0, SEEK_SET);
        for (;;) {
            const auto n = ::read(fd_, buf, sizeof buf);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("board read failed: ") + std::strerror(errno));
            }
            if (n == 0) break;
            out.insert(out.end(), buf, buf + n);
        }
        return out;
    }

    void append(ByteView bytes) const {
        std::size_t done = 0;
        while (done < bytes.size()) {
            const auto n = ::write(fd_, bytes.data() + done, bytes.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw TransportError(std::string("board append failed: ") + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
    }

private:
    int fd_ = -1;
};

std::vector<SyncMessage> decode_board(const Bytes& raw) {
    std::vector<SyncMessage> out;
    ByteReader r(raw);
    while (r.remaining() >= SyncMessage::kEncodedSize) out.push_back(SyncMessage::decode(r));
    return out;
}

}  // namespace

FilesystemTransport::FilesystemTransport(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_ / "blobs", ec);
    if (ec) throw TransportError("cannot create " + (root_ / "blobs").string() + ": " + ec.message());
}

std::filesystem::path FilesystemTransport::blob_path(const BlobKey& key) const {
    key.validate();
    const auto name = key.ns == BlobKey::Namespace::Global
                          ? "global-r" + std::to_string(key.round) + ".bin"
                          : "local-r" + std::to_string(key.round) + "-c" + std::to_string(*key.client) + ".bin";
    return root_ / "blobs" / name;
}

void FilesystemTransport::put(const BlobKey& key, ByteView bytes) {
    static std::atomic<unsigned> counter{0};
    const auto target = blob_path(key);
    auto tmp = target;
    tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw TransportError("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw TransportError("cannot publish " + target.string() + ": " + ec.message());
}

Bytes FilesystemTransport::get(const BlobKey& key) {
    const auto path = blob_path(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound(key);
    Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw TransportError("cannot read " + path.string());
    return out;
}

bool FilesystemTransport::post(const SyncMessage& msg) {
    LockedFile board(root_ / "board.log", LOCK_EX);
    for (const auto& m : decode_board(board.read_all()))
        if (m.identity() == msg.identity()) return false;
    Bytes record;
    ByteWriter w(record);
    msg.encode(w);
    board.append(record);
    return true;
}

std::vector<SyncMessage> FilesystemTransport::poll(const MessageFilter& filter) {
    LockedFile board(root_ / "board.log", LOCK_SH);
    std::vector<SyncMessage> out;
    for (const auto& m : decode_board(board.read_all()))
        if (filter.matches(m)) out.push_back(m);
    return out;
}

}  // namespace fedtext::transport
