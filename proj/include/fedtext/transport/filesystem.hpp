// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "fedtext/transport/transport.hpp"

namespace fedtext::transport {

/// One file per key under `root/blobs`, replaced atomically by rename. The
/// board is `root/board.log`, a sequence of fixed-size records appended under
/// an exclusive flock; readers take a shared lock. Safe across processes.
class FilesystemTransport final : public Transport {
public:
    explicit FilesystemTransport(std::filesystem::path root);

    void put(const BlobKey& key, ByteView bytes) override;
    Bytes get(const BlobKey& key) override;
    bool post(const SyncMessage& msg) override;
    std::vector<SyncMessage> poll(const MessageFilter& filter) override;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path blob_path(const BlobKey& key) const;

    std::filesystem::path root_;
};

}  // namespace fedtext::transport
