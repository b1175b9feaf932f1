// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace fedtext::transport {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Malformed or truncated payload.
class WireError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian appender.
class ByteWriter {
public:
    explicit ByteWriter(Bytes& out) : out_(out) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        auto bits = std::bit_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>(bits & 0xFFu));
            if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
        }
    }

    void put_bytes(ByteView bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
    void put_string(std::string_view s) {
        put_bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }

private:
    Bytes& out_;
};

/// Little-endian cursor; every read past the end throws WireError("truncated ...").
class ByteReader {
public:
    explicit ByteReader(ByteView in) : in_(in) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        need(sizeof(T));
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) bits = static_cast<U>(bits | (static_cast<U>(in_[pos_ + i]) << (8 * i)));
        pos_ += sizeof(T);
        return std::bit_cast<T>(bits);
    }

    ByteView get_bytes(std::size_t n) {
        need(n);
        auto view = in_.subspan(pos_, n);
        pos_ += n;
        return view;
    }

    std::string get_string(std::size_t n) {
        const auto v = get_bytes(n);
        return {reinterpret_cast<const char*>(v.data()), v.size()};
    }

    std::size_t remaining() const { return in_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n)
            throw WireError("truncated payload: need " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", have " + std::to_string(in_.size() - pos_));
    }

    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace fedtext::transport
