// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "fedtext/seqnet/parameters.hpp"
#include "fedtext/transport/bytes.hpp"

namespace fedtext::transport {

inline constexpr char kMagic[4] = {'F', 'T', 'X', 'P'};

/// The header version doubles as the value encoding.
enum class WireDtype : std::uint16_t { F32 = 1, F64 = 2 };

inline std::size_t value_width(WireDtype d) { return d == WireDtype::F32 ? 4 : 8; }

WireDtype parse_wire_dtype(std::string_view name);
std::string_view to_string(WireDtype d);

/// Exact payload size for a layout, computed from names and shapes alone.
std::size_t payload_size(const seqnet::ArchitectureSpec& arch, WireDtype dtype = WireDtype::F32);

template <typename Scalar>
Bytes serialize_params(const seqnet::Parameters<Scalar>& params, WireDtype dtype = WireDtype::F32) {
    Bytes out;
    out.reserve(payload_size(params.arch(), dtype));
    ByteWriter w(out);
    w.put_string({kMagic, 4});
    w.put(static_cast<std::uint16_t>(dtype));
    w.put(static_cast<std::uint16_t>(params.size()));
    for (const auto& t : params) {
        if (!t.values.allFinite()) throw WireError("non-finite value in layer " + t.name);
        w.put(static_cast<std::uint16_t>(t.name.size()));
        w.put_string(t.name);
        w.put(static_cast<std::uint8_t>(t.rank));
        if (t.rank == 2) w.put(static_cast<std::uint32_t>(t.values.rows()));
        w.put(static_cast<std::uint32_t>(t.values.cols()));
        for (Eigen::Index i = 0; i < t.values.rows(); ++i)
            for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
                const double v = static_cast<double>(t.values(i, j));
                if (dtype == WireDtype::F32) {
                    if (std::abs(v) > static_cast<double>(std::numeric_limits<float>::max()))
                        throw WireError("value exceeds f32 range in layer " + t.name);
                    w.put(static_cast<float>(v));
                } else {
                    w.put(v);
                }
            }
    }
    return out;
}

/// Restores parameters; the stored layout must match `arch` exactly.
template <typename Scalar = double>
seqnet::Parameters<Scalar> deserialize_params(ByteView bytes, const seqnet::ArchitectureSpec& arch) {
    ByteReader r(bytes);
    if (r.remaining() < 4 || r.get_string(4) != std::string(kMagic, 4)) throw WireError("bad magic");
    const auto version = r.get<std::uint16_t>();
    if (version != static_cast<std::uint16_t>(WireDtype::F32) && version != static_cast<std::uint16_t>(WireDtype::F64))
        throw WireError("unsupported version " + std::to_string(version));
    const auto dtype = static_cast<WireDtype>(version);
    auto params = seqnet::Parameters<Scalar>::zeros(arch);
    const auto layers = r.get<std::uint16_t>();
    if (layers != params.size())
        throw WireError("shape mismatch: payload has " + std::to_string(layers) + " layers, expected " +
                        std::to_string(params.size()));
    for (auto& t : params) {
        const auto name = r.get_string(r.get<std::uint16_t>());
        if (name != t.name) throw WireError("shape mismatch: layer '" + name + "', expected '" + t.name + "'");
        const int rank = r.get<std::uint8_t>();
        if (rank != t.rank) throw WireError("shape mismatch: rank of layer " + name);
        const auto rows = rank == 2 ? r.get<std::uint32_t>() : 1u;
        const auto cols = r.get<std::uint32_t>();
        if (rows != t.values.rows() || cols != t.values.cols())
            throw WireError("shape mismatch: dims of layer " + name);
        for (Eigen::Index i = 0; i < t.values.rows(); ++i)
            for (Eigen::Index j = 0; j < t.values.cols(); ++j)
                t.values(i, j) = dtype == WireDtype::F32 ? static_cast<Scalar>(r.get<float>())
                                                         : static_cast<Scalar>(r.get<double>());
    }
    if (r.remaining() != 0) throw WireError("trailing bytes after last layer");
    return params;
}

}  // namespace fedtext::transport
