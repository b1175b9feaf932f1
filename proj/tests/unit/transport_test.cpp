// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "fedtext/transport/filesystem.hpp"
#include "fedtext/transport/ledger.hpp"
#include "fedtext/transport/socket.hpp"
#include "fedtext/transport/wire.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"
#include "support/transport_trace.hpp"

namespace fedtext::transport {
namespace {

using seqnet::ArchitectureSpec;
using seqnet::CellKind;

ArchitectureSpec default_arch(CellKind kind) {
    ArchitectureSpec a;
    a.cell_kind = kind;
    return a;
}

// Header bytes for the default layout, by hand: 8 (magic, version, layer count)
// + names (16+26+14+12+10+13+11 = 102) + 7 x (u16 length + u8 rank) + dims (4 x 8 + 3 x 4).
constexpr std::size_t kDefaultHeader = 8 + 102 + 21 + 44;

TEST(Wire, DefaultPayloadSizesFromParameterCounts) {
    EXPECT_EQ(kDefaultHeader, 175u);
    const std::size_t rnn = kDefaultHeader + 4 * 321603;
    const std::size_t gru = kDefaultHeader + 4 * 722403;
    const std::size_t lstm = kDefaultHeader + 4 * 922803;
    EXPECT_EQ(serialize_params(seqnet::init_parameters(default_arch(CellKind::RNN), 1)).size(), rnn);
    EXPECT_EQ(serialize_params(seqnet::init_parameters(default_arch(CellKind::GRU), 1)).size(), gru);
    EXPECT_EQ(serialize_params(seqnet::init_parameters(default_arch(CellKind::LSTM), 1)).size(), lstm);
    EXPECT_EQ(payload_size(default_arch(CellKind::RNN)), rnn);
    EXPECT_EQ(payload_size(default_arch(CellKind::LSTM), WireDtype::F64), kDefaultHeader + 8 * 922803);
    EXPECT_NEAR(static_cast<double>(rnn) / 1e6, 1.29, 0.005);
}

TEST(Wire, ByteLayoutIsLittleEndianRowMajor) {
    const auto arch = testing::tiny_arch(CellKind::RNN, 2, 3);
    auto p = seqnet::Parameters<double>::zeros(arch);
    p[seqnet::kRecurrentKernel].values(0, 0) = 1.0;
    p[seqnet::kRecurrentKernel].values(0, 1) = -2.0;
    const auto b = serialize_params(p);
    const Bytes head{'F', 'T', 'X', 'P', 1, 0, 7, 0, 16, 0};
    ASSERT_GE(b.size(), 40u);
    EXPECT_TRUE(std::equal(head.begin(), head.end(), b.begin()));
    EXPECT_EQ(std::string(b.begin() + 10, b.begin() + 26), "recurrent/kernel");
    std::size_t o = 26;
    EXPECT_EQ(b[o], 2);                                        // rank
    EXPECT_EQ(b[o + 1], 4); EXPECT_EQ(b[o + 2], 0);             // rows = embed dim 4
    EXPECT_EQ(b[o + 5], 2);                                     // cols = units 2
    o += 9;
    // 1.0f = 0x3F800000, -2.0f = 0xC0000000, stored LE and in row-major order
    EXPECT_EQ((Bytes{b[o], b[o + 1], b[o + 2], b[o + 3]}), (Bytes{0x00, 0x00, 0x80, 0x3F}));
    EXPECT_EQ((Bytes{b[o + 4], b[o + 5], b[o + 6], b[o + 7]}), (Bytes{0x00, 0x00, 0x00, 0xC0}));
}

TEST(Wire, RoundTripGruUpToF32) {
    const auto arch = testing::tiny_arch(CellKind::GRU, 3, 3);
    const auto p = testing::random_params(arch, 11);
    const auto q = deserialize_params(serialize_params(p), arch);
    ASSERT_TRUE(q.same_layout(p));
    for (std::size_t i = 0; i < p.size(); ++i)
        EXPECT_EQ(q[i].values, p[i].values.cast<float>().cast<double>()) << p[i].name;
    EXPECT_TRUE(deserialize_params(serialize_params(p, WireDtype::F64), arch) == p);
}

TEST(Wire, Deterministic) {
    const auto p = testing::random_params(testing::tiny_arch(CellKind::LSTM), 3);
    EXPECT_EQ(serialize_params(p), serialize_params(p));
}

TEST(Wire, RejectsMalformedPayloads) {
    const auto arch = testing::tiny_arch(CellKind::LSTM);
    auto bytes = serialize_params(testing::random_params(arch, 2));
    auto expect_error = [&](Bytes b, const std::string& needle, const ArchitectureSpec& a) {
        try {
            (void)deserialize_params(b, a);
            ADD_FAILURE() << "expected WireError containing " << needle;
        } catch (const WireError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    expect_error(bad_magic, "bad magic", arch);
    auto truncated = bytes;
    truncated.pop_back();
    expect_error(truncated, "truncated", arch);
    auto version = bytes;
    version[4] = 9;
    expect_error(version, "version", arch);
    expect_error(bytes, "shape mismatch", testing::tiny_arch(CellKind::GRU));
    expect_error(bytes, "shape mismatch", testing::tiny_arch(CellKind::LSTM, 4));
    expect_error({}, "bad magic", arch);
}

TEST(Wire, NonFiniteValueNamesLayer) {
    auto p = testing::random_params(testing::tiny_arch(CellKind::RNN), 2);
    p[seqnet::kDenseBias].values(0, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)serialize_params(p);
        FAIL();
    } catch (const WireError& e) {
        EXPECT_NE(std::string(e.what()).find("dense/bias"), std::string::npos);
    }
}

class Backends : public ::testing::Test {
protected:
    testing::TempDir dir;
    std::shared_ptr<InMemoryTransport> hosted = std::make_shared<InMemoryTransport>();
    SocketServer server{hosted};

    void SetUp() override { server.start(Address::parse("127.0.0.1:0")); }

    template <typename F>
    void for_each_backend(F&& f) {
        InMemoryTransport mem;
        FilesystemTransport fs(dir.path() / "fs");
        SocketTransport sock(Address{"127.0.0.1", server.port()});
        f(mem, "memory");
        f(fs, "filesystem");
        f(sock, "socket");
    }
};

TEST_F(Backends, PutGetNotFoundAndLastWriterWins) {
    for_each_backend([](Transport& t, const char* name) {
        SCOPED_TRACE(name);
        EXPECT_THROW(t.get(BlobKey::global(1)), NotFound);
        t.put(BlobKey::local(1, 2), Bytes{1, 2, 3});
        EXPECT_EQ(t.get(BlobKey::local(1, 2)), (Bytes{1, 2, 3}));
        t.put(BlobKey::local(1, 2), Bytes{9});
        EXPECT_EQ(t.get(BlobKey::local(1, 2)), (Bytes{9}));
        t.put(BlobKey::global(1), Bytes{});
        EXPECT_EQ(t.get(BlobKey::global(1)), Bytes{});
        EXPECT_THROW(t.get(BlobKey::local(1, 3)), NotFound);
        EXPECT_THROW(t.put(BlobKey{BlobKey::Namespace::Local, 1, std::nullopt}, Bytes{}), std::invalid_argument);
    });
}

TEST_F(Backends, BoardIsAppendOnlyAndIdempotent) {
    for_each_backend([](Transport& t, const char* name) {
        SCOPED_TRACE(name);
        const SyncMessage a{SyncMessage::Kind::ClientDone, 1, 0, 10};
        const SyncMessage b{SyncMessage::Kind::ClientDone, 1, 1, 11};
        const SyncMessage g{SyncMessage::Kind::GlobalPublished, 1, kServer, 12};
        EXPECT_TRUE(t.poll({}).empty());
        EXPECT_TRUE(t.post(a));
        EXPECT_TRUE(t.post(g));
        EXPECT_TRUE(t.post(b));
        EXPECT_FALSE(t.post({SyncMessage::Kind::ClientDone, 1, 0, 99}));
        EXPECT_EQ(t.poll({}), (std::vector<SyncMessage>{a, g, b}));
        EXPECT_EQ(t.poll({SyncMessage::Kind::ClientDone, 1, std::nullopt}), (std::vector<SyncMessage>{a, b}));
        EXPECT_EQ(t.poll({std::nullopt, 2, std::nullopt}), std::vector<SyncMessage>{});
        EXPECT_EQ(t.poll({std::nullopt, std::nullopt, kServer}), std::vector<SyncMessage>{g});
    });
}

TEST_F(Backends, ScriptedTracesAgree) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        testing::TempDir fsdir;
        InMemoryTransport mem;
        FilesystemTransport fs(fsdir.path());
        auto fresh = std::make_shared<InMemoryTransport>();
        SocketServer srv(fresh);
        srv.start(Address::parse("127.0.0.1:0"));
        SocketTransport sock(Address{"127.0.0.1", srv.port()});
        const auto expect = testing::run_trace(mem, seed);
        ASSERT_EQ(expect.size(), 50u);
        EXPECT_EQ(testing::run_trace(fs, seed), expect);
        EXPECT_EQ(testing::run_trace(sock, seed), expect);
        EXPECT_EQ(srv.requests_served(), 50u);
    }
}

TEST_F(Backends, LargeBlobOverSocket) {
    SocketTransport sock(Address{"127.0.0.1", server.port()});
    const auto p = seqnet::init_parameters(default_arch(CellKind::LSTM), 5);
    const auto bytes = serialize_params(p);
    sock.put(BlobKey::global(0), bytes);
    EXPECT_EQ(sock.get(BlobKey::global(0)), bytes);
}

TEST(SocketTransport, UnreachableServerIsTransportError) {
    SocketServer probe(std::make_shared<InMemoryTransport>());
    probe.start(Address::parse("127.0.0.1:0"));
    const auto port = probe.port();
    probe.stop();
    SocketTransport sock(Address{"127.0.0.1", port});
    EXPECT_THROW(sock.poll({}), TransportError);
}

TEST(Address, Parse) {
    const auto a = Address::parse("localhost:8080");
    EXPECT_EQ(a.host, "localhost");
    EXPECT_EQ(a.port, 8080);
    EXPECT_EQ(Address::parse("[::1]:9").host, "::1");
    EXPECT_THROW(Address::parse("nohost"), std::invalid_argument);
    EXPECT_THROW(Address::parse("h:70000"), std::invalid_argument);
    EXPECT_THROW(Address::parse("h:"), std::invalid_argument);
}

TEST(FilesystemTransport, ConcurrentPostsKeepOneCopy) {
    testing::TempDir dir;
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] {
            FilesystemTransport fs(dir.path());
            for (int r = 0; r < 20; ++r) fs.post({SyncMessage::Kind::ClientDone, r, r % 4, i});
        });
    for (auto& t : threads) t.join();
    FilesystemTransport fs(dir.path());
    EXPECT_EQ(fs.poll({}).size(), 20u);
}

TEST(Ledger, NoTrafficReportsZeros) {
    CommLedger ledger;
    const auto r = ledger_report(ledger);
    EXPECT_TRUE(r.rows.empty());
    EXPECT_TRUE(r.endpoints.empty());
    EXPECT_EQ(r.rounds, 0u);
}

TEST(Ledger, PollingInflatesReceivedBytes) {
    InMemoryTransport mem;
    CommLedger ledger;
    Endpoint client(mem, ledger, "client-0");
    Endpoint server(mem, ledger, "server");
    client.set_round(1);
    server.set_round(1);
    const MessageFilter wait_global{SyncMessage::Kind::GlobalPublished, 0, std::nullopt};
    for (int i = 0; i < 10; ++i) EXPECT_TRUE(client.poll(wait_global).empty());
    const Bytes model(1000, 7);
    server.put(BlobKey::global(0), model);
    server.post({SyncMessage::Kind::GlobalPublished, 0, kServer, 0});
    ASSERT_EQ(client.poll(wait_global).size(), 1u);
    client.get(BlobKey::global(0));
    client.put(BlobKey::local(1, 0), model);
    client.post({SyncMessage::Kind::ClientDone, 1, 0, 0});

    const auto c = ledger.at(1, "client-0");
    EXPECT_EQ(c.poll_count, 11u);
    EXPECT_EQ(c.empty_polls, 10u);
    EXPECT_EQ(c.received_bytes, 10 * kPollOverheadBytes + 17 + 1000);
    EXPECT_EQ(c.transmitted_bytes, 1000u + 17);
    EXPECT_GT(c.received_bytes, c.transmitted_bytes);
    EXPECT_EQ(ledger.at(1, "server").transmitted_bytes, 1017u);
}

TEST(Ledger, GetMissChargedAsEmptyPoll) {
    InMemoryTransport mem;
    CommLedger ledger;
    Endpoint client(mem, ledger, "client-3");
    EXPECT_THROW(client.get(BlobKey::global(4)), NotFound);
    EXPECT_EQ(ledger.at(0, "client-3"), (LinkCounters{0, kPollOverheadBytes, 1, 1}));
}

// Across any sequence of operations: sum of transmitted = sum of received - poll overheads.
TEST(Ledger, ConservationProperty) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        InMemoryTransport mem;
        CommLedger ledger;
        std::vector<std::unique_ptr<Endpoint>> eps;
        eps.push_back(std::make_unique<Endpoint>(mem, ledger, "server"));
        for (int k = 0; k < 3; ++k) eps.push_back(std::make_unique<Endpoint>(mem, ledger, "client-" + std::to_string(k)));
        Rng rng(seed);
        for (int step = 0; step < 200; ++step) {
            auto& ep = *eps[uniform_index(rng, eps.size())];
            ep.set_round(1 + static_cast<int>(step / 50));
            testing::run_trace(ep, rng(), 1);
        }
        std::map<int, std::pair<std::uint64_t, std::uint64_t>> per_round;  // tx, rx - overhead
        for (const auto& [key, c] : ledger.snapshot()) {
            per_round[key.first].first += c.transmitted_bytes;
            per_round[key.first].second += c.received_bytes - c.empty_polls * kPollOverheadBytes;
        }
        for (const auto& [round, sums] : per_round) EXPECT_EQ(sums.first, sums.second) << "round " << round;
    }
}

TEST(Ledger, ReportAveragesAndCsv) {
    InMemoryTransport mem;
    CommLedger ledger;
    Endpoint server(mem, ledger, "server");
    std::vector<std::unique_ptr<Endpoint>> clients;
    for (int k = 0; k < 5; ++k) clients.push_back(std::make_unique<Endpoint>(mem, ledger, "client-" + std::to_string(k)));
    const Bytes payload(2'000'000, 1);
    for (int r = 1; r <= 2; ++r) {
        server.set_round(r);
        server.put(BlobKey::global(r), payload);
        for (auto& c : clients) {
            c->set_round(r);
            c->get(BlobKey::global(r));
        }
    }
    const auto rep = ledger_report(ledger);
    EXPECT_EQ(rep.rounds, 2u);
    const auto* s = rep.find("server");
    ASSERT_NE(s, nullptr);
    EXPECT_EQ(s->total.transmitted_bytes, 4'000'000u);
    EXPECT_DOUBLE_EQ(s->mean_transmitted_mb(), 2.0);
    for (int k = 0; k < 5; ++k) EXPECT_GE(rep.find("client-" + std::to_string(k))->mean_received_bytes, 2e6);

    testing::TempDir dir;
    write_ledger_csv(dir.path() / "ledger.csv", rep);
    const auto csv = testing::read_file(dir.path() / "ledger.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "round,endpoint,transmitted_bytes,received_bytes,poll_count,empty_polls,transmitted_mb,received_mb");
    EXPECT_NE(csv.find("1,server,2000000,0,0,0,2.000000,0.000000"), std::string::npos);
}

}  // namespace
}  // namespace fedtext::transport
