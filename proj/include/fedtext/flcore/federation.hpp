// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtext/datashard/shard.hpp"
#include "fedtext/flcore/fedavg.hpp"
#include "fedtext/metrics/metrics.hpp"
#include "fedtext/seqnet/adam.hpp"
#include "fedtext/seqnet/architecture.hpp"
#include "fedtext/transport/ledger.hpp"
#include "fedtext/transport/wire.hpp"

namespace fedtext::flcore {

enum class ClientExecution {
    Sequential,  // in-process, deterministic interleaving of client polls
    Threads,     // one thread per participant, real polling
    Remote,      // clients are separate processes; only the server role runs here
};

ClientExecution parse_client_execution(std::string_view name);
std::string_view to_string(ClientExecution e);

struct FederationConfig {
    int total_rounds = 10;
    int total_clients = 5;
    int participants_per_round = 5;
    double learning_rate = 0.001;
    int batch_size = 32;
    int local_epochs = 1;
    seqnet::ArchitectureSpec arch;
    std::optional<int> dropout_client;
    std::uint64_t seed = 0;

    datashard::ShardPlan plan = datashard::ShardPlan::iid(5);
    ClientExecution execution = ClientExecution::Sequential;
    double barrier_timeout_s = 300.0;
    int poll_interval_ms = 20;
    /// Clients keep their Adam moments from one round to the next.
    bool persist_optimizer_state = true;
    transport::WireDtype wire_dtype = transport::WireDtype::F32;
    bool profile_timing = true;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// All clients, or all but the dropped one; sorted, identical every round.
std::vector<int> select_clients(int round, const FederationConfig& config);

/// Stream for client `client`'s local epoch `epoch` in round `round`.
std::uint64_t client_stream_seed(std::uint64_t seed, int round, int client, int epoch);
/// Seed of the shard assignment.
std::uint64_t partition_seed(std::uint64_t seed);

class RoundError : public std::runtime_error {
public:
    RoundError(int round, std::string phase, const std::string& what)
        : std::runtime_error("round " + std::to_string(round) + " [" + phase + "]: " + what),
          round_(round), phase_(std::move(phase)) {}
    int round() const { return round_; }
    const std::string& phase() const { return phase_; }

private:
    int round_;
    std::string phase_;
};

class BarrierTimeout : public RoundError {
public:
    BarrierTimeout(int round, std::string phase, std::vector<int> missing);
    const std::vector<int>& missing() const { return missing_; }

private:
    std::vector<int> missing_;
};

struct ModelMetrics {
    int client = transport::kServer;  // kServer marks the global model
    metrics::EvalReport eval;
    double test_loss = 0.0;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> participants;
    ModelMetrics global;
    std::vector<ModelMetrics> locals;  // sorted by client id
    std::optional<double> global_objective;
    std::map<std::string, transport::LinkCounters> bytes;
    std::map<std::string, metrics::TimeProfile> timings;
};

/// One JSON object, stable key order, no trailing newline.
std::string to_json_line(const RoundRecord& record);

/// What a client trains on.
struct ClientContext {
    int client_id = 0;
    const seqnet::EncodedBatch* data = nullptr;
    const Eigen::MatrixXd* embedding = nullptr;
    /// Data/tokenizer/embedding preparation, charged to the client's first round.
    double preparation_ms = 0.0;
};

/// What the server evaluates on.
struct ServerContext {
    const seqnet::EncodedBatch* test = nullptr;
    const Eigen::MatrixXd* embedding = nullptr;
    /// Aggregation weight of each client id (its shard size).
    std::vector<std::size_t> shard_sizes;
    /// Optional: enables the per-round global objective.
    std::vector<ShardView> objective_shards;
};

struct FederationHooks {
    /// Called with each published global model (round 0 is the initial one).
    std::function<void(int round, const seqnet::Parameters<double>& global)> on_global;
    std::function<void(const RoundRecord&)> on_record;
};

struct FederationResult {
    std::vector<RoundRecord> history;
    seqnet::Parameters<double> final_global;
    transport::LedgerReport ledger;
};

/// Client role of the round protocol, talking to the store through its own ledger endpoint.
class ClientAgent {
public:
    ClientAgent(const FederationConfig& config, ClientContext context, transport::Transport& backend,
                transport::CommLedger& ledger);

    int id() const { return context_.client_id; }
    transport::Endpoint& endpoint() { return endpoint_; }

    /// One board poll for GlobalPublished(round); true once it is there.
    bool poll_global(int round);
    /// Polls until GlobalPublished(round) appears; BarrierTimeout after the configured timeout.
    void wait_for_global(int round, const std::function<bool()>& abort = {});
    /// Downloads the global of round-1, trains, uploads the local model and posts ClientDone(round).
    void train_round(int round);

    /// Timers of the given round (zero when timing is off).
    metrics::TimeProfile profile(int round) const;

private:
    FederationConfig config_;
    ClientContext context_;
    transport::Endpoint endpoint_;
    std::optional<seqnet::AdamState<double>> optimizer_;
    std::map<int, metrics::RoundTimers> timers_;
};

/// Server role: publishes globals, runs the barrier, aggregates and evaluates.
class ServerAgent {
public:
    ServerAgent(const FederationConfig& config, ServerContext context, transport::Transport& backend,
                transport::CommLedger& ledger);

    transport::Endpoint& endpoint() { return endpoint_; }

    /// Publishes `params` as the global of `round` (round 0 = initial model).
    void publish(int round, const seqnet::Parameters<double>& params);
    /// Participants whose ClientDone(round) is not on the board yet (one poll).
    std::vector<int> missing(int round, const std::vector<int>& participants);
    /// Polls until no participant is missing; BarrierTimeout lists the stragglers.
    void barrier(int round, const std::vector<int>& participants, const std::function<bool()>& abort = {});
    /// Downloads the locals, aggregates, evaluates, publishes, and fills the record
    /// (bytes and client timings are added by the driver).
    RoundRecord aggregate(int round, const std::vector<int>& participants);

    const seqnet::Parameters<double>& global() const { return global_; }
    metrics::TimeProfile profile(int round) const;

private:
    FederationConfig config_;
    ServerContext context_;
    transport::Endpoint endpoint_;
    seqnet::Parameters<double> global_;
    std::map<int, metrics::RoundTimers> timers_;
    std::map<int, double> inference_us_;
};

inline constexpr std::string_view kServerEndpoint = "server";
std::string client_endpoint(int client_id);

/// Algorithm 1 over T rounds. `clients` is indexed by client id and must cover
/// every client that can participate. Deterministic in Sequential mode.
FederationResult run_federation(const FederationConfig& config, std::span<const ClientContext> clients,
                                const ServerContext& server, transport::Transport& transport,
                                const FederationHooks& hooks = {});

/// Partitions `train` by config.plan and runs the federation with one shared embedding.
FederationResult run_federation(const FederationConfig& config, const datashard::EncodedDataset& train,
                                const seqnet::EncodedBatch& test, const Eigen::MatrixXd& embedding,
                                transport::Transport& transport, const FederationHooks& hooks = {});

/// The client loop of a networked client process: every round it participates in.
void run_client_agent(const FederationConfig& config, const ClientContext& context, transport::Transport& transport,
                      transport::CommLedger& ledger);

/// One model trained on the whole training set, one record per epoch, seeded
/// like client 0 of a single-client federation.
FederationResult run_centralized(const FederationConfig& config, const seqnet::EncodedBatch& train,
                                 const seqnet::EncodedBatch& test, const Eigen::MatrixXd& embedding,
                                 const FederationHooks& hooks = {});

}  // namespace fedtext::flcore
