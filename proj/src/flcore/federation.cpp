// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/flcore/federation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "fedtext/errors.hpp"

namespace fedtext::flcore {
namespace {

using seqnet::Parameters;
using transport::BlobKey;
using transport::MessageFilter;
using transport::SyncMessage;
using Clock = std::chrono::steady_clock;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

template <typename F>
decltype(auto) timed(metrics::RoundTimers* timers, metrics::RoundTimers::Category c, F&& f) {
    if (!timers) return f();
    metrics::ScopedTimer scope(*timers, c);
    return f();
}

template <typename F>
decltype(auto) in_phase(int round, const char* phase, F&& f) {
    try {
        return f();
    } catch (const RoundError&) {
        throw;
    } catch (const std::exception& e) {
        throw RoundError(round, phase, e.what());
    }
}

std::string join_ids(const std::vector<int>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ", " : "") + std::to_string(ids[i]);
    return s;
}

ModelMetrics measure(int client, const Parameters<double>& params, const ServerContext& ctx) {
    return {client, metrics::evaluate(params, *ctx.embedding, *ctx.test),
            seqnet::dataset_loss(params, *ctx.embedding, *ctx.test)};
}

seqnet::TokenMatrix inference_sample(const seqnet::EncodedBatch& test) {
    seqnet::TokenMatrix rows(metrics::kInferenceSamples, test.token_ids.cols());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) rows.row(r) = test.token_ids.row(r % test.token_ids.rows());
    return rows;
}

nlohmann::ordered_json eval_json(const ModelMetrics& m) {
    nlohmann::ordered_json j;
    if (m.client != transport::kServer) j["client"] = m.client;
    j["accuracy"] = m.eval.accuracy;
    j["macro_precision"] = m.eval.macro_precision;
    j["macro_recall"] = m.eval.macro_recall;
    j["test_loss"] = m.test_loss;
    j["n_samples"] = m.eval.n_samples;
    j["confusion"] = m.eval.confusion;
    return j;
}

}  // namespace

ClientExecution parse_client_execution(std::string_view name) {
    if (name == "sequential") return ClientExecution::Sequential;
    if (name == "threads") return ClientExecution::Threads;
    if (name == "remote") return ClientExecution::Remote;
    throw std::invalid_argument("client execution must be \"sequential\", \"threads\" or \"remote\"");
}

std::string_view to_string(ClientExecution e) {
    switch (e) {
        case ClientExecution::Sequential: return "sequential";
        case ClientExecution::Threads: return "threads";
        case ClientExecution::Remote: return "remote";
    }
    return "?";
}

void FederationConfig::validate() const {
    if (total_rounds < 0) throw ConfigError("federation.rounds", "must be >= 0");
    if (total_clients < 1) throw ConfigError("federation.clients", "must be >= 1");
    if (participants_per_round < 1 || participants_per_round > total_clients)
        throw ConfigError("federation.participants", "must lie in [1, clients]");
    if (dropout_client) {
        if (*dropout_client < 0 || *dropout_client >= total_clients)
            throw ConfigError("federation.dropout_client", "must be a client id in [0, clients)");
        if (participants_per_round != total_clients - 1)
            throw ConfigError("federation.participants", "must equal clients - 1 when a client is dropped");
    } else if (participants_per_round != total_clients) {
        throw ConfigError("federation.participants", "must equal clients unless dropout_client is set");
    }
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw ConfigError("federation.learning_rate", "must be a finite non-negative number");
    if (batch_size < 1) throw ConfigError("federation.batch_size", "must be >= 1");
    if (local_epochs < 1) throw ConfigError("federation.local_epochs", "must be >= 1");
    if (!(barrier_timeout_s > 0.0)) throw ConfigError("federation.barrier_timeout_s", "must be positive");
    if (poll_interval_ms < 0) throw ConfigError("federation.poll_interval_ms", "must be >= 0");
    try {
        arch.validate();
    } catch (const std::exception& e) {
        throw ConfigError("model", e.what());
    }
    if (plan.clients != total_clients)
        throw ConfigError("shard_plan", "plan has " + std::to_string(plan.clients) + " clients, federation has " +
                                            std::to_string(total_clients));
    try {
        plan.validate();
    } catch (const std::exception& e) {
        throw ConfigError("shard_plan", e.what());
    }
}

std::vector<int> select_clients(int, const FederationConfig& config) {
    std::vector<int> ids;
    for (int k = 0; k < config.total_clients; ++k)
        if (!config.dropout_client || *config.dropout_client != k) ids.push_back(k);
    return ids;
}

std::uint64_t client_stream_seed(std::uint64_t seed, int round, int client, int epoch) {
    return derive_seed(seed, {round, client, epoch});
}

std::uint64_t partition_seed(std::uint64_t seed) { return derive_seed(seed, {0xDA7A}); }

BarrierTimeout::BarrierTimeout(int round, std::string phase, std::vector<int> missing)
    : RoundError(round, std::move(phase), "timed out; missing: " + join_ids(missing)), missing_(std::move(missing)) {}

std::string client_endpoint(int client_id) { return "client-" + std::to_string(client_id); }

std::string to_json_line(const RoundRecord& r) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["participants"] = r.participants;
    j["global"] = eval_json(r.global);
    if (r.global_objective) j["global_objective"] = *r.global_objective;
    auto& locals = j["locals"] = nlohmann::ordered_json::array();
    for (const auto& m : r.locals) locals.push_back(eval_json(m));
    auto& bytes = j["bytes"] = nlohmann::ordered_json::object();
    for (const auto& [name, c] : r.bytes)
        bytes[name] = {{"transmitted", c.transmitted_bytes}, {"received", c.received_bytes},
                       {"polls", c.poll_count}, {"empty_polls", c.empty_polls}};
    auto& timings = j["timings"] = nlohmann::ordered_json::object();
    for (const auto& [name, t] : r.timings)
        timings[name] = {{"training_ms", t.training_ms}, {"overhead_ms", t.overhead_ms},
                         {"upload_ms", t.upload_ms}, {"download_ms", t.download_ms},
                         {"inference_us_per_sample", t.inference_us_per_sample}};
    return j.dump();
}

ClientAgent::ClientAgent(const FederationConfig& config, ClientContext context, transport::Transport& backend,
                         transport::CommLedger& ledger)
    : config_(config), context_(context), endpoint_(backend, ledger, client_endpoint(context.client_id)) {
    if (!context_.data || !context_.embedding) throw std::invalid_argument("client context is incomplete");
}

bool ClientAgent::poll_global(int round) {
    return !endpoint_.poll({SyncMessage::Kind::GlobalPublished, round, transport::kServer}).empty();
}

void ClientAgent::wait_for_global(int round, const std::function<bool()>& abort) {
    const auto deadline = Clock::now() + std::chrono::duration<double>(config_.barrier_timeout_s);
    while (!in_phase(endpoint_.round(), "wait-global", [&] { return poll_global(round); })) {
        if (abort && abort()) throw RoundError(endpoint_.round(), "wait-global", "aborted");
        if (Clock::now() >= deadline) throw BarrierTimeout(endpoint_.round(), "wait-global", {transport::kServer});
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_interval_ms));
    }
}

void ClientAgent::train_round(int round) {
    metrics::RoundTimers* tm = config_.profile_timing ? &timers_[round] : nullptr;
    if (tm && context_.preparation_ms > 0.0 && timers_.size() == 1)
        tm->add(metrics::RoundTimers::Overhead, std::chrono::duration_cast<std::chrono::nanoseconds>(
                                                    std::chrono::duration<double, std::milli>(context_.preparation_ms)));
    const auto blob = in_phase(round, "download", [&] {
        return timed(tm, metrics::RoundTimers::Download, [&] { return endpoint_.get(BlobKey::global(round - 1)); });
    });
    auto params = in_phase(round, "download", [&] {
        return timed(tm, metrics::RoundTimers::Overhead,
                     [&] { return transport::deserialize_params(blob, config_.arch); });
    });
    in_phase(round, "train", [&] {
        timed(tm, metrics::RoundTimers::Training, [&] {
            if (!config_.persist_optimizer_state || !optimizer_)
                optimizer_ = seqnet::AdamState<double>::fresh(config_.arch);
            for (int e = 0; e < config_.local_epochs; ++e) {
                seqnet::LocalHyper hyper{config_.learning_rate, config_.batch_size,
                                         client_stream_seed(config_.seed, round, context_.client_id, e)};
                auto res = seqnet::train_local_epoch(params, *context_.embedding, *context_.data, hyper,
                                                     std::move(*optimizer_));
                params = std::move(res.params);
                optimizer_ = std::move(res.optimizer);
            }
        });
    });
    const auto out = in_phase(round, "upload", [&] {
        return timed(tm, metrics::RoundTimers::Overhead,
                     [&] { return transport::serialize_params(params, config_.wire_dtype); });
    });
    in_phase(round, "upload", [&] {
        timed(tm, metrics::RoundTimers::Upload, [&] {
            endpoint_.put(BlobKey::local(round, context_.client_id), out);
            endpoint_.post({SyncMessage::Kind::ClientDone, round, context_.client_id, now_ms()});
        });
    });
}

metrics::TimeProfile ClientAgent::profile(int round) const {
    const auto it = timers_.find(round);
    return it == timers_.end() ? metrics::TimeProfile{} : metrics::profile_round(it->second);
}

ServerAgent::ServerAgent(const FederationConfig& config, ServerContext context, transport::Transport& backend,
                         transport::CommLedger& ledger)
    : config_(config), context_(std::move(context)), endpoint_(backend, ledger, std::string(kServerEndpoint)) {
    if (!context_.test || !context_.embedding) throw std::invalid_argument("server context is incomplete");
    if (context_.test->size() == 0) throw std::invalid_argument("server context: empty test set");
    if (context_.shard_sizes.size() != static_cast<std::size_t>(config_.total_clients))
        throw std::invalid_argument("server context: need one shard size per client");
}

void ServerAgent::publish(int round, const Parameters<double>& params) {
    const int ledger_round = endpoint_.round();
    metrics::RoundTimers* tm = config_.profile_timing ? &timers_[ledger_round] : nullptr;
    const auto blob = in_phase(ledger_round, "publish", [&] {
        return timed(tm, metrics::RoundTimers::Overhead,
                     [&] { return transport::serialize_params(params, config_.wire_dtype); });
    });
    in_phase(ledger_round, "publish", [&] {
        timed(tm, metrics::RoundTimers::Upload, [&] {
            endpoint_.put(BlobKey::global(round), blob);
            endpoint_.post({SyncMessage::Kind::GlobalPublished, round, transport::kServer, now_ms()});
        });
    });
    global_ = params;
}

std::vector<int> ServerAgent::missing(int round, const std::vector<int>& participants) {
    const auto done = in_phase(round, "barrier", [&] {
        return endpoint_.poll({SyncMessage::Kind::ClientDone, round, std::nullopt});
    });
    std::set<int> seen;
    for (const auto& m : done) seen.insert(m.sender);
    std::vector<int> out;
    for (int k : participants)
        if (!seen.count(k)) out.push_back(k);
    return out;
}

void ServerAgent::barrier(int round, const std::vector<int>& participants, const std::function<bool()>& abort) {
    const auto deadline = Clock::now() + std::chrono::duration<double>(config_.barrier_timeout_s);
    for (;;) {
        auto left = missing(round, participants);
        if (left.empty()) return;
        if (abort && abort()) throw RoundError(round, "barrier", "aborted; missing: " + join_ids(left));
        if (Clock::now() >= deadline) throw BarrierTimeout(round, "barrier", std::move(left));
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_interval_ms));
    }
}

RoundRecord ServerAgent::aggregate(int round, const std::vector<int>& participants) {
    metrics::RoundTimers* tm = config_.profile_timing ? &timers_[round] : nullptr;
    std::vector<int> ids = participants;
    std::sort(ids.begin(), ids.end());
    std::vector<Parameters<double>> locals;
    locals.reserve(ids.size());
    for (int k : ids) {
        const auto blob = in_phase(round, "collect", [&] {
            return timed(tm, metrics::RoundTimers::Download, [&] { return endpoint_.get(BlobKey::local(round, k)); });
        });
        locals.push_back(in_phase(round, "collect", [&] {
            return timed(tm, metrics::RoundTimers::Overhead,
                         [&] { return transport::deserialize_params(blob, config_.arch); });
        }));
    }
    auto global = in_phase(round, "aggregate", [&] {
        return timed(tm, metrics::RoundTimers::Overhead, [&] {
            std::vector<Contribution<double>> contributions;
            for (std::size_t i = 0; i < ids.size(); ++i)
                contributions.push_back({&locals[i], context_.shard_sizes.at(static_cast<std::size_t>(ids[i]))});
            return fedavg(contributions);
        });
    });

    RoundRecord record;
    record.round = round;
    record.participants = ids;
    in_phase(round, "evaluate", [&] {
        record.global = measure(transport::kServer, global, context_);
        for (std::size_t i = 0; i < ids.size(); ++i) record.locals.push_back(measure(ids[i], locals[i], context_));
        if (!context_.objective_shards.empty()) {
            std::vector<ShardView> views;
            for (int k : ids) views.push_back(context_.objective_shards.at(static_cast<std::size_t>(k)));
            record.global_objective = global_objective(views, global);
        }
        if (config_.profile_timing)
            inference_us_[round] = metrics::profile_inference(global, *context_.embedding, inference_sample(*context_.test));
    });
    publish(round, global);
    return record;
}

metrics::TimeProfile ServerAgent::profile(int round) const {
    const auto it = timers_.find(round);
    const auto inf = inference_us_.find(round);
    return metrics::profile_round(it == timers_.end() ? metrics::RoundTimers{} : it->second,
                                  inf == inference_us_.end() ? 0.0 : inf->second);
}

namespace {

void finish_record(RoundRecord& record, const transport::CommLedger& ledger, ServerAgent& server,
                   const std::vector<std::unique_ptr<ClientAgent>>& agents, bool profile) {
    for (const auto& [key, counters] : ledger.snapshot())
        if (key.first == record.round) record.bytes[key.second] = counters;
    if (!profile) return;
    record.timings[std::string(kServerEndpoint)] = server.profile(record.round);
    for (const auto& a : agents)
        if (a && std::binary_search(record.participants.begin(), record.participants.end(), a->id()))
            record.timings[client_endpoint(a->id())] = a->profile(record.round);
}

void client_loop(const FederationConfig& config, ClientAgent& agent, const std::function<bool()>& abort) {
    for (int t = 1; t <= config.total_rounds; ++t) {
        const auto parts = select_clients(t, config);
        if (!std::binary_search(parts.begin(), parts.end(), agent.id())) continue;
        agent.endpoint().set_round(t);
        agent.wait_for_global(t - 1, abort);
        agent.train_round(t);
    }
}

}  // namespace

FederationResult run_federation(const FederationConfig& config, std::span<const ClientContext> clients,
                                const ServerContext& server_ctx, transport::Transport& transport,
                                const FederationHooks& hooks) {
    config.validate();
    transport::CommLedger ledger;
    ServerAgent server(config, server_ctx, transport, ledger);
    std::vector<std::unique_ptr<ClientAgent>> agents(static_cast<std::size_t>(config.total_clients));
    if (config.execution != ClientExecution::Remote) {
        if (clients.size() != static_cast<std::size_t>(config.total_clients))
            throw std::invalid_argument("run_federation: need one client context per client");
        for (int k : select_clients(1, config)) {
            const auto& ctx = clients[static_cast<std::size_t>(k)];
            if (ctx.client_id != k) throw std::invalid_argument("run_federation: client contexts must be in id order");
            agents[static_cast<std::size_t>(k)] = std::make_unique<ClientAgent>(config, ctx, transport, ledger);
        }
    }

    FederationResult result;
    const auto w0 = seqnet::init_parameters(config.arch, config.seed);
    if (hooks.on_global) hooks.on_global(0, w0);
    result.final_global = w0;

    std::atomic<bool> failed{false};
    std::exception_ptr client_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    const auto abort = [&] { return failed.load(); };
    if (config.execution == ClientExecution::Threads) {
        for (auto& a : agents) {
            if (!a) continue;
            threads.emplace_back([&, agent = a.get()] {
                try {
                    client_loop(config, *agent, abort);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!client_error) client_error = std::current_exception();
                    failed = true;
                }
            });
        }
    }
    auto join_all = [&] {
        for (auto& th : threads) th.join();
        threads.clear();
    };

    try {
        for (int t = 1; t <= config.total_rounds; ++t) {
            const auto parts = select_clients(t, config);
            server.endpoint().set_round(t);
            if (t == 1) server.publish(0, w0);
            if (config.execution == ClientExecution::Sequential) {
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    auto& agent = *agents[static_cast<std::size_t>(parts[i])];
                    agent.endpoint().set_round(t);
                    if (!agent.poll_global(t - 1))
                        throw RoundError(t, "broadcast", "global model of round " + std::to_string(t - 1) +
                                                             " is not published");
                    agent.train_round(t);
                    // everyone already done waits for the aggregate while the rest train
                    for (std::size_t j = 0; j <= i; ++j) agents[static_cast<std::size_t>(parts[j])]->poll_global(t);
                }
            }
            server.barrier(t, parts, abort);
            auto record = server.aggregate(t, parts);
            finish_record(record, ledger, server, agents, config.profile_timing);
            if (hooks.on_global) hooks.on_global(t, server.global());
            if (hooks.on_record) hooks.on_record(record);
            result.history.push_back(std::move(record));
        }
    } catch (...) {
        failed = true;
        join_all();
        if (client_error) std::rethrow_exception(client_error);
        throw;
    }
    join_all();
    if (client_error) std::rethrow_exception(client_error);
    if (config.total_rounds > 0) result.final_global = server.global();
    result.ledger = transport::ledger_report(ledger);
    return result;
}

FederationResult run_federation(const FederationConfig& config, const datashard::EncodedDataset& train,
                                const seqnet::EncodedBatch& test, const Eigen::MatrixXd& embedding,
                                transport::Transport& transport, const FederationHooks& hooks) {
    config.validate();
    const auto shards = datashard::make_shards(train, datashard::partition(train.labels, config.plan,
                                                                           partition_seed(config.seed)));
    std::vector<ClientContext> clients;
    ServerContext server{&test, &embedding, {}, {}};
    for (const auto& s : shards) {
        clients.push_back({s.client_id, &s.samples, &embedding, 0.0});
        server.shard_sizes.push_back(s.size());
        server.objective_shards.push_back({&s.samples, &embedding});
    }
    return run_federation(config, clients, server, transport, hooks);
}

void run_client_agent(const FederationConfig& config, const ClientContext& context, transport::Transport& transport,
                      transport::CommLedger& ledger) {
    config.validate();
    ClientAgent agent(config, context, transport, ledger);
    client_loop(config, agent, {});
}

FederationResult run_centralized(const FederationConfig& config, const seqnet::EncodedBatch& train,
                                 const seqnet::EncodedBatch& test, const Eigen::MatrixXd& embedding,
                                 const FederationHooks& hooks) {
    config.validate();
    if (train.size() == 0) throw std::invalid_argument("run_centralized: empty training set");
    const ServerContext ctx{&test, &embedding, {}, {}};
    FederationResult result;
    auto params = seqnet::init_parameters(config.arch, config.seed);
    if (hooks.on_global) hooks.on_global(0, params);
    std::optional<seqnet::AdamState<double>> optimizer;
    for (int t = 1; t <= config.total_rounds; ++t) {
        metrics::RoundTimers timers;
        metrics::RoundTimers* tm = config.profile_timing ? &timers : nullptr;
        in_phase(t, "train", [&] {
            timed(tm, metrics::RoundTimers::Training, [&] {
                if (!config.persist_optimizer_state || !optimizer)
                    optimizer = seqnet::AdamState<double>::fresh(config.arch);
                for (int e = 0; e < config.local_epochs; ++e) {
                    seqnet::LocalHyper hyper{config.learning_rate, config.batch_size,
                                             client_stream_seed(config.seed, t, 0, e)};
                    auto res = seqnet::train_local_epoch(params, embedding, train, hyper, std::move(*optimizer));
                    params = std::move(res.params);
                    optimizer = std::move(res.optimizer);
                }
            });
        });
        RoundRecord record;
        record.round = t;
        in_phase(t, "evaluate", [&] {
            record.global = measure(transport::kServer, params, ctx);
            const ShardView whole{&train, &embedding};
            record.global_objective = global_objective(std::span<const ShardView>(&whole, 1), params);
            if (config.profile_timing)
                record.timings["central"] = metrics::profile_round(
                    timers, metrics::profile_inference(params, embedding, inference_sample(test)));
        });
        if (hooks.on_global) hooks.on_global(t, params);
        if (hooks.on_record) hooks.on_record(record);
        result.history.push_back(std::move(record));
    }
    result.final_global = params;
    return result;
}

}  // namespace fedtext::flcore
