// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fedtext/cli/config.hpp"
#include "fedtext/cli/experiment.hpp"
#include "fedtext/cli/synth.hpp"
#include "fedtext/errors.hpp"
#include "fedtext/transport/socket.hpp"

namespace {

using namespace fedtext;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("fedtext");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("FEDTEXT_LOG"); env && *env) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string_view(env) != "off")
            spdlog::warn("FEDTEXT_LOG={} is not a level (trace, debug, info, warn, error, critical, off)", env);
        else
            spdlog::set_level(level);
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
    auto config = cli::load_config(config_path);
    if (seed) config.federation.seed = *seed;
    if (!out.empty()) config.output_dir = out;
    spdlog::info("{} run: {} rounds, {} clients, cell {}, seed {}", cli::to_string(config.mode),
                 config.federation.total_rounds, config.federation.total_clients,
                 seqnet::to_string(config.federation.arch.cell_kind), config.federation.seed);
    const auto result = cli::run_experiment(config, {true, &std::cout});
    if (!result.history.empty())
        spdlog::info("final accuracy {:.4f}; outputs in {}", result.history.back().global.eval.accuracy,
                     config.output_dir.string());
    return 0;
}

int cmd_ablate(const std::string& config_path) {
    const auto config = cli::load_config(config_path);
    const auto r = cli::run_tokenizer_ablation(config, {true, &std::cout});
    fmt::print("round  common  per_client\n");
    for (std::size_t i = 0; i < r.common_accuracy.size(); ++i)
        fmt::print("{:>5}  {:.4f}  {:.4f}\n", i + 1, r.common_accuracy[i], r.per_client_accuracy[i]);
    spdlog::info("series written to {}", (config.output_dir / cli::kAblationFile).string());
    return 0;
}

int cmd_synth(cli::SynthOptions o, const std::string& out) {
    const auto corpus = cli::generate_synthetic_corpus(o);
    cli::write_synthetic_corpus(corpus, out, o);
    spdlog::info("wrote {} training and {} test rows to {}", corpus.train.size(), corpus.test.size(), out);
    return 0;
}

int cmd_serve(const std::string& addr) {
    transport::SocketServer server(std::make_shared<transport::InMemoryTransport>());
    server.start(transport::Address::parse(addr));
    spdlog::info("store listening on port {}", server.port());
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    spdlog::info("served {} requests", server.requests_served());
    return 0;
}

int cmd_client(const std::string& addr, int client_id, const std::string& config_path) {
    const auto config = cli::load_config(config_path);
    spdlog::info("client {} connecting to {}", client_id, addr);
    cli::run_remote_client(config, client_id, addr);
    spdlog::info("client {} finished {} rounds", client_id, config.federation.total_rounds);
    return 0;
}

int cmd_predict(const std::string& model, const std::string& text) {
    const auto p = cli::predict_text(model, text);
    fmt::print("{}\n", textproc::label_name(p.label));
    spdlog::debug("scores {:.4f} {:.4f} {:.4f}", p.scores[0], p.scores[1], p.scores[2]);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Federated text classification with recurrent networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run a centralized or federated experiment");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out, "Override the output directory");

    auto* ablate = app.add_subcommand("ablate-tokenizer", "Compare common and per-client vocabularies");
    ablate->add_option("config", config_path, "Experiment config (JSON)")->required();

    cli::SynthOptions synth_opts;
    auto* synth = app.add_subcommand("synth", "Write a synthetic labeled corpus with embeddings");
    synth->add_option("--per-class", synth_opts.n_per_class, "Training rows per class")
        ->required()
        ->check(CLI::PositiveNumber);
    synth->add_option("--vocab-size", synth_opts.vocab_size, "Distinct words")->check(CLI::Range(4, 1000000));
    synth->add_option("--marker-rate", synth_opts.marker_rate, "Share of class keywords per text")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", synth_opts.seed, "Generator seed");
    synth->add_option("--out", out, "Output directory")->required();

    std::string addr;
    auto* serve = app.add_subcommand("serve", "Host the blob store and message board over TCP");
    serve->add_option("--addr", addr, "HOST:PORT to listen on")->required();

    int client_id = 0;
    auto* client = app.add_subcommand("client", "Run one federated client against a served store");
    client->add_option("--addr", addr, "HOST:PORT of the store")->required();
    client->add_option("--client-id", client_id, "Client id")->required();
    client->add_option("--config", config_path, "Experiment config (JSON)")->required();

    std::string model;
    std::string text;
    auto* predict = app.add_subcommand("predict", "Classify one message with a trained model");
    predict->add_option("--model", model, "final_model.bin written by run")->required();
    predict->add_option("--text", text, "Message to classify")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config_path, seed, out);
        if (*ablate) return cmd_ablate(config_path);
        if (*synth) return cmd_synth(synth_opts, out);
        if (*serve) return cmd_serve(addr);
        if (*client) return cmd_client(addr, client_id, config_path);
        if (*predict) return cmd_predict(model, text);
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 2;
}
