// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/cli/experiment.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "fedtext/errors.hpp"
#include "fedtext/rng.hpp"
#include "fedtext/textproc/embedding.hpp"
#include "fedtext/textproc/tokenizer.hpp"
#include "fedtext/transport/filesystem.hpp"
#include "fedtext/transport/socket.hpp"

namespace fedtext::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<std::string> corpus_texts(const fs::path& path) {
    if (path.extension() == ".csv") return datashard::read_labeled_csv(path).texts();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open tokenizer corpus " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

textproc::LabeledDataset subset(const textproc::LabeledDataset& data, const std::vector<std::size_t>& ids) {
    textproc::LabeledDataset out;
    out.samples.reserve(ids.size());
    for (auto i : ids) out.samples.push_back(data.samples.at(i));
    return out;
}

std::unique_ptr<transport::Transport> make_transport(const TransportConfig& t) {
    switch (t.backend) {
        case Backend::InMemory: return std::make_unique<transport::InMemoryTransport>();
        case Backend::Filesystem: {
            fs::remove(t.root / "board.log");
            fs::remove_all(t.root / "blobs");
            return std::make_unique<transport::FilesystemTransport>(t.root);
        }
        case Backend::Socket: {
            auto s = std::make_unique<transport::SocketTransport>(transport::Address::parse(t.address));
            transport::MessageFilter published{transport::SyncMessage::Kind::GlobalPublished, 0, std::nullopt};
            if (!s->poll(published).empty())
                throw std::runtime_error("the store at " + t.address +
                                         " already holds a run; restart `fedtext serve` before a new run");
            return s;
        }
    }
    throw std::logic_error("unknown backend");
}

template <typename Fn>
auto tagged(std::string_view phase, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const flcore::RoundError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("[{}] {}", phase, e.what()));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string summary_line(const flcore::RoundRecord& r, int total_rounds, bool federated) {
    std::uint64_t up = 0;
    std::uint64_t down = 0;
    for (const auto& [endpoint, c] : r.bytes) {
        if (endpoint.rfind("client-", 0) != 0) continue;
        up += c.transmitted_bytes;
        down += c.received_bytes;
    }
    auto line = fmt::format("{} {:>3}/{}  acc {:.4f}  prec {:.4f}  rec {:.4f}  loss {:.4f}",
                            federated ? "round" : "epoch", r.round, total_rounds, r.global.eval.accuracy,
                            r.global.eval.macro_precision, r.global.eval.macro_recall, r.global.test_loss);
    if (federated)
        line += fmt::format("  up {:.2f} MB  down {:.2f} MB", static_cast<double>(up) / transport::kBytesPerMB,
                            static_cast<double>(down) / transport::kBytesPerMB);
    return line;
}

void write_model(const fs::path& dir, const ExperimentConfig& config, const textproc::Vocabulary& vocab,
                 const seqnet::Parameters<double>& params) {
    const auto blob = transport::serialize_params(params, config.federation.wire_dtype);
    std::ofstream out(dir / kModelFile, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / kModelFile).string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    vocab.save(dir / kVocabFile);
    const auto& a = config.federation.arch;
    nlohmann::ordered_json info = {{"cell", std::string(seqnet::to_string(a.cell_kind))},
                                   {"embed_dim", a.embed_dim},
                                   {"recurrent_units", a.recurrent_units},
                                   {"dense_units", a.dense_units},
                                   {"num_classes", a.num_classes},
                                   {"dropout_rate", a.dropout_rate},
                                   {"max_seq_len", a.max_seq_len},
                                   {"vocab", std::string(kVocabFile)},
                                   {"vocab_max_size", config.vocab_max_size},
                                   {"embedding_path", fs::absolute(config.embedding_path).string()}};
    write_text(dir / kModelInfoFile, info.dump(2) + "\n");
}

struct Outputs {
    std::vector<metrics::MetricsRow> metrics;
    std::vector<metrics::ProfileRow> profile;
};

void collect(const flcore::RoundRecord& r, Outputs& out) {
    out.metrics.push_back({r.round, "global", r.global.eval});
    for (const auto& l : r.locals) out.metrics.push_back({r.round, flcore::client_endpoint(l.client), l.eval});
    for (const auto& [endpoint, p] : r.timings) out.profile.push_back({r.round, endpoint, p});
}

}  // namespace

const Eigen::MatrixXd& PreparedExperiment::embedding_of(int client) const {
    const auto& c = clients.at(static_cast<std::size_t>(client));
    return c.embedding.size() > 0 ? c.embedding : embedding;
}

std::string noise_word(int client, int index) { return fmt::format("noise{}x{}", client, index); }

textproc::LabeledDataset inject_client_noise(const textproc::LabeledDataset& data, int client, const NoiseConfig& noise,
                                             std::uint64_t seed) {
    if (!noise.enabled()) return data;
    Rng rng(derive_seed(seed, {0x4015E, client}));
    textproc::LabeledDataset out;
    out.samples.reserve(data.size());
    for (const auto& s : data.samples) {
        auto words = textproc::tokenize(s.text);
        for (int i = 0; i < noise.client_noise_tokens; ++i) {
            const auto w = noise_word(client, static_cast<int>(uniform_index(
                                                  rng, static_cast<std::uint64_t>(noise.noise_vocab_per_client))));
            const auto pos = uniform_index(rng, words.size() + 1);
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), w);
        }
        out.samples.push_back({fmt::format("{}", fmt::join(words, " ")), s.label});
    }
    return out;
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config, std::optional<int> only_client) {
    const auto start = Clock::now();
    const auto& fed = config.federation;
    const int dim = fed.arch.embed_dim;
    const int seq_len = fed.arch.max_seq_len;
    const bool per_client = config.tokenizer_mode == TokenizerMode::PerClient;

    PreparedExperiment p;
    auto train_text = datashard::read_labeled_csv(config.train_csv);
    const auto test_text = datashard::read_labeled_csv(config.test_csv);
    if (train_text.size() == 0) throw std::runtime_error("training set " + config.train_csv.string() + " is empty");
    if (test_text.size() == 0) throw std::runtime_error("test set " + config.test_csv.string() + " is empty");

    if (!config.vocab_path.empty()) {
        p.vocab = textproc::Vocabulary::load(config.vocab_path, config.vocab_max_size);
    } else {
        const auto corpus = corpus_texts(config.tokenizer_corpus);
        p.vocab = textproc::build_vocab(corpus, config.vocab_max_size);
    }
    const auto table = textproc::read_embedding_table(config.embedding_path, dim, [&](std::string_view w) {
        return per_client || p.vocab.contains(w);
    });
    p.embedding = textproc::build_embedding_matrix(table, p.vocab, dim).vectors;

    if (config.augmentation.enabled) {
        textproc::EmbeddingMatrix em;
        em.vectors = p.embedding;
        train_text = textproc::augment_balance(
            train_text, em, p.vocab,
            {config.augmentation.sub_prob, config.augmentation.min_similarity, derive_seed(fed.seed, {0xA06})});
    }
    p.train = datashard::encode_dataset(train_text, p.vocab, seq_len);
    p.test = datashard::encode_dataset(test_text, p.vocab, seq_len);
    p.shared_preparation_ms = ms_since(start);
    if (config.mode != RunMode::Federated) return p;

    p.assignment = datashard::partition(p.train.labels, fed.plan, flcore::partition_seed(fed.seed));
    p.clients.resize(p.assignment.size());
    for (std::size_t k = 0; k < p.assignment.size(); ++k) {
        auto& c = p.clients[k];
        c.client_id = static_cast<int>(k);
        if (only_client && *only_client != c.client_id) continue;
        const auto client_start = Clock::now();
        const auto shard = inject_client_noise(subset(train_text, p.assignment[k]), c.client_id, config.noise, fed.seed);
        if (per_client) {
            c.vocab = textproc::build_vocab(shard.texts(), config.vocab_max_size);
            c.embedding = textproc::build_embedding_matrix(table, c.vocab, dim).vectors;
            c.data = datashard::encode_dataset(shard, c.vocab, seq_len);
        } else {
            c.data = datashard::encode_dataset(shard, p.vocab, seq_len);
        }
        c.preparation_ms = p.shared_preparation_ms + ms_since(client_start);
    }
    return p;
}

flcore::FederationResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const auto prep = tagged("prepare", [&] { return prepare_experiment(config); });
    const auto& fed = config.federation;
    const bool federated = config.mode == RunMode::Federated;

    std::ofstream rounds;
    if (options.write_outputs) {
        tagged("output", [&] {
            fs::create_directories(config.output_dir);
            write_text(config.output_dir / kResolvedConfigFile, dump_config(config) + "\n");
            rounds.open(config.output_dir / kRoundsFile, std::ios::binary | std::ios::trunc);
            if (!rounds) throw std::runtime_error("cannot write " + (config.output_dir / kRoundsFile).string());
            return 0;
        });
    }

    Outputs outputs;
    flcore::FederationHooks hooks;
    hooks.on_record = [&](const flcore::RoundRecord& r) {
        if (rounds.is_open()) rounds << flcore::to_json_line(r) << '\n' << std::flush;
        collect(r, outputs);
        if (options.summary) fmt::print(*options.summary, "{}\n", summary_line(r, fed.total_rounds, federated));
    };

    flcore::FederationResult result;
    if (!federated) {
        result = flcore::run_centralized(fed, prep.train.samples, prep.test.samples, prep.embedding, hooks);
    } else {
        const auto backend = tagged("connect", [&] { return make_transport(config.transport); });
        std::vector<flcore::ClientContext> clients;
        flcore::ServerContext server{&prep.test.samples, &prep.embedding, {}, {}};
        for (const auto& c : prep.clients) {
            const auto* emb = &prep.embedding_of(c.client_id);
            clients.push_back({c.client_id, &c.data.samples, emb, c.preparation_ms});
            server.shard_sizes.push_back(c.data.size());
            server.objective_shards.push_back({&c.data.samples, emb});
        }
        result = flcore::run_federation(fed, clients, server, *backend, hooks);
    }

    if (options.write_outputs) {
        tagged("output", [&] {
            metrics::write_metrics_csv(config.output_dir / kMetricsFile, outputs.metrics);
            metrics::write_profile_csv(config.output_dir / kProfileFile, outputs.profile);
            transport::write_ledger_csv(config.output_dir / kLedgerFile, result.ledger);
            write_model(config.output_dir, config, prep.vocab, result.final_global);
            return 0;
        });
    }
    return result;
}

AblationResult run_tokenizer_ablation(const ExperimentConfig& config, const RunOptions& options) {
    if (config.mode != RunMode::Federated) throw ConfigError("mode", "the tokenizer ablation needs mode \"federated\"");
    if (!config.vocab_path.empty())
        throw ConfigError("vocab_path", "the tokenizer ablation builds vocabularies; use tokenizer_corpus");
    AblationResult out;
    const auto series = [](const flcore::FederationResult& r) {
        std::vector<double> acc;
        for (const auto& rec : r.history) acc.push_back(rec.global.eval.accuracy);
        return acc;
    };
    for (const auto mode : {TokenizerMode::Common, TokenizerMode::PerClient}) {
        auto c = config;
        c.tokenizer_mode = mode;
        c.output_dir = config.output_dir / std::string(to_string(mode));
        if (options.summary) fmt::print(*options.summary, "# tokenizer: {}\n", to_string(mode));
        const auto acc = series(run_experiment(c, options));
        (mode == TokenizerMode::Common ? out.common_accuracy : out.per_client_accuracy) = acc;
    }
    if (options.write_outputs) {
        std::string csv = "round,common_accuracy,per_client_accuracy\n";
        for (std::size_t i = 0; i < out.common_accuracy.size(); ++i)
            csv += fmt::format("{},{:.6f},{:.6f}\n", i + 1, out.common_accuracy[i], out.per_client_accuracy[i]);
        write_text(config.output_dir / kAblationFile, csv);
    }
    return out;
}

void run_remote_client(const ExperimentConfig& config, int client_id, const std::string& address) {
    config.validate();
    const auto& fed = config.federation;
    if (config.mode != RunMode::Federated) throw ConfigError("mode", "a client needs mode \"federated\"");
    if (client_id < 0 || client_id >= fed.total_clients)
        throw ConfigError("client-id", fmt::format("must lie in [0, {})", fed.total_clients));
    if (fed.dropout_client && *fed.dropout_client == client_id)
        throw ConfigError("client-id", "this client is configured as the dropped client");
    const auto prep = tagged("prepare", [&] { return prepare_experiment(config, client_id); });
    const auto& c = prep.clients.at(static_cast<std::size_t>(client_id));
    transport::SocketTransport link(tagged("connect", [&] { return transport::Address::parse(address); }));
    transport::CommLedger ledger;
    flcore::ClientContext ctx{client_id, &c.data.samples, &prep.embedding_of(client_id), c.preparation_ms};
    flcore::run_client_agent(fed, ctx, link, ledger);
}

Prediction predict_text(const fs::path& model_blob, std::string_view text) {
    auto info_path = model_blob;
    info_path.replace_extension(".json");
    std::ifstream info_in(info_path, std::ios::binary);
    if (!info_in) throw std::runtime_error("model description " + info_path.string() + " not found");
    const auto info = nlohmann::json::parse(info_in);

    seqnet::ArchitectureSpec a;
    a.cell_kind = seqnet::parse_cell_kind(info.at("cell").get<std::string>());
    a.embed_dim = info.at("embed_dim").get<int>();
    a.recurrent_units = info.at("recurrent_units").get<int>();
    a.dense_units = info.at("dense_units").get<int>();
    a.num_classes = info.at("num_classes").get<int>();
    a.dropout_rate = info.at("dropout_rate").get<double>();
    a.max_seq_len = info.at("max_seq_len").get<int>();

    std::ifstream blob_in(model_blob, std::ios::binary);
    if (!blob_in) throw std::runtime_error("cannot open " + model_blob.string());
    const transport::Bytes blob((std::istreambuf_iterator<char>(blob_in)), std::istreambuf_iterator<char>());
    const auto params = transport::deserialize_params<double>(blob, a);

    const auto vocab = textproc::Vocabulary::load(info_path.parent_path() / info.at("vocab").get<std::string>(),
                                                  info.at("vocab_max_size").get<std::size_t>());
    const auto emb = textproc::load_embeddings(info.at("embedding_path").get<std::string>(), vocab, a.embed_dim);
    const auto ids = textproc::encode_and_pad(text, vocab, a.max_seq_len);
    seqnet::TokenMatrix row(1, a.max_seq_len);
    for (int t = 0; t < a.max_seq_len; ++t) row(0, t) = ids[static_cast<std::size_t>(t)];
    const auto fwd = seqnet::forward(params, emb.vectors, row, seqnet::ForwardMode::eval());

    Prediction p;
    for (int q = 0; q < textproc::kNumClasses && q < fwd.scores.cols(); ++q) p.scores[static_cast<std::size_t>(q)] = fwd.scores(0, q);
    p.label = seqnet::argmax_lowest(fwd.scores.row(0));
    return p;
}

}  // namespace fedtext::cli
