// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedtext/errors.hpp"
#include "fedtext/transport/socket.hpp"

namespace fedtext::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// A JSON object whose keys must all be consumed.
class Section {
public:
    Section(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {
        if (!node_.is_object()) throw ConfigError(prefix_.empty() ? "config" : prefix_, "expected an object");
    }

    std::string field(std::string_view key) const {
        return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
    }

    const json* find(std::string_view key) {
        seen_.insert(std::string(key));
        const auto it = node_.find(std::string(key));
        return it == node_.end() ? nullptr : &*it;
    }

    template <typename Fn>
    void with(std::string_view key, Fn&& fn) {
        if (const auto* v = find(key)) fn(*v, field(key));
    }

    void read(std::string_view key, bool& out) {
        with(key, [&](const json& v, const std::string& f) {
            if (!v.is_boolean()) throw ConfigError(f, "expected true or false");
            out = v.get<bool>();
        });
    }

    void read(std::string_view key, double& out) {
        with(key, [&](const json& v, const std::string& f) {
            if (!v.is_number()) throw ConfigError(f, "expected a number");
            out = v.get<double>();
        });
    }

    void read(std::string_view key, int& out) {
        with(key, [&](const json& v, const std::string& f) { out = as_int(v, f); });
    }

    void read(std::string_view key, std::string& out) {
        with(key, [&](const json& v, const std::string& f) { out = as_string(v, f); });
    }

    static int as_int(const json& v, const std::string& f) {
        if (!v.is_number_integer()) throw ConfigError(f, "expected an integer");
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            throw ConfigError(f, "integer out of range");
        return static_cast<int>(x);
    }

    static std::string as_string(const json& v, const std::string& f) {
        if (!v.is_string()) throw ConfigError(f, "expected a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }

private:
    const json& node_;
    std::string prefix_;
    std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

void require_file(const fs::path& p, const std::string& field) {
    if (p.empty()) throw ConfigError(field, "is required");
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw ConfigError(field, "file not found: " + p.string());
}

datashard::ShardPlan parse_plan(const json& v, const std::string& f, std::string& name) {
    try {
        if (v.is_string()) {
            name = v.get<std::string>();
            if (name == "table1") return datashard::ShardPlan::table1();
            if (name == "iid") return datashard::ShardPlan{};  // client count set later
            throw ConfigError(f, "expected \"iid\", \"table1\" or a matrix of percentages");
        }
        if (!v.is_array() || v.empty()) throw ConfigError(f, "expected \"iid\", \"table1\" or a matrix of percentages");
        std::vector<std::vector<double>> rows;
        for (const auto& row : v) {
            if (!row.is_array()) throw ConfigError(f, "matrix rows must be arrays");
            auto& r = rows.emplace_back();
            for (const auto& x : row) {
                if (!x.is_number()) throw ConfigError(f, "matrix entries must be numbers");
                r.push_back(x.get<double>());
            }
        }
        name = "matrix";
        return datashard::ShardPlan::non_iid_percent(rows);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(f, e.what());
    }
}

void parse_federation(Section& s, ExperimentConfig& c, bool& participants_set) {
    auto& f = c.federation;
    s.read("rounds", f.total_rounds);
    s.read("clients", f.total_clients);
    s.with("participants", [&](const json& v, const std::string& field) {
        f.participants_per_round = Section::as_int(v, field);
        participants_set = true;
    });
    s.read("learning_rate", f.learning_rate);
    s.read("batch_size", f.batch_size);
    s.read("local_epochs", f.local_epochs);
    s.with("dropout_client", [&](const json& v, const std::string& field) {
        if (!v.is_null()) f.dropout_client = Section::as_int(v, field);
    });
    s.read("barrier_timeout_s", f.barrier_timeout_s);
    s.read("poll_interval_ms", f.poll_interval_ms);
    s.with("client_execution", [&](const json& v, const std::string& field) {
        try {
            f.execution = flcore::parse_client_execution(Section::as_string(v, field));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field, e.what());
        }
    });
    s.read("persist_optimizer_state", f.persist_optimizer_state);
    s.finish();
}

void parse_model(Section& s, seqnet::ArchitectureSpec& a) {
    s.with("cell", [&](const json& v, const std::string& field) {
        try {
            a.cell_kind = seqnet::parse_cell_kind(Section::as_string(v, field));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field, e.what());
        }
    });
    s.read("embed_dim", a.embed_dim);
    s.read("recurrent_units", a.recurrent_units);
    s.read("dense_units", a.dense_units);
    s.read("dropout_rate", a.dropout_rate);
    s.read("max_seq_len", a.max_seq_len);
    s.finish();
}

}  // namespace

std::string_view to_string(RunMode m) { return m == RunMode::Centralized ? "centralized" : "federated"; }
std::string_view to_string(TokenizerMode m) { return m == TokenizerMode::Common ? "common" : "per_client"; }
std::string_view to_string(Backend b) {
    switch (b) {
        case Backend::InMemory: return "memory";
        case Backend::Filesystem: return "filesystem";
        case Backend::Socket: return "socket";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    require_file(train_csv, "train_csv");
    require_file(test_csv, "test_csv");
    require_file(embedding_path, "embedding_path");
    if (!tokenizer_corpus.empty() && !vocab_path.empty())
        throw ConfigError("vocab_path", "set either tokenizer_corpus or vocab_path, not both");
    if (vocab_path.empty())
        require_file(tokenizer_corpus, "tokenizer_corpus");
    else
        require_file(vocab_path, "vocab_path");
    if (vocab_max_size < 3) throw ConfigError("vocab_max_size", "must be >= 3");

    const auto& a = federation.arch;
    if (a.embed_dim < 1) throw ConfigError("model.embed_dim", "must be >= 1");
    if (a.recurrent_units < 1) throw ConfigError("model.recurrent_units", "must be >= 1");
    if (a.dense_units < 1) throw ConfigError("model.dense_units", "must be >= 1");
    if (a.max_seq_len < 1) throw ConfigError("model.max_seq_len", "must be >= 1");
    if (!(a.dropout_rate >= 0.0 && a.dropout_rate < 1.0)) throw ConfigError("model.dropout_rate", "must lie in [0, 1)");
    federation.validate();

    if (tokenizer_mode == TokenizerMode::PerClient && mode != RunMode::Federated)
        throw ConfigError("tokenizer_mode", "per_client requires mode \"federated\"");
    if (tokenizer_mode == TokenizerMode::PerClient && !vocab_path.empty())
        throw ConfigError("tokenizer_mode", "per_client builds its vocabularies from data; remove vocab_path");
    if (!(augmentation.sub_prob >= 0.0 && augmentation.sub_prob <= 1.0))
        throw ConfigError("augmentation.sub_prob", "must lie in [0, 1]");
    if (!(augmentation.min_similarity >= -1.0 && augmentation.min_similarity <= 1.0))
        throw ConfigError("augmentation.min_similarity", "must lie in [-1, 1]");
    if (noise.client_noise_tokens < 0) throw ConfigError("ablation.client_noise_tokens", "must be >= 0");
    if (noise.noise_vocab_per_client < 0) throw ConfigError("ablation.noise_vocab_per_client", "must be >= 0");
    if ((noise.client_noise_tokens > 0) != (noise.noise_vocab_per_client > 0))
        throw ConfigError("ablation.noise_vocab_per_client", "set both ablation fields or neither");
    if (noise.enabled() && mode != RunMode::Federated)
        throw ConfigError("ablation", "noise injection requires mode \"federated\"");

    switch (transport.backend) {
        case Backend::InMemory: break;
        case Backend::Filesystem:
            if (transport.root.empty()) throw ConfigError("transport.root", "is required for the filesystem backend");
            break;
        case Backend::Socket:
            try {
                const auto addr = transport::Address::parse(transport.address);
                if (addr.port == 0) throw std::invalid_argument("port must be nonzero");
            } catch (const std::exception& e) {
                throw ConfigError("transport.address", e.what());
            }
            break;
    }
    if (mode == RunMode::Centralized && transport.backend != Backend::InMemory)
        throw ConfigError("transport.backend", "centralized mode has no transport; use \"memory\"");
    if (federation.execution == flcore::ClientExecution::Remote && transport.backend != Backend::Socket)
        throw ConfigError("federation.client_execution", "remote clients need the socket backend");
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }

    ExperimentConfig c;
    Section root(doc, "");
    std::string s;

    root.with("mode", [&](const json& v, const std::string& f) {
        const auto m = Section::as_string(v, f);
        if (m == "centralized")
            c.mode = RunMode::Centralized;
        else if (m == "federated")
            c.mode = RunMode::Federated;
        else
            throw ConfigError(f, "expected \"centralized\" or \"federated\"");
    });
    const auto path_field = [&](std::string_view key, fs::path& out) {
        root.with(key, [&](const json& v, const std::string& f) { out = resolve(base_dir, Section::as_string(v, f)); });
    };
    path_field("train_csv", c.train_csv);
    path_field("test_csv", c.test_csv);
    path_field("embedding_path", c.embedding_path);
    path_field("tokenizer_corpus", c.tokenizer_corpus);
    path_field("vocab_path", c.vocab_path);
    path_field("output_dir", c.output_dir);
    if (c.output_dir == fs::path("fedtext-out")) c.output_dir = resolve(base_dir, "fedtext-out");
    if (c.tokenizer_corpus.empty() && c.vocab_path.empty()) c.tokenizer_corpus = c.train_csv;

    root.with("vocab_max_size", [&](const json& v, const std::string& f) {
        const int n = Section::as_int(v, f);
        if (n < 3) throw ConfigError(f, "must be >= 3");
        c.vocab_max_size = static_cast<std::size_t>(n);
    });
    root.with("tokenizer_mode", [&](const json& v, const std::string& f) {
        const auto m = Section::as_string(v, f);
        if (m == "common")
            c.tokenizer_mode = TokenizerMode::Common;
        else if (m == "per_client")
            c.tokenizer_mode = TokenizerMode::PerClient;
        else
            throw ConfigError(f, "expected \"common\" or \"per_client\"");
    });

    bool participants_set = false;
    root.with("federation", [&](const json& v, const std::string& f) {
        Section sec(v, f);
        parse_federation(sec, c, participants_set);
    });
    root.with("model", [&](const json& v, const std::string& f) {
        Section sec(v, f);
        parse_model(sec, c.federation.arch);
    });
    if (!participants_set)
        c.federation.participants_per_round = c.federation.total_clients - (c.federation.dropout_client ? 1 : 0);

    bool plan_set = false;
    root.with("shard_plan", [&](const json& v, const std::string& f) {
        c.federation.plan = parse_plan(v, f, c.shard_plan_name);
        plan_set = true;
    });
    if (!plan_set || c.shard_plan_name == "iid") c.federation.plan = datashard::ShardPlan::iid(c.federation.total_clients);
    if (c.mode == RunMode::Centralized) {
        if (plan_set && c.shard_plan_name != "iid")
            throw ConfigError("shard_plan", "centralized mode does not shard the data");
    }

    root.with("augmentation", [&](const json& v, const std::string& f) {
        Section sec(v, f);
        sec.read("enabled", c.augmentation.enabled);
        sec.read("sub_prob", c.augmentation.sub_prob);
        sec.read("min_similarity", c.augmentation.min_similarity);
        sec.finish();
    });
    root.with("transport", [&](const json& v, const std::string& f) {
        Section sec(v, f);
        sec.with("backend", [&](const json& b, const std::string& bf) {
            const auto name = Section::as_string(b, bf);
            if (name == "memory")
                c.transport.backend = Backend::InMemory;
            else if (name == "filesystem")
                c.transport.backend = Backend::Filesystem;
            else if (name == "socket")
                c.transport.backend = Backend::Socket;
            else
                throw ConfigError(bf, "expected \"memory\", \"filesystem\" or \"socket\"");
        });
        sec.with("root", [&](const json& r, const std::string& rf) {
            c.transport.root = resolve(base_dir, Section::as_string(r, rf));
        });
        sec.read("address", c.transport.address);
        sec.finish();
    });
    root.with("wire_dtype", [&](const json& v, const std::string& f) {
        try {
            c.federation.wire_dtype = transport::parse_wire_dtype(Section::as_string(v, f));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(f, e.what());
        }
    });
    root.with("ablation", [&](const json& v, const std::string& f) {
        Section sec(v, f);
        sec.read("client_noise_tokens", c.noise.client_noise_tokens);
        sec.read("noise_vocab_per_client", c.noise.noise_vocab_per_client);
        sec.finish();
    });
    root.read("profile_timing", c.federation.profile_timing);
    root.with("seed", [&](const json& v, const std::string& f) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(f, "expected a non-negative integer");
        c.federation.seed = v.get<std::uint64_t>();
    });
    root.finish();

    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), fs::absolute(file).parent_path());
}

std::string dump_config(const ExperimentConfig& c) {
    json::object_t d;
    const auto abs = [](const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).string(); };
    d["mode"] = std::string(to_string(c.mode));
    d["train_csv"] = abs(c.train_csv);
    d["test_csv"] = abs(c.test_csv);
    d["embedding_path"] = abs(c.embedding_path);
    if (!c.tokenizer_corpus.empty()) d["tokenizer_corpus"] = abs(c.tokenizer_corpus);
    if (!c.vocab_path.empty()) d["vocab_path"] = abs(c.vocab_path);
    d["vocab_max_size"] = c.vocab_max_size;
    d["tokenizer_mode"] = std::string(to_string(c.tokenizer_mode));
    const auto& f = c.federation;
    json fed = {{"rounds", f.total_rounds},
                {"clients", f.total_clients},
                {"participants", f.participants_per_round},
                {"learning_rate", f.learning_rate},
                {"batch_size", f.batch_size},
                {"local_epochs", f.local_epochs},
                {"barrier_timeout_s", f.barrier_timeout_s},
                {"poll_interval_ms", f.poll_interval_ms},
                {"client_execution", std::string(flcore::to_string(f.execution))},
                {"persist_optimizer_state", f.persist_optimizer_state}};
    fed["dropout_client"] = f.dropout_client ? json(*f.dropout_client) : json(nullptr);
    d["federation"] = fed;
    d["model"] = {{"cell", std::string(seqnet::to_string(f.arch.cell_kind))},
                  {"embed_dim", f.arch.embed_dim},
                  {"recurrent_units", f.arch.recurrent_units},
                  {"dense_units", f.arch.dense_units},
                  {"dropout_rate", f.arch.dropout_rate},
                  {"max_seq_len", f.arch.max_seq_len}};
    if (c.shard_plan_name == "matrix") {
        json rows = json::array();
        for (Eigen::Index i = 0; i < f.plan.proportions.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index q = 0; q < f.plan.proportions.cols(); ++q) row.push_back(100.0 * f.plan.proportions(i, q));
            rows.push_back(row);
        }
        d["shard_plan"] = rows;
    } else {
        d["shard_plan"] = c.shard_plan_name;
    }
    d["augmentation"] = {{"enabled", c.augmentation.enabled},
                         {"sub_prob", c.augmentation.sub_prob},
                         {"min_similarity", c.augmentation.min_similarity}};
    json t = {{"backend", std::string(to_string(c.transport.backend))}};
    if (!c.transport.root.empty()) t["root"] = abs(c.transport.root);
    if (!c.transport.address.empty()) t["address"] = c.transport.address;
    d["transport"] = t;
    d["wire_dtype"] = std::string(transport::to_string(f.wire_dtype));
    d["ablation"] = {{"client_noise_tokens", c.noise.client_noise_tokens},
                     {"noise_vocab_per_client", c.noise.noise_vocab_per_client}};
    d["profile_timing"] = f.profile_timing;
    d["output_dir"] = abs(c.output_dir);
    d["seed"] = f.seed;
    return json(d).dump(2);
}

}  // namespace fedtext::cli
