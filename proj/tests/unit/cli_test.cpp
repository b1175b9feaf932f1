// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <functional>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fedtext/cli/config.hpp"
#include "fedtext/cli/experiment.hpp"
#include "fedtext/cli/synth.hpp"
#include "fedtext/errors.hpp"
#include "fedtext/rng.hpp"
#include "fedtext/textproc/tokenizer.hpp"
#include "support/temp_dir.hpp"

namespace fedtext::cli {
namespace {

using fedtext::testing::read_file;
using fedtext::testing::TempDir;
using json = nlohmann::json;

SynthOptions small_corpus(std::uint64_t seed = 0) {
    SynthOptions o;
    o.n_per_class = 20;
    o.test_per_class = 10;
    o.vocab_size = 60;
    o.markers_per_class = 5;
    o.min_tokens = 6;
    o.max_tokens = 8;
    o.embed_dim = 6;
    o.seed = seed;
    return o;
}

/// A corpus in `dir` plus a valid config document pointing at it with relative paths.
json make_workspace(const std::filesystem::path& dir) {
    const auto o = small_corpus();
    write_synthetic_corpus(generate_synthetic_corpus(o), dir, o);
    return {{"mode", "federated"},
            {"train_csv", "train.csv"},
            {"test_csv", "test.csv"},
            {"embedding_path", "embeddings.txt"},
            {"federation", {{"rounds", 2}, {"clients", 3}, {"learning_rate", 0.01}, {"batch_size", 8}}},
            {"model",
             {{"cell", "gru"}, {"embed_dim", 6}, {"recurrent_units", 4}, {"dense_units", 5}, {"max_seq_len", 8}}},
            {"profile_timing", false},
            {"output_dir", "out"},
            {"seed", 7}};
}

ExperimentConfig parse(const json& doc, const std::filesystem::path& dir) { return parse_config(doc.dump(), dir); }

std::string field_of(const json& doc, const std::filesystem::path& dir) {
    try {
        parse(doc, dir);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<accepted>";
}

TEST(Config, ParsesDefaultsAndResolvesRelativePaths) {
    TempDir tmp;
    const auto c = parse(make_workspace(tmp.path()), tmp.path());
    EXPECT_EQ(c.mode, RunMode::Federated);
    EXPECT_EQ(c.train_csv, tmp.path() / "train.csv");
    EXPECT_EQ(c.tokenizer_corpus, c.train_csv);
    EXPECT_TRUE(c.vocab_path.empty());
    EXPECT_EQ(c.output_dir, tmp.path() / "out");
    EXPECT_EQ(c.federation.total_clients, 3);
    EXPECT_EQ(c.federation.participants_per_round, 3);
    EXPECT_EQ(c.federation.plan.mode, datashard::ShardPlan::Mode::IID);
    EXPECT_EQ(c.federation.plan.clients, 3);
    EXPECT_EQ(c.federation.batch_size, 8);
    EXPECT_EQ(c.federation.local_epochs, 1);
    EXPECT_EQ(c.federation.arch.recurrent_units, 4);
    EXPECT_DOUBLE_EQ(c.federation.arch.dropout_rate, 0.25);
    EXPECT_EQ(c.vocab_max_size, 20000u);
    EXPECT_EQ(c.transport.backend, Backend::InMemory);
    EXPECT_EQ(c.federation.seed, 7u);
}

TEST(Config, DropoutDerivesParticipants) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["federation"]["clients"] = 5;
    doc["federation"]["dropout_client"] = 0;
    doc["shard_plan"] = "table1";
    const auto c = parse(doc, tmp.path());
    EXPECT_EQ(c.federation.participants_per_round, 4);
    EXPECT_EQ(c.federation.plan.mode, datashard::ShardPlan::Mode::NonIID);
}

TEST(Config, InlineMatrixPlan) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["shard_plan"] = json::array({json::array({50, 20, 70}), json::array({30, 40, 10}), json::array({20, 40, 20})});
    const auto c = parse(doc, tmp.path());
    EXPECT_NEAR(c.federation.plan.proportions(0, 2), 0.7, 1e-12);
}

TEST(Config, DumpRoundTrips) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["shard_plan"] = json::array({json::array({50, 20, 70}), json::array({30, 40, 10}), json::array({20, 40, 20})});
    doc["transport"] = {{"backend", "filesystem"}, {"root", "store"}};
    doc["ablation"] = {{"client_noise_tokens", 2}, {"noise_vocab_per_client", 4}};
    const auto first = dump_config(parse(doc, tmp.path()));
    const auto second = dump_config(parse_config(first, "/"));
    EXPECT_EQ(first, second);
}

struct BrokenCase {
    std::string field;
    std::function<void(json&, Rng&)> mutate;
};

std::vector<BrokenCase> broken_cases() {
    const auto neg = [](Rng& rng) { return -1 - static_cast<int>(uniform_index(rng, 50)); };
    const auto nonpos = [](Rng& rng) { return -static_cast<int>(uniform_index(rng, 50)); };
    return {
        {"mode", [](json& d, Rng&) { d["mode"] = "distributed"; }},
        {"train_csv", [](json& d, Rng&) { d["train_csv"] = "missing.csv"; }},
        {"train_csv", [](json& d, Rng&) { d.erase("train_csv"); }},
        {"test_csv", [](json& d, Rng&) { d["test_csv"] = 3; }},
        {"embedding_path", [](json& d, Rng&) { d["embedding_path"] = "nope.txt"; }},
        {"tokenizer_corpus", [](json& d, Rng&) { d["tokenizer_corpus"] = "nope.txt"; }},
        {"vocab_path", [](json& d, Rng&) {
             d["vocab_path"] = "train.csv";
             d["tokenizer_corpus"] = "train.csv";
         }},
        {"vocab_max_size", [=](json& d, Rng& r) { d["vocab_max_size"] = 2 + nonpos(r); }},
        {"tokenizer_mode", [](json& d, Rng&) { d["tokenizer_mode"] = "shared"; }},
        {"tokenizer_mode", [](json& d, Rng&) {
             d["tokenizer_mode"] = "per_client";
             d["mode"] = "centralized";
         }},
        {"federation.rounds", [=](json& d, Rng& r) { d["federation"]["rounds"] = neg(r); }},
        {"federation.rounds", [](json& d, Rng&) { d["federation"]["rounds"] = 2.5; }},
        {"federation.clients", [=](json& d, Rng& r) { d["federation"]["clients"] = nonpos(r); }},
        {"federation.participants", [](json& d, Rng& r) {
             d["federation"]["participants"] = 4 + static_cast<int>(uniform_index(r, 10));
         }},
        {"federation.learning_rate", [](json& d, Rng& r) { d["federation"]["learning_rate"] = -uniform(r, 1e-6, 1.0); }},
        {"federation.batch_size", [=](json& d, Rng& r) { d["federation"]["batch_size"] = nonpos(r); }},
        {"federation.local_epochs", [=](json& d, Rng& r) { d["federation"]["local_epochs"] = nonpos(r); }},
        {"federation.dropout_client", [](json& d, Rng& r) {
             d["federation"]["dropout_client"] = 3 + static_cast<int>(uniform_index(r, 10));
         }},
        {"federation.barrier_timeout_s", [](json& d, Rng& r) { d["federation"]["barrier_timeout_s"] = -uniform(r, 0, 5); }},
        {"federation.poll_interval_ms", [=](json& d, Rng& r) { d["federation"]["poll_interval_ms"] = neg(r); }},
        {"federation.client_execution", [](json& d, Rng&) { d["federation"]["client_execution"] = "fork"; }},
        {"federation.client_execution", [](json& d, Rng&) { d["federation"]["client_execution"] = "remote"; }},
        {"federation.rounds_", [](json& d, Rng&) { d["federation"]["rounds_"] = 1; }},
        {"model.cell", [](json& d, Rng&) { d["model"]["cell"] = "transformer"; }},
        {"model.embed_dim", [=](json& d, Rng& r) { d["model"]["embed_dim"] = nonpos(r); }},
        {"model.recurrent_units", [=](json& d, Rng& r) { d["model"]["recurrent_units"] = nonpos(r); }},
        {"model.dense_units", [=](json& d, Rng& r) { d["model"]["dense_units"] = nonpos(r); }},
        {"model.max_seq_len", [=](json& d, Rng& r) { d["model"]["max_seq_len"] = nonpos(r); }},
        {"model.dropout_rate", [](json& d, Rng& r) { d["model"]["dropout_rate"] = uniform(r, 1.0, 3.0); }},
        {"model.layers", [](json& d, Rng&) { d["model"]["layers"] = 2; }},
        {"shard_plan", [](json& d, Rng&) { d["shard_plan"] = "table2"; }},
        {"shard_plan", [](json& d, Rng&) { d["shard_plan"] = "table1"; }},
        {"shard_plan", [](json& d, Rng&) { d["shard_plan"] = json::array({json::array({50, 50, 50}), json::array({60, 50, 50}), json::array({0, 0, 0})}); }},
        {"augmentation.sub_prob", [](json& d, Rng& r) { d["augmentation"] = {{"enabled", true}, {"sub_prob", 1.0 + uniform(r, 0.01, 2)}}; }},
        {"augmentation.min_similarity", [](json& d, Rng&) { d["augmentation"] = {{"min_similarity", 1.5}}; }},
        {"augmentation.enabled", [](json& d, Rng&) { d["augmentation"] = {{"enabled", "yes"}}; }},
        {"transport.backend", [](json& d, Rng&) { d["transport"] = {{"backend", "pigeon"}}; }},
        {"transport.root", [](json& d, Rng&) { d["transport"] = {{"backend", "filesystem"}}; }},
        {"transport.address", [](json& d, Rng&) { d["transport"] = {{"backend", "socket"}, {"address", "nohost"}}; }},
        {"transport.backend", [](json& d, Rng&) {
             d["mode"] = "centralized";
             d["transport"] = {{"backend", "filesystem"}, {"root", "store"}};
         }},
        {"wire_dtype", [](json& d, Rng&) { d["wire_dtype"] = "f16"; }},
        {"ablation.client_noise_tokens", [=](json& d, Rng& r) { d["ablation"] = {{"client_noise_tokens", neg(r)}}; }},
        {"ablation.noise_vocab_per_client", [](json& d, Rng&) { d["ablation"] = {{"client_noise_tokens", 3}}; }},
        {"profile_timing", [](json& d, Rng&) { d["profile_timing"] = 1; }},
        {"seed", [=](json& d, Rng& r) { d["seed"] = neg(r); }},
        {"colour", [](json& d, Rng&) { d["colour"] = "blue"; }},
    };
}

TEST(Config, BrokenConfigsNameTheirField) {
    TempDir tmp;
    const auto base = make_workspace(tmp.path());
    const auto cases = broken_cases();
    for (const auto& c : cases) {
        auto doc = base;
        Rng rng(1);
        c.mutate(doc, rng);
        EXPECT_EQ(field_of(doc, tmp.path()), c.field) << doc.dump();
    }
}

TEST(Config, RandomBrokenConfigsProperty) {
    TempDir tmp;
    const auto base = make_workspace(tmp.path());
    const auto cases = broken_cases();
    Rng rng(2026);
    for (int i = 0; i < 300; ++i) {
        const auto& c = cases[uniform_index(rng, cases.size())];
        auto doc = base;
        c.mutate(doc, rng);
        const auto field = field_of(doc, tmp.path());
        EXPECT_EQ(field, c.field) << doc.dump();
    }
}

TEST(Config, MessageNamesField) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["federation"]["batch_size"] = 0;
    try {
        parse(doc, tmp.path());
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("federation.batch_size"), std::string::npos);
    }
}

TEST(Config, InvalidJson) { EXPECT_THROW(parse_config("{ \"mode\": ", "/"), ConfigError); }

/// Label by majority of class keywords; the stems are the public marker spellings.
int keyword_oracle(const std::string& text) {
    static const std::array<std::regex, 3> stems = {std::regex("^calm[0-9]+$"), std::regex("^tired[0-9]+$"),
                                                    std::regex("^hopeless[0-9]+$")};
    std::array<int, 3> counts{};
    std::istringstream in(text);
    std::string w;
    while (in >> w)
        for (int q = 0; q < 3; ++q)
            if (std::regex_match(w, stems[static_cast<std::size_t>(q)])) ++counts[static_cast<std::size_t>(q)];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

TEST(Synth, BalancedSizes) {
    const auto c = generate_synthetic_corpus(200, 300, 5);
    EXPECT_EQ(c.train.size(), 600u);
    EXPECT_EQ(c.train.class_counts(), (textproc::ClassCounts{200, 200, 200}));
    EXPECT_EQ(c.test.class_counts(), (textproc::ClassCounts{100, 100, 100}));
    EXPECT_EQ(c.embeddings.size(), 300u);
}

TEST(Synth, KeywordOracleIsPerfect) {
    const auto c = generate_synthetic_corpus(200, 300, 11);
    for (const auto* split : {&c.train, &c.test})
        for (const auto& s : split->samples) ASSERT_EQ(keyword_oracle(s.text), s.label) << s.text;
}

TEST(Synth, MarkersClusterByClass) {
    const auto c = generate_synthetic_corpus(10, 300, 3);
    const auto cos = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
        return a.dot(b) / (a.norm() * b.norm());
    };
    const auto& e = c.embeddings;  // markers first, 20 per class
    double intra = 0, inter = 0;
    int ni = 0, nx = 0;
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t j = i + 1; j < 60; ++j) {
            if (i / 20 == j / 20) {
                intra += cos(e[i].second, e[j].second);
                ++ni;
            } else {
                inter += cos(e[i].second, e[j].second);
                ++nx;
            }
        }
    EXPECT_GT(intra / ni, 0.8);
    EXPECT_LT(std::abs(inter / nx), 0.3);
}

TEST(Synth, SameSeedSameBytes) {
    TempDir a, b, d;
    const auto o = small_corpus(4);
    write_synthetic_corpus(generate_synthetic_corpus(o), a.path(), o);
    write_synthetic_corpus(generate_synthetic_corpus(o), b.path(), o);
    auto other = o;
    other.seed = 5;
    write_synthetic_corpus(generate_synthetic_corpus(other), d.path(), other);
    for (auto name : {kSynthTrainFile, kSynthTestFile, kSynthEmbeddingFile}) {
        EXPECT_EQ(read_file(a.path() / name), read_file(b.path() / name));
        EXPECT_NE(read_file(a.path() / name), read_file(d.path() / name));
    }
}

TEST(Synth, WrittenConfigIsValid) {
    TempDir tmp;
    const auto o = small_corpus();
    write_synthetic_corpus(generate_synthetic_corpus(o), tmp.path(), o);
    const auto c = load_config(tmp.path() / kSynthConfigFile);
    EXPECT_EQ(c.federation.arch.max_seq_len, o.max_tokens);
    EXPECT_EQ(c.federation.arch.embed_dim, o.embed_dim);
}

TEST(Noise, InsertsClientPrivateWords) {
    textproc::LabeledDataset d{{{"a b c", 0}, {"d e", 2}}};
    const NoiseConfig n{3, 4};
    const auto out = inject_client_noise(d, 2, n, 9);
    ASSERT_EQ(out.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto before = textproc::tokenize(d.samples[i].text);
        const auto after = textproc::tokenize(out.samples[i].text);
        EXPECT_EQ(after.size(), before.size() + 3);
        EXPECT_EQ(out.samples[i].label, d.samples[i].label);
        std::vector<std::string> kept;
        for (const auto& w : after) {
            if (w.rfind("noise2x", 0) == 0)
                EXPECT_LT(std::stoi(w.substr(7)), 4);
            else
                kept.push_back(w);
        }
        EXPECT_EQ(kept, before);
    }
    EXPECT_EQ(inject_client_noise(d, 2, n, 9).samples, out.samples);
    EXPECT_EQ(inject_client_noise(d, 2, NoiseConfig{}, 9).samples, d.samples);
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Experiment, FederatedWritesArtifacts) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["profile_timing"] = true;
    const auto c = parse(doc, tmp.path());
    std::ostringstream summary;
    const auto r = run_experiment(c, {true, &summary});
    EXPECT_EQ(r.history.size(), 2u);
    EXPECT_EQ(line_count(read_file(c.output_dir / kRoundsFile)), 2u);
    EXPECT_EQ(line_count(summary.str()), 2u);
    EXPECT_EQ(line_count(read_file(c.output_dir / kMetricsFile)), 1u + 2u * 4u);  // global + 3 locals per round
    EXPECT_GT(line_count(read_file(c.output_dir / kLedgerFile)), 1u);
    EXPECT_EQ(line_count(read_file(c.output_dir / kProfileFile)), 1u + 2u * 4u);
    EXPECT_EQ(read_file(c.output_dir / kModelFile).size(),
              transport::payload_size(c.federation.arch, c.federation.wire_dtype));
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / kModelInfoFile));
}

TEST(Experiment, SameSeedIdenticalRounds) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["output_dir"] = "a";
    const auto a = parse(doc, tmp.path());
    doc["output_dir"] = "b";
    const auto b = parse(doc, tmp.path());
    run_experiment(a);
    run_experiment(b);
    EXPECT_EQ(read_file(a.output_dir / kRoundsFile), read_file(b.output_dir / kRoundsFile));
    EXPECT_EQ(read_file(a.output_dir / kLedgerFile), read_file(b.output_dir / kLedgerFile));
    EXPECT_EQ(read_file(a.output_dir / kModelFile), read_file(b.output_dir / kModelFile));
}

TEST(Experiment, CentralizedHasOneLinePerEpochAndNoLedger) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["mode"] = "centralized";
    doc["federation"]["rounds"] = 3;
    const auto c = parse(doc, tmp.path());
    run_experiment(c);
    EXPECT_EQ(line_count(read_file(c.output_dir / kRoundsFile)), 3u);
    EXPECT_EQ(line_count(read_file(c.output_dir / kLedgerFile)), 1u);
}

TEST(Experiment, FilesystemBackendMatchesMemory) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["output_dir"] = "mem";
    const auto mem = parse(doc, tmp.path());
    doc["output_dir"] = "fs";
    doc["transport"] = {{"backend", "filesystem"}, {"root", "store"}};
    const auto fs = parse(doc, tmp.path());
    run_experiment(mem);
    run_experiment(fs);
    EXPECT_EQ(read_file(mem.output_dir / kRoundsFile), read_file(fs.output_dir / kRoundsFile));
}

TEST(Experiment, PrepareFailureIsTagged) {
    TempDir tmp;
    const auto doc = make_workspace(tmp.path());
    const auto c = parse(doc, tmp.path());
    tmp.write("train.csv", "text,label\n\"unterminated,0\n");
    try {
        run_experiment(c);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_EQ(std::string(e.what()).rfind("[prepare]", 0), 0u) << e.what();
    }
}

TEST(Ablation, SeriesAlignedAndSingleClientCoincides) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["federation"]["clients"] = 1;
    doc["federation"]["rounds"] = 3;
    const auto c = parse(doc, tmp.path());
    const auto r = run_tokenizer_ablation(c);
    ASSERT_EQ(r.common_accuracy.size(), 3u);
    ASSERT_EQ(r.per_client_accuracy.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.common_accuracy[i], r.per_client_accuracy[i], 1e-6);
    EXPECT_EQ(read_file(c.output_dir / "common" / kModelFile), read_file(c.output_dir / "per_client" / kModelFile));
    EXPECT_EQ(line_count(read_file(c.output_dir / kAblationFile)), 4u);
}

TEST(Ablation, PerClientVocabulariesDiffer) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    doc["tokenizer_mode"] = "per_client";
    doc["ablation"] = {{"client_noise_tokens", 2}, {"noise_vocab_per_client", 3}};
    const auto c = parse(doc, tmp.path());
    const auto p = prepare_experiment(c);
    ASSERT_EQ(p.clients.size(), 3u);
    for (const auto& cl : p.clients) {
        EXPECT_TRUE(cl.vocab.contains(noise_word(cl.client_id, 0)) || cl.vocab.contains(noise_word(cl.client_id, 1)) ||
                    cl.vocab.contains(noise_word(cl.client_id, 2)));
        EXPECT_FALSE(p.vocab.contains(noise_word(cl.client_id, 0)));
        EXPECT_EQ(cl.embedding.rows(), static_cast<Eigen::Index>(cl.vocab.size()));
    }
    EXPECT_FALSE(p.clients[0].vocab == p.clients[1].vocab);
}

TEST(PredictText, ScoresFromSavedModel) {
    TempDir tmp;
    const auto c = parse(make_workspace(tmp.path()), tmp.path());
    run_experiment(c);
    const auto p = predict_text(c.output_dir / kModelFile, "calm1 word3 calm2");
    EXPECT_GE(p.label, 0);
    EXPECT_LT(p.label, 3);
    const auto again = predict_text(c.output_dir / kModelFile, "calm1 word3 calm2");
    EXPECT_EQ(p.scores, again.scores);
    for (double s : p.scores) EXPECT_TRUE(s > 0.0 && s < 1.0);
}

#ifdef FEDTEXT_CLI_PATH
int run_cli(const std::string& args) {
    const auto cmd = std::string(FEDTEXT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    TempDir tmp;
    auto doc = make_workspace(tmp.path());
    tmp.write("good.json", doc.dump());
    doc["federation"]["rounds"] = -1;
    tmp.write("bad.json", doc.dump());
    EXPECT_EQ(run_cli("run " + (tmp.path() / "good.json").string()), 0);
    EXPECT_EQ(run_cli("run " + (tmp.path() / "bad.json").string()), 2);
    EXPECT_EQ(run_cli("run"), 2);
    tmp.write("train.csv", "text,label\nhello,unknown\n");
    EXPECT_EQ(run_cli("run " + (tmp.path() / "good.json").string()), 1);
    EXPECT_EQ(run_cli("synth --per-class 2 --out " + (tmp.path() / "s").string()), 0);
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "s" / kSynthTrainFile));
}
#endif

}  // namespace
}  // namespace fedtext::cli
