// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "fedtext/metrics/metrics.hpp"
#include "fedtext/rng.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

namespace fedtext::metrics {
namespace {

TEST(Evaluate, HandCountedExample) {
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const std::vector<int> preds{0, 1, 1, 1, 2, 0};
    const auto r = evaluate_predictions(labels, preds);
    // confusion rows = truth: [1 1 0], [0 2 0], [1 0 1]
    EXPECT_EQ(r.confusion, (Confusion{{{1, 1, 0}, {0, 2, 0}, {1, 0, 1}}}));
    EXPECT_DOUBLE_EQ(r.accuracy, 4.0 / 6.0);
    EXPECT_NEAR(r.macro_precision, (0.5 + 2.0 / 3.0 + 1.0) / 3.0, 1e-15);
    EXPECT_NEAR(r.macro_recall, (0.5 + 1.0 + 0.5) / 3.0, 1e-15);
    EXPECT_NEAR(r.macro_precision, 0.7222, 5e-5);
    EXPECT_NEAR(r.macro_recall, 0.6667, 5e-5);
}

TEST(Evaluate, PerfectAndDegeneratePredictors) {
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    const auto perfect = evaluate_predictions(labels, labels);
    EXPECT_EQ(perfect.accuracy, 1.0);
    EXPECT_EQ(perfect.macro_precision, 1.0);
    EXPECT_EQ(perfect.macro_recall, 1.0);
    const std::vector<int> constant(6, 1);
    const auto d = evaluate_predictions(labels, constant);
    EXPECT_DOUBLE_EQ(d.accuracy, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(d.macro_recall, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(d.macro_precision, (1.0 / 3.0) / 3.0);
}

TEST(Evaluate, RejectsEmptyAndMismatched) {
    EXPECT_THROW(evaluate_predictions({}, {}), std::invalid_argument);
    const std::vector<int> a{0, 1}, b{0};
    EXPECT_THROW(evaluate_predictions(a, b), std::invalid_argument);
    const std::vector<int> c{0, 3};
    EXPECT_THROW(evaluate_predictions(a, c), std::invalid_argument);
}

TEST(Evaluate, ConfusionMarginsProperty) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + uniform_index(rng, 60);
        std::vector<int> labels(n), preds(n);
        for (auto& x : labels) x = static_cast<int>(uniform_index(rng, 3));
        for (auto& x : preds) x = static_cast<int>(uniform_index(rng, 3));
        const auto r = evaluate_predictions(labels, preds);
        std::array<std::size_t, 3> true_counts{}, pred_counts{};
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ++true_counts[static_cast<std::size_t>(labels[i])];
            ++pred_counts[static_cast<std::size_t>(preds[i])];
            correct += labels[i] == preds[i];
        }
        std::size_t total = 0, trace = 0;
        for (std::size_t q = 0; q < 3; ++q) {
            std::size_t row = 0, col = 0;
            for (std::size_t j = 0; j < 3; ++j) {
                row += r.confusion[q][j];
                col += r.confusion[j][q];
            }
            EXPECT_EQ(row, true_counts[q]);
            EXPECT_EQ(col, pred_counts[q]);
            total += row;
            trace += r.confusion[q][q];
        }
        EXPECT_EQ(total, r.n_samples);
        // micro precision and micro recall both reduce to trace / n
        EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / static_cast<double>(n));
        EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(correct) / static_cast<double>(n));
        EXPECT_GE(r.macro_precision, 0.0);
        EXPECT_LE(r.macro_precision, 1.0);
        EXPECT_EQ(r, evaluate_predictions(labels, preds));
    }
}

TEST(Evaluate, ModelPredictionsMatchSingleSamplePredict) {
    const auto arch = testing::tiny_arch(seqnet::CellKind::GRU);
    const auto params = testing::random_params(arch, 8, 1.5);
    const auto emb = testing::random_embedding(10, arch.embed_dim, 9);
    const auto batch = testing::random_batch(40, arch.max_seq_len, 10, 3, 10);
    const auto preds = predict_all(params, emb, batch.token_ids, 7);
    ASSERT_EQ(preds.size(), 40u);
    for (Eigen::Index r = 0; r < 40; ++r)
        EXPECT_EQ(preds[static_cast<std::size_t>(r)], seqnet::predict(params, emb, batch.token_ids.row(r)));
    const auto rep = evaluate(params, emb, batch);
    EXPECT_EQ(rep.n_samples, 40u);
    EXPECT_THROW(evaluate(params, emb, seqnet::EncodedBatch{}), std::invalid_argument);
}

TEST(ProfileInference, RequiresExactlyOneHundredSamples) {
    const auto arch = testing::tiny_arch(seqnet::CellKind::RNN);
    const auto params = testing::random_params(arch, 1);
    const auto emb = testing::random_embedding(10, arch.embed_dim, 2);
    EXPECT_THROW(profile_inference(params, emb, testing::random_batch(99, arch.max_seq_len, 10, 3, 3).token_ids),
                 std::invalid_argument);
    EXPECT_GE(profile_inference(params, emb, testing::random_batch(100, arch.max_seq_len, 10, 3, 3).token_ids), 0.0);
}

TEST(TimeProfile, ZeroTimersGiveZeroProfile) {
    EXPECT_EQ(profile_round(RoundTimers{}), TimeProfile{});
}

TEST(TimeProfile, ScopedTimerAccumulatesIntoOneCategory) {
    RoundTimers t;
    {
        ScopedTimer s(t, RoundTimers::Upload);
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    const auto p = profile_round(t, 3.5);
    EXPECT_GE(p.upload_ms, 4.0);
    EXPECT_EQ(p.training_ms, 0.0);
    EXPECT_EQ(p.download_ms, 0.0);
    EXPECT_EQ(p.inference_us_per_sample, 3.5);
    RoundTimers u;
    u += t;
    u += t;
    EXPECT_EQ(u.spent[RoundTimers::Upload], 2 * t.spent[RoundTimers::Upload]);
}

TEST(Csv, MetricsAndProfileRows) {
    testing::TempDir dir;
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const std::vector<int> preds{0, 1, 1, 1, 2, 0};
    write_metrics_csv(dir.path() / "m.csv", {{3, "global", evaluate_predictions(labels, preds)}});
    EXPECT_EQ(testing::read_file(dir.path() / "m.csv"),
              "round,model,accuracy,macro_precision,macro_recall,n_samples\n3,global,0.666667,0.722222,0.666667,6\n");
    write_profile_csv(dir.path() / "p.csv", {{1, "client-0", {1.5, 2, 0.25, 0.125, 9}}});
    EXPECT_EQ(testing::read_file(dir.path() / "p.csv"),
              "round,endpoint,training_ms,overhead_ms,upload_ms,download_ms,inference_us_per_sample\n"
              "1,client-0,1.500,2.000,0.250,0.125,9.000\n");
}

}  // namespace
}  // namespace fedtext::metrics
