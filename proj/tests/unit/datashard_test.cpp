// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fedtext/datashard/csv.hpp"
#include "fedtext/datashard/shard.hpp"
#include "fedtext/errors.hpp"
#include "fedtext/rng.hpp"
#include "support/temp_dir.hpp"

namespace fedtext::datashard {
namespace {

using textproc::Vocabulary;

EncodedDataset synthetic(std::array<std::size_t, 3> per_class, bool interleave = true) {
    textproc::LabeledDataset d;
    const auto total = per_class[0] + per_class[1] + per_class[2];
    std::array<std::size_t, 3> left = per_class;
    for (std::size_t i = 0; d.size() < total; ++i) {
        const int q = interleave ? static_cast<int>(i % 3) : (left[0] ? 0 : left[1] ? 1 : 2);
        if (!left[static_cast<std::size_t>(q)]) continue;
        --left[static_cast<std::size_t>(q)];
        d.samples.push_back({"w" + std::to_string(i), q});
    }
    return encode_dataset(d, Vocabulary(), 4);
}

TEST(Csv, QuotedFieldsAndEscapes) {
    std::istringstream in("a,\"b,c\"\n\"x \"\"y\"\"\nz\",2\r\n");
    CsvReader r(in);
    auto row = r.next();
    ASSERT_TRUE(row);
    EXPECT_EQ(*row, (std::vector<std::string>{"a", "b,c"}));
    row = r.next();
    ASSERT_TRUE(row);
    EXPECT_EQ(*row, (std::vector<std::string>{"x \"y\"\nz", "2"}));
    EXPECT_EQ(r.record_line(), 2u);
    EXPECT_FALSE(r.next());
}

TEST(Csv, EscapeRoundTrip) {
    const std::vector<std::string> fields{"plain", "with,comma", "quote \"q\"", "multi\nline", ""};
    std::ostringstream out;
    write_csv_row(out, fields);
    std::istringstream in(out.str());
    EXPECT_EQ(*CsvReader(in).next(), fields);
}

TEST(LabeledCsv, ReadsOneRowPerClass) {
    testing::TempDir dir;
    const auto p = dir.write("d.csv", "text,label\nfine,0\n\"tired, low\",1\nhopeless,2\n");
    const auto d = read_labeled_csv(p);
    EXPECT_EQ(d.class_counts(), (ClassCounts{1, 1, 1}));
    EXPECT_EQ(d.samples[1].text, "tired, low");
}

TEST(LabeledCsv, UnknownLabelNamesRow) {
    testing::TempDir dir;
    const auto p = dir.write("d.csv", "text,label\nfine,0\nbad,severe\n");
    try {
        read_labeled_csv(p);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("severe"), std::string::npos);
    }
}

TEST(LabeledCsv, RejectsEmptyTextAndBadShape) {
    testing::TempDir dir;
    EXPECT_THROW(read_labeled_csv(dir.write("a.csv", "text,label\n... ,1\n")), ParseError);
    EXPECT_THROW(read_labeled_csv(dir.write("b.csv", "text,label\nx,1,2\n")), ParseError);
    EXPECT_THROW(read_labeled_csv(dir.write("c.csv", "words,label\nx,1\n")), ParseError);
    EXPECT_THROW(read_labeled_csv(dir.write("d.csv", "")), ParseError);
    EXPECT_THROW(read_labeled_csv(dir.write("e.csv", "text,label\n")), ParseError);
}

TEST(LabeledCsv, KeepsDuplicatesAndRoundTrips) {
    testing::TempDir dir;
    textproc::LabeledDataset d;
    d.samples = {{"same text", 1}, {"same text", 1}, {"a \"quoted\", text", 2}};
    write_labeled_csv(dir.path() / "out.csv", d);
    EXPECT_EQ(read_labeled_csv(dir.path() / "out.csv").samples, d.samples);
}

TEST(Encode, OneHotLabelsAndPaddedIds) {
    textproc::LabeledDataset d;
    d.samples = {{"I feel sad", 2}, {"ok", 0}};
    const auto v = textproc::build_vocab(d.texts());
    const auto e = encode_dataset(d, v, 5);
    ASSERT_EQ(e.samples.token_ids.rows(), 2);
    ASSERT_EQ(e.samples.token_ids.cols(), 5);
    EXPECT_EQ(e.samples.labels.row(0), Eigen::RowVector3d(0, 0, 1));
    EXPECT_EQ(e.samples.token_ids(1, 1), 0);
    EXPECT_EQ(e.class_counts(), (ClassCounts{1, 0, 1}));
}

TEST(SplitIid, EqualShardsAndClassCounts) {
    const auto data = synthetic({3100, 3100, 3100});
    const auto shards = split_iid(data, 5, 42);
    ASSERT_EQ(shards.size(), 5u);
    for (const auto& s : shards) {
        EXPECT_EQ(s.size(), 1860u);
        EXPECT_EQ(s.class_counts, (ClassCounts{620, 620, 620}));
    }
    const auto r = imbalance_report(shards);
    EXPECT_FALSE(r.data_imbalanced);
    EXPECT_FALSE(r.class_imbalanced);
}

TEST(SplitIid, UnevenTotalsDifferByAtMostOne) {
    const auto data = synthetic({4, 3, 3});
    const auto shards = split_iid(data, 3, 1);
    std::vector<std::size_t> sizes;
    for (const auto& s : shards) sizes.push_back(s.size());
    std::sort(sizes.begin(), sizes.end());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 4}));
}

TEST(SplitIid, SingleClientKeepsDatasetOrder) {
    const auto data = synthetic({7, 5, 3});
    const auto shards = split_iid(data, 1, 9);
    ASSERT_EQ(shards.size(), 1u);
    EXPECT_EQ(shards[0].samples.token_ids, data.samples.token_ids);
    EXPECT_EQ(shards[0].samples.labels, data.samples.labels);
}

TEST(SplitNonIid, Table1Counts) {
    const auto data = synthetic({1000, 1000, 1000});
    const auto shards = split_noniid(data, ShardPlan::table1(), 5);
    ASSERT_EQ(shards.size(), 5u);
    // columns: not, moderate, severe
    EXPECT_EQ(shards[0].class_counts, (ClassCounts{100, 100, 400}));
    EXPECT_EQ(shards[1].class_counts, (ClassCounts{400, 100, 100}));
    EXPECT_EQ(shards[2].class_counts, (ClassCounts{100, 400, 100}));
    EXPECT_EQ(shards[3].class_counts, (ClassCounts{200, 300, 100}));
    EXPECT_EQ(shards[4].class_counts, (ClassCounts{200, 100, 300}));
    const auto r = imbalance_report(shards);
    EXPECT_TRUE(r.class_imbalanced);
    EXPECT_FALSE(r.data_imbalanced);
    EXPECT_NEAR(r.proportions(0, 2), 400.0 / 600.0, 1e-15);
}

TEST(SplitNonIid, PlanValidation) {
    EXPECT_THROW(ShardPlan::non_iid_percent({{50, 50, 50}, {40, 50, 50}}), std::invalid_argument);
    EXPECT_THROW(ShardPlan::non_iid_percent({{50, 50}, {50, 50}}), std::invalid_argument);
    EXPECT_THROW(ShardPlan::non_iid_percent({{150, 50, 50}, {-50, 50, 50}}), std::invalid_argument);
    EXPECT_NO_THROW(ShardPlan::non_iid_percent({{100, 0, 30}, {0, 100, 70}}));
}

TEST(ImbalanceReport, DataImbalanceDetected) {
    const auto data = synthetic({30, 30, 30});
    const auto plan = ShardPlan::non_iid_percent({{80, 80, 80}, {20, 20, 20}});
    const auto r = imbalance_report(split_noniid(data, plan, 3));
    EXPECT_TRUE(r.data_imbalanced);
    EXPECT_FALSE(r.class_imbalanced);
}

TEST(LargestRemainder, SumsExactlyWithLowIndexTies) {
    EXPECT_EQ(largest_remainder(10, {1.0 / 3, 1.0 / 3, 1.0 / 3}), (std::vector<std::size_t>{4, 3, 3}));
    EXPECT_EQ(largest_remainder(1000, {0.1, 0.4, 0.1, 0.2, 0.2}),
              (std::vector<std::size_t>{100, 400, 100, 200, 200}));
    EXPECT_EQ(largest_remainder(7, {0.5, 0.5}), (std::vector<std::size_t>{4, 3}));
    EXPECT_THROW(largest_remainder(10, {0.2, 0.2}), std::invalid_argument);
}

// Shards are disjoint, cover every sample, and the assignment is a pure function of the seed.
TEST(Partition, DisjointCoverProperty) {
    Rng rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        const std::array<std::size_t, 3> counts{1 + uniform_index(rng, 40), 1 + uniform_index(rng, 40),
                                                1 + uniform_index(rng, 40)};
        const auto data = synthetic(counts);
        const int n = 1 + static_cast<int>(uniform_index(rng, 6));
        ShardPlan plan = ShardPlan::iid(n);
        if (trial % 2) {
            std::vector<std::vector<double>> pct(static_cast<std::size_t>(n), std::vector<double>(3));
            for (int q = 0; q < 3; ++q) {
                std::vector<double> w(static_cast<std::size_t>(n));
                for (auto& x : w) x = 0.1 + uniform01(rng);
                const double s = std::accumulate(w.begin(), w.end(), 0.0);
                for (int i = 0; i < n; ++i) pct[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)] = 100.0 * w[static_cast<std::size_t>(i)] / s;
            }
            plan = ShardPlan::non_iid_percent(pct);
        }
        const auto seed = static_cast<std::uint64_t>(trial);
        const auto parts = partition(data.labels, plan, seed);
        EXPECT_EQ(parts, partition(data.labels, plan, seed));
        std::multiset<std::size_t> seen;
        for (const auto& p : parts) {
            EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
            seen.insert(p.begin(), p.end());
        }
        ASSERT_EQ(seen.size(), data.size());
        std::size_t expect = 0;
        for (auto id : seen) EXPECT_EQ(id, expect++);
        const auto shards = make_shards(data, parts);
        ClassCounts total{};
        for (const auto& s : shards)
            for (int q = 0; q < 3; ++q) total[static_cast<std::size_t>(q)] += s.class_counts[static_cast<std::size_t>(q)];
        EXPECT_EQ(total, data.class_counts());
    }
}

TEST(Partition, SeedChangesAssignment) {
    const auto data = synthetic({50, 50, 50});
    EXPECT_NE(partition_iid(data.labels, 3, 1), partition_iid(data.labels, 3, 2));
}

}  // namespace
}  // namespace fedtext::datashard
