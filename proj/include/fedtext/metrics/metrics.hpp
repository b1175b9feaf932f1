// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtext/seqnet/model.hpp"
#include "fedtext/textproc/dataset.hpp"

namespace fedtext::metrics {

using textproc::kNumClasses;
using Confusion = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;  // [true][predicted]

struct EvalReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    std::array<double, kNumClasses> precision{};
    std::array<double, kNumClasses> recall{};
    Confusion confusion{};
    std::size_t n_samples = 0;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Macro precision/recall with 0/0 taken as 0.
EvalReport evaluate_predictions(std::span<const int> labels, std::span<const int> predictions);

/// Argmax class of every row, ties to the lowest index.
template <typename Scalar>
std::vector<int> predict_all(const seqnet::Parameters<Scalar>& params, const seqnet::Matrix<Scalar>& embedding,
                             const seqnet::TokenMatrix& ids, Eigen::Index chunk = 256) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(ids.rows()));
    for (Eigen::Index begin = 0; begin < ids.rows(); begin += chunk) {
        const auto n = std::min(chunk, ids.rows() - begin);
        const seqnet::TokenMatrix part = ids.middleRows(begin, n);
        const auto fwd = seqnet::forward(params, embedding, part, seqnet::ForwardMode::eval());
        for (Eigen::Index r = 0; r < n; ++r) out.push_back(seqnet::argmax_lowest(fwd.scores.row(r)));
    }
    return out;
}

template <typename Scalar>
EvalReport evaluate(const seqnet::Parameters<Scalar>& params, const seqnet::Matrix<Scalar>& embedding,
                    const seqnet::EncodedBatch& testset) {
    if (testset.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(testset.size()));
    for (Eigen::Index r = 0; r < testset.labels.rows(); ++r) labels.push_back(seqnet::argmax_lowest(testset.labels.row(r)));
    const auto preds = predict_all(params, embedding, testset.token_ids);
    return evaluate_predictions(labels, preds);
}

inline constexpr Eigen::Index kInferenceSamples = 100;

/// Mean wall time of single-sample predictions over exactly 100 rows, in
/// microseconds. One extra prediction of row 0 runs first and is not timed.
template <typename Scalar>
double profile_inference(const seqnet::Parameters<Scalar>& params, const seqnet::Matrix<Scalar>& embedding,
                         const seqnet::TokenMatrix& samples) {
    if (samples.rows() != kInferenceSamples)
        throw std::invalid_argument("profile_inference: expected exactly 100 samples, got " +
                                    std::to_string(samples.rows()));
    volatile int sink = seqnet::predict(params, embedding, samples.row(0));
    const auto start = std::chrono::steady_clock::now();
    for (Eigen::Index r = 0; r < samples.rows(); ++r) sink = seqnet::predict(params, embedding, samples.row(r));
    const std::chrono::duration<double, std::micro> elapsed = std::chrono::steady_clock::now() - start;
    (void)sink;
    return elapsed.count() / static_cast<double>(kInferenceSamples);
}

struct TimeProfile {
    double training_ms = 0.0;
    double overhead_ms = 0.0;
    double upload_ms = 0.0;
    double download_ms = 0.0;
    double inference_us_per_sample = 0.0;

    friend bool operator==(const TimeProfile&, const TimeProfile&) = default;
};

/// Disjoint per-category accumulators filled while a round runs.
struct RoundTimers {
    enum Category { Training, Overhead, Upload, Download, kCategories };
    std::array<std::chrono::nanoseconds, kCategories> spent{};

    void add(Category c, std::chrono::nanoseconds d) { spent[c] += d; }
    RoundTimers& operator+=(const RoundTimers& o);
};

/// Adds the lifetime of the scope to one category.
class ScopedTimer {
public:
    ScopedTimer(RoundTimers& timers, RoundTimers::Category category)
        : timers_(timers), category_(category), start_(std::chrono::steady_clock::now()) {}
    ~ScopedTimer() { timers_.add(category_, std::chrono::steady_clock::now() - start_); }
    ScopedTimer(const ScopedTimer&) = delete;
    ScopedTimer& operator=(const ScopedTimer&) = delete;

private:
    RoundTimers& timers_;
    RoundTimers::Category category_;
    std::chrono::steady_clock::time_point start_;
};

TimeProfile profile_round(const RoundTimers& timers, double inference_us_per_sample = 0.0);

struct MetricsRow {
    int round = 0;
    std::string model;  // "global" or "client-<id>"
    EvalReport report;
};

/// round,model,accuracy,macro_precision,macro_recall,n_samples
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

struct ProfileRow {
    int round = 0;
    std::string endpoint;
    TimeProfile profile;
};

/// round,endpoint,training_ms,overhead_ms,upload_ms,download_ms,inference_us_per_sample
void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfileRow>& rows);

}  // namespace fedtext::metrics
