// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/metrics/metrics.hpp"

#include <fmt/format.h>

#include <fstream>

namespace fedtext::metrics {

EvalReport evaluate_predictions(std::span<const int> labels, std::span<const int> predictions) {
    if (labels.empty()) throw std::invalid_argument("evaluate: empty test set");
    if (labels.size() != predictions.size())
        throw std::invalid_argument("evaluate: label and prediction counts differ");
    EvalReport r;
    r.n_samples = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= kNumClasses || predictions[i] < 0 || predictions[i] >= kNumClasses)
            throw std::invalid_argument("evaluate: class id out of range");
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    std::size_t correct = 0;
    for (std::size_t q = 0; q < kNumClasses; ++q) {
        std::size_t predicted = 0, actual = 0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            predicted += r.confusion[j][q];
            actual += r.confusion[q][j];
        }
        const auto tp = r.confusion[q][q];
        correct += tp;
        r.precision[q] = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        r.recall[q] = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        r.macro_precision += r.precision[q] / kNumClasses;
        r.macro_recall += r.recall[q] / kNumClasses;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
    return r;
}

RoundTimers& RoundTimers::operator+=(const RoundTimers& o) {
    for (std::size_t i = 0; i < spent.size(); ++i) spent[i] += o.spent[i];
    return *this;
}

TimeProfile profile_round(const RoundTimers& timers, double inference_us_per_sample) {
    auto ms = [&](RoundTimers::Category c) {
        return std::chrono::duration<double, std::milli>(timers.spent[c]).count();
    };
    return {ms(RoundTimers::Training), ms(RoundTimers::Overhead), ms(RoundTimers::Upload),
            ms(RoundTimers::Download), inference_us_per_sample};
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,model,accuracy,macro_precision,macro_recall,n_samples\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{}\n", r.round, r.model, r.report.accuracy,
                           r.report.macro_precision, r.report.macro_recall, r.report.n_samples);
}

void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfileRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,endpoint,training_ms,overhead_ms,upload_ms,download_ms,inference_us_per_sample\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f}\n", r.round, r.endpoint, r.profile.training_ms,
                           r.profile.overhead_ms, r.profile.upload_ms, r.profile.download_ms,
                           r.profile.inference_us_per_sample);
}

}  // namespace fedtext::metrics
