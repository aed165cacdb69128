#pragma once

// Exact threshold triage: per-sample model-minus-human loss differences, the
// order-statistic budget threshold, and the training-time selection rule.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "triage/core.hpp"
#include "triage/model.hpp"

namespace triage {

// 1 = defer to humans, 0 = model predicts.
using Decisions = std::vector<std::uint8_t>;

struct DiffScore {
    std::size_t index = 0;
    double diff = 0.0;  // model loss - human loss
};

// Losses of the model and of the humans on every sample of a batch.
struct PairedLosses {
    std::vector<double> model;
    std::vector<double> human;

    std::size_t size() const noexcept { return model.size(); }
    std::vector<double> diffs() const;
};

PairedLosses paired_losses(const Model& model, std::span<const Sample> batch, const LossFn& loss);
std::vector<double> human_losses(std::span<const Sample> batch, const LossFn& loss);

std::vector<DiffScore> diff_scores(const Model& model, std::span<const Sample> batch, const LossFn& loss);

// max(0, k-th largest diff) with k = floor(b * n) + 1; the (n+1)-th largest counts as -inf.
double empirical_threshold(std::span<const double> diffs, double b);

struct ExactTriagePolicy {
    double threshold = 0.0;
    double budget = 0.0;
};

ExactTriagePolicy fit_exact_policy(std::span<const double> diffs, double b);

// Strict: a diff equal to the threshold stays with the model.
inline int decide(const ExactTriagePolicy& policy, double diff) { return diff > policy.threshold ? 1 : 0; }

Decisions exact_decisions(std::span<const double> diffs, double b);
Decisions exact_decisions(const Model& model, std::span<const Sample> batch, double b, const LossFn& loss);

struct TriageSelection {
    std::vector<std::size_t> kept;      // model-trained, ascending diff
    std::vector<std::size_t> deferred;  // human-routed, ascending diff
};

// Keeps the max(ceil((1-b) n), #{diff < 0}) smallest diffs; ties broken by ascending index.
TriageSelection select_by_diff(std::span<const double> diffs, double b);
TriageSelection select_training_subset(const Model& model, std::span<const Sample> batch, double b,
                                       const LossFn& loss);

// Mean of model loss - Thres_t(diff, 0), i.e. the joint loss of the exact policy.
double thresholded_system_loss(const PairedLosses& losses, double b);
double thresholded_system_loss(const Model& model, const Dataset& data, double b, const LossFn& loss);

}  // namespace triage
