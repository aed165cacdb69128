#pragma once

// Comparison strategies: full-automation triage, score-based triage and
// confidence-based triage, plus the shared train/approximate/calibrate
// pipeline used by both threshold-policy methods.

#include <cstddef>
#include <string_view>
#include <vector>

#include "triage/core.hpp"
#include "triage/model.hpp"
#include "triage/train.hpp"

namespace triage {

enum class BaselineKind { full_automation, score_based, confidence_based };

// Names accepted by the CLI's --method flag.
enum class Method { ours, full_automation, score, confidence };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);
std::string_view method_names();  // "ours, full_automation, score, confidence"
std::string_view to_string(BaselineKind k);

struct TriagePipeline {
    AnyModel model;
    ApproxTriagePolicy policy;
    TrainTrace trace;
};

// Trains the model with triage filtering at `training_budget`, fits the approximator
// to the exact policy at config.budget, and calibrates its threshold on `validation`.
// Training budget config.budget is the learned-triage method; 0 is full automation.
TriagePipeline fit_triage_pipeline(const Dataset& train, const Dataset& validation, const ModelSpec& spec,
                                   const ModelSpec& scorer_spec, const TrainConfig& config, double training_budget);

TriagePipeline train_full_automation(const Dataset& train, const Dataset& validation, const ModelSpec& spec,
                                     const ModelSpec& scorer_spec, const TrainConfig& config);

// Defers the floor(b n) samples with the lowest model confidence.
std::vector<std::size_t> score_based_rank(const Model& model, const Dataset& test, double b);

// Share of all recorded human votes that match the label.
double global_human_accuracy(const Dataset& data);

// Trains keeping, per minibatch, the min(floor(b |batch|), n_c) samples with the
// lowest P(h = y) - max_y' P(m(x) = y'); n_c counts samples where humans beat the
// model's confidence. Batches where that count is zero fall back to the full batch.
TrainResult confidence_based_train(const Dataset& train, const ModelSpec& spec, const TrainConfig& config, double b);

// Defers the min(floor(b n), n_c) lowest-confidence samples.
std::vector<std::size_t> confidence_based_test_selection(const Model& model, const Dataset& test, double b,
                                                         double human_accuracy);

}  // namespace triage
