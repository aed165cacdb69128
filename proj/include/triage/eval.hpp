#pragma once

// System-loss estimation, the four-setting synthetic comparison, budget sweeps,
// and diagnostics for the bias of point-estimate human losses, gradient
// conditions, and model/human loss ratios.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "triage/baselines.hpp"
#include "triage/core.hpp"
#include "triage/model.hpp"
#include "triage/policy.hpp"
#include "triage/synthdata.hpp"
#include "triage/train.hpp"

namespace triage {

enum class SettingId {
    S1_full_auto_no_triage,
    S2_full_auto_optimal_triage,
    S3_triage_model_mismatched_policy,
    S4_triage_model_optimal_triage,
};

std::string_view to_string(SettingId id);

// Mean over samples of (1 - pi) model loss + pi human loss.
double system_loss(const Decisions& decisions, const Model& model, const Dataset& data, const LossFn& loss);

// Same, but deferred samples are charged (mean(h) - y)^2. Regression only.
double biased_point_estimate_loss(const Decisions& decisions, const Model& model, const Dataset& data);

// (1/n) sum over deferred samples of the population variance of h.
double mean_deferred_human_variance(const Decisions& decisions, const Dataset& data);

// Norm of the mean loss gradient over the deferred (resp. kept) set of the exact policy at b.
// Empty sets give 0.
double deferred_gradient_norm(const Model& model, const Dataset& data, double b, const LossFn& loss);
double kept_gradient_norm(const Model& model, const Dataset& data, double b, const LossFn& loss);

struct RatioSummary {
    bool present = false;
    std::size_t count = 0;
    std::size_t infinite = 0;  // human loss below 1e-12
    // Quartiles over all ratios, infinities included (so they may be +inf).
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

struct TriageRatioReport {
    RatioSummary kept;
    RatioSummary deferred;
};

// Model-loss / human-loss ratio distribution per decision group.
TriageRatioReport triage_ratio_report(const Model& model, const Decisions& decisions, const Dataset& data,
                                      const LossFn& loss);

struct FourSettingsConfig {
    RegressionSpec data;
    ModelSpec model{ModelKind::sigmoid_1d, 1};
    TrainConfig full_automation;  // budget is forced to 0
    TrainConfig triage;           // its budget is the triage level of S2 to S4
};

// Defaults used by the four-settings command.
FourSettingsConfig default_four_settings();

struct InstanceRecord {
    double x = 0.0;
    double y = 0.0;
    double human_loss = 0.0;
    double loss_full_auto = 0.0;  // m_theta0
    double loss_triage = 0.0;     // m_theta
    int decision_full_auto = 0;   // exact policy of m_theta0
    int decision_triage = 0;      // exact policy of m_theta
};

struct RunReport {
    std::array<double, 4> setting_loss{};
    std::vector<double> theta_full_auto;
    std::vector<double> theta_triage;
    double budget = 0.0;
    double deferred_fraction_full_auto = 0.0;
    double deferred_fraction_triage = 0.0;
    double bias_gap = 0.0;                // system - point-estimate loss under the triage policy
    double deferred_gradient_norm = 0.0;  // at m_theta0
    double kept_gradient_norm = 0.0;      // at m_theta
    std::vector<InstanceRecord> instances;
    TrainTrace trace_full_auto;
    TrainTrace trace_triage;

    double loss(SettingId id) const { return setting_loss[static_cast<std::size_t>(id)]; }
    // S4 < S2 < S3 < S1.
    bool ordered() const;
};

RunReport run_four_settings(const FourSettingsConfig& config);

// Training defaults for the classification benchmark: T = 10, N = 20, B = 32, plain SGD at 0.1.
TrainConfig default_sweep_train();

struct SweepConfig {
    ClassificationSpec data;
    SplitFractions split;
    ModelSpec model{ModelKind::softmax_linear, 2, 3};
    ModelSpec scorer{ModelKind::mlp, 2, 0, {16}};
    TrainConfig train = default_sweep_train();  // budget is overridden per cell
    std::vector<double> budgets{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<Method> methods{Method::ours, Method::full_automation, Method::score, Method::confidence};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int jobs = 1;
};

struct SweepRow {
    Method method = Method::ours;
    double budget = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_test = 0;
    std::optional<double> test_error;  // absent for regression
    double test_system_loss = 0.0;
    double deferred_fraction = 0.0;
    std::optional<double> threshold;  // p_hat_b for threshold-policy methods
};

struct SweepSummary {
    Method method = Method::ours;
    double budget = 0.0;
    std::size_t seeds = 0;
    std::optional<double> mean_error;
    std::optional<double> se_error;
    double mean_system_loss = 0.0;
    double se_system_loss = 0.0;
    double mean_deferred_fraction = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // seed-major, then method, then budget, as configured
    std::vector<SweepSummary> summary;
    std::vector<std::string> warnings;
};

// One human vote per test sample, drawn from its recorded votes (or predictions) uniformly.
std::vector<double> draw_human_predictions(const Dataset& test, RngSeed seed);

// Trains, calibrates and deploys one method at one budget on a fixed split.
SweepRow evaluate_method(const DatasetSplit& split, Method method, double b, const SweepConfig& config,
                         std::uint64_t seed, std::span<const double> human_draws,
                         std::vector<std::string>* warnings = nullptr);

SweepResult budget_sweep(const SweepConfig& config);

std::vector<SweepSummary> summarize(std::span<const SweepRow> rows);

}  // namespace triage
