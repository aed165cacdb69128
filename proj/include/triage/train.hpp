#pragma once

// Training under triage: the outer sequence of (policy, model) pairs built by
// triage-filtered minibatch SGD, the feature-only policy approximator, and the
// validation-calibrated deployment threshold.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triage/core.hpp"
#include "triage/model.hpp"
#include "triage/policy.hpp"

namespace triage {

// Which model scores the minibatch when selecting the kept samples:
// the model frozen at the end of the previous outer step, or the current SGD iterate.
enum class FilterWith { previous_step, current_iterate };
enum class OptimizerKind { sgd, adam };

std::string_view to_string(FilterWith f);
FilterWith parse_filter_with(std::string_view text);
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view text);

struct TrainConfig {
    double budget = 0.0;          // b
    int outer_steps = 1;          // T
    int epochs = 1;               // N, approximator epochs
    std::size_t batch_size = 32;  // B
    double learning_rate = 0.1;   // alpha
    int patience = 0;             // early-stopping patience on validation loss; 0 disables
    RngSeed seed{};
    FilterWith filter_with = FilterWith::current_iterate;
    OptimizerKind optimizer = OptimizerKind::sgd;
    // Outer steps trained under the no-deferral policy before triage filtering starts.
    int warmup_steps = 0;
    bool shuffle = true;  // reshuffle minibatches every outer step / epoch
    double smoothing_epsilon = 1e-6;
    // Approximator learning rate; <= 0 reuses learning_rate.
    double scorer_learning_rate = 0.0;

    void validate() const;
    LossFn loss_for(TaskKind task) const { return LossFn::for_task(task, smoothing_epsilon); }
};

// Upper bound on |d^2/dtheta^2 (S_theta(x) - y)^2| over theta, |x| <= x_max and y in [0, 1]
// for the 1-D sigmoid model: x_max^2 (1/8 + 1/(3 sqrt 3)). Plain SGD with
// learning rate below its inverse is the safe step for monotone outer steps.
double sigmoid_squared_smoothness(double x_max);

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, std::size_t num_params);

    void step(std::span<double> params, std::span<const double> gradient);

private:
    OptimizerKind kind_;
    double lr_;
    std::vector<double> m_;
    std::vector<double> v_;
    long long t_ = 0;
};

// Mutable state threaded through consecutive outer steps of one run.
struct TrainState {
    TrainState(const Dataset& data, const TrainConfig& config, std::size_t num_params);

    Rng rng;
    Optimizer optimizer;
    std::vector<double> human;  // cached per-sample human loss
    std::vector<std::string> warnings;
};

// Partition of 0..n-1 into consecutive minibatches, optionally shuffled first.
std::vector<std::vector<std::size_t>> make_minibatches(std::size_t n, std::size_t batch_size, bool shuffle, Rng& rng);

// One pass over the minibatches with triage filtering at `budget`; updates `model` in place.
// Minibatches whose kept set is empty are skipped.
void train_model_step(Model& model, const Dataset& data, const TrainConfig& config, double budget,
                      TrainState& state);
void train_model_step(Model& model, const Dataset& data, const TrainConfig& config, TrainState& state);

// Plain minibatch SGD over every sample; the reference the filtered step reduces to at b = 0.
void train_vanilla_step(Model& model, const Dataset& data, const TrainConfig& config, TrainState& state);

struct TrainTrace {
    std::vector<double> step_losses;          // L(pi*_{m_t, b}, m_t) on training data
    std::vector<double> validation_losses;    // same on validation data, when given
    std::vector<double> approximator_losses;  // mean binary cross-entropy per epoch
    std::vector<double> final_params;
    std::vector<std::string> warnings;
    int best_step = -1;  // 0-based step whose parameters were kept when early stopping
};

struct TrainResult {
    AnyModel model;
    TrainTrace trace;
};

// Runs T outer steps from the spec's initialization (or from `init`).
TrainResult train_under_triage(const Dataset& data, const ModelSpec& spec, const TrainConfig& config,
                               const Dataset* validation = nullptr);
TrainResult train_under_triage(const Dataset& data, AnyModel init, const TrainConfig& config,
                               const Dataset* validation = nullptr);

// Feature-only approximation of the exact policy: pi_hat(x) = sigmoid(scorer(x)).
struct ApproxTriagePolicy {
    AnyModel scorer;
    double threshold = 0.5;  // p_hat_b

    double score(std::span<const double> x) const;
};

// Scores of every sample in `data`.
std::vector<double> policy_scores(const ApproxTriagePolicy& policy, const Dataset& data);

// Fits pi_hat to the exact decisions of `model` at config.budget on `data` by
// minibatch SGD on binary cross-entropy for config.epochs epochs.
ApproxTriagePolicy fit_policy_approximator(const Model& model, const Dataset& data, const ModelSpec& scorer_spec,
                                           const TrainConfig& config, TrainTrace* trace = nullptr);

// Scans {0, 1} and the distinct scores on `validation`; returns the threshold with
// the lowest joint loss whose deferral fraction is at most b + 1/|val|. Ties go to
// the larger threshold.
double calibrate_deployment_threshold(const ApproxTriagePolicy& policy, const Model& model,
                                      const Dataset& validation, double b, const LossFn& loss);

inline int deploy_decision(const ApproxTriagePolicy& policy, std::span<const double> x) {
    return policy.score(x) >= policy.threshold ? 1 : 0;
}

// deploy_decision over a set, then capped at floor(b * n) deferrals keeping the
// highest scores (ties by ascending index).
Decisions deploy_with_budget(const ApproxTriagePolicy& policy, const Dataset& data, double b);

}  // namespace triage
