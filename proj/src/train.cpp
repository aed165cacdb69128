#include "triage/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace triage {

namespace {

constexpr std::uint64_t kStreamMinibatch = 0x7a11;
constexpr std::uint64_t kStreamApproximator = 0xa99;

double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -t log sigma(f) - (1 - t) log(1 - sigma(f)), written on the logit.
double binary_cross_entropy_logit(double f, double target) { return log1p_exp(f) - target * f; }

void add_scaled(std::vector<double>& acc, std::span<const double> g, double scale = 1.0) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * g[i];
}

std::vector<const Sample*> gather(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<const Sample*> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = &data[idx[i]];
    return out;
}

}  // namespace

std::string_view to_string(FilterWith f) {
    return f == FilterWith::previous_step ? "previous_step" : "current_iterate";
}

FilterWith parse_filter_with(std::string_view text) {
    if (text == "previous_step") return FilterWith::previous_step;
    if (text == "current_iterate") return FilterWith::current_iterate;
    throw PreconditionError("filter_with must be previous_step or current_iterate, got " + std::string(text));
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "adam") return OptimizerKind::adam;
    throw PreconditionError("optimizer must be sgd or adam, got " + std::string(text));
}

void TrainConfig::validate() const {
    require_budget(budget);
    if (outer_steps < 1) throw PreconditionError("outer_steps (T) must be >= 1");
    if (epochs < 1) throw PreconditionError("epochs (N) must be >= 1");
    if (batch_size < 1) throw PreconditionError("batch_size (B) must be >= 1");
    if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
    if (patience < 0) throw PreconditionError("patience must be >= 0");
    if (warmup_steps < 0) throw PreconditionError("warmup_steps must be >= 0");
    if (!(smoothing_epsilon > 0.0 && smoothing_epsilon < 0.5))
        throw PreconditionError("smoothing_epsilon must lie in (0, 0.5)");
}

// --- Optimizer --------------------------------------------------------------

double sigmoid_squared_smoothness(double x_max) {
    // (S - y)^2'' = 2 x^2 (S'^2 + (S - y) S''), with S' <= 1/4, |S''| <= 1/(6 sqrt 3), |S - y| <= 1.
    return x_max * x_max * (0.125 + 1.0 / (3.0 * std::sqrt(3.0)));
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t num_params)
    : kind_(kind), lr_(learning_rate) {
    if (kind_ == OptimizerKind::adam) {
        m_.assign(num_params, 0.0);
        v_.assign(num_params, 0.0);
    }
}

void Optimizer::step(std::span<double> params, std::span<const double> gradient) {
    if (kind_ == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * gradient[i];
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * gradient[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * gradient[i] * gradient[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
}

TrainState::TrainState(const Dataset& data, const TrainConfig& config, std::size_t num_params)
    : rng(make_rng(config.seed, kStreamMinibatch)),
      optimizer(config.optimizer, config.learning_rate, num_params),
      human(human_losses(data.samples(), config.loss_for(data.task()))) {}

std::vector<std::vector<std::size_t>> make_minibatches(std::size_t n, std::size_t batch_size, bool shuffle,
                                                       Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

// --- TrainModel -------------------------------------------------------------

void train_model_step(Model& model, const Dataset& data, const TrainConfig& config, double budget,
                      TrainState& state) {
    require_budget(budget);
    const LossFn loss = config.loss_for(data.task());
    const bool frozen = config.filter_with == FilterWith::previous_step;
    const auto scorer = frozen ? std::optional<AnyModel>(AnyModel(model.clone())) : std::nullopt;

    std::vector<double> diffs;
    std::vector<std::vector<double>> grads;
    std::vector<std::uint8_t> keep;
    std::vector<double> total(model.num_params());

    for (const auto& batch : make_minibatches(data.size(), config.batch_size, config.shuffle, state.rng)) {
        const auto samples = gather(data, batch);
        diffs.resize(batch.size());
        grads.resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto lg = loss_and_gradient(model, *samples[i], loss);
            const double model_loss = frozen ? sample_loss(**scorer, *samples[i], loss) : lg.loss;
            diffs[i] = model_loss - state.human[batch[i]];
            grads[i] = std::move(lg.gradient);
        }
        const auto selection = select_by_diff(diffs, budget);
        if (selection.kept.empty()) continue;

        keep.assign(batch.size(), 0);
        for (std::size_t i : selection.kept) keep[i] = 1;
        std::fill(total.begin(), total.end(), 0.0);
        // Sum in minibatch order so the result does not depend on the sort.
        for (std::size_t i = 0; i < batch.size(); ++i)
            if (keep[i]) add_scaled(total, grads[i]);
        for (double& g : total) g /= static_cast<double>(selection.kept.size());
        state.optimizer.step(model.params(), total);
    }
}

void train_model_step(Model& model, const Dataset& data, const TrainConfig& config, TrainState& state) {
    train_model_step(model, data, config, config.budget, state);
}

void train_vanilla_step(Model& model, const Dataset& data, const TrainConfig& config, TrainState& state) {
    const LossFn loss = config.loss_for(data.task());
    std::vector<double> total(model.num_params());
    for (const auto& batch : make_minibatches(data.size(), config.batch_size, config.shuffle, state.rng)) {
        std::fill(total.begin(), total.end(), 0.0);
        for (std::size_t i : batch) add_scaled(total, loss_gradient(model, data[i], loss));
        for (double& g : total) g /= static_cast<double>(batch.size());
        state.optimizer.step(model.params(), total);
    }
}

// --- TrainMachineUnderTriage ------------------------------------------------

TrainResult train_under_triage(const Dataset& data, const ModelSpec& spec, const TrainConfig& config,
                               const Dataset* validation) {
    return train_under_triage(data, make_model(spec, config.seed), config, validation);
}

TrainResult train_under_triage(const Dataset& data, AnyModel init, const TrainConfig& config,
                               const Dataset* validation) {
    config.validate();
    if (data.empty()) throw PreconditionError("training data is empty");
    if (data.task() != init->task()) throw UnsupportedTask("model and dataset disagree on the task");
    const LossFn loss = config.loss_for(data.task());
    const bool early_stopping = validation != nullptr && !validation->empty() && config.patience > 0;

    AnyModel model = std::move(init);
    TrainState state(data, config, model->num_params());
    TrainTrace trace;

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_params(model->params().begin(), model->params().end());
    int since_best = 0;

    for (int t = 0; t < config.outer_steps; ++t) {
        const double budget = t < config.warmup_steps ? 0.0 : config.budget;
        train_model_step(*model, data, config, budget, state);
        trace.step_losses.push_back(thresholded_system_loss(*model, data, config.budget, loss));

        if (validation != nullptr && !validation->empty()) {
            const double v = thresholded_system_loss(*model, *validation, config.budget, loss);
            trace.validation_losses.push_back(v);
            if (early_stopping) {
                if (v < best) {
                    best = v;
                    best_params.assign(model->params().begin(), model->params().end());
                    trace.best_step = t;
                    since_best = 0;
                } else if (++since_best >= config.patience) {
                    break;
                }
            }
        }
    }
    if (early_stopping && trace.best_step >= 0) std::copy(best_params.begin(), best_params.end(), model->params().begin());

    trace.final_params.assign(model->params().begin(), model->params().end());
    trace.warnings = std::move(state.warnings);
    return {std::move(model), std::move(trace)};
}

// --- ApproximateTriagePolicy ------------------------------------------------

double ApproxTriagePolicy::score(std::span<const double> x) const {
    if (x.size() != scorer->input_dim()) throw PreconditionError("scorer input dimension mismatch");
    return logistic(scorer->forward(x)[0]);
}

std::vector<double> policy_scores(const ApproxTriagePolicy& policy, const Dataset& data) {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = policy.score(data[i].x);
    return out;
}

ApproxTriagePolicy fit_policy_approximator(const Model& model, const Dataset& data, const ModelSpec& scorer_spec,
                                           const TrainConfig& config, TrainTrace* trace) {
    config.validate();
    if (scorer_spec.task() != TaskKind::regression)
        throw PreconditionError("the scorer must have a single real output (its logit)");
    if (scorer_spec.input_dim != data.dim()) throw PreconditionError("scorer input dimension mismatch");

    const LossFn loss = config.loss_for(data.task());
    const auto targets = exact_decisions(model, data.samples(), config.budget, loss);

    ApproxTriagePolicy policy{make_model(scorer_spec, RngSeed{config.seed.value ^ 0x5c0e}), 0.5};
    const bool degenerate = std::adjacent_find(targets.begin(), targets.end(), std::not_equal_to<>()) == targets.end();
    if (degenerate && trace != nullptr)
        trace->warnings.push_back("approximator targets are all " + std::to_string(targets.empty() ? 0 : targets[0]) +
                                  "; fitting a constant policy");

    const double lr = config.scorer_learning_rate > 0.0 ? config.scorer_learning_rate : config.learning_rate;
    Model& scorer = *policy.scorer;
    Optimizer opt(config.optimizer, lr, scorer.num_params());
    auto rng = make_rng(config.seed, kStreamApproximator);
    std::vector<double> total(scorer.num_params());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& batch : make_minibatches(data.size(), config.batch_size, config.shuffle, rng)) {
            std::fill(total.begin(), total.end(), 0.0);
            for (std::size_t i : batch) {
                const double f = scorer.forward(data[i].x)[0];
                const double d = logistic(f) - static_cast<double>(targets[i]);
                add_scaled(total, scorer.backward(data[i].x, std::span<const double>(&d, 1)));
            }
            for (double& g : total) g /= static_cast<double>(batch.size());
            opt.step(scorer.params(), total);
        }
        if (trace != nullptr) {
            double sum = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i)
                sum += binary_cross_entropy_logit(scorer.forward(data[i].x)[0], targets[i]);
            trace->approximator_losses.push_back(sum / static_cast<double>(data.size()));
        }
    }
    return policy;
}

double calibrate_deployment_threshold(const ApproxTriagePolicy& policy, const Model& model,
                                      const Dataset& validation, double b, const LossFn& loss) {
    require_budget(b);
    if (validation.empty()) throw PreconditionError("validation set is empty");
    const std::size_t n = validation.size();
    const auto scores = policy_scores(policy, validation);
    const auto losses = paired_losses(model, validation.samples(), loss);

    // Deferring everything with score >= p is a prefix of the descending order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });

    const double model_total = std::accumulate(losses.model.begin(), losses.model.end(), 0.0);
    const double max_fraction = b + 1.0 / static_cast<double>(n);

    double best_threshold = 1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    auto consider = [&](double threshold, std::size_t deferred, double delta) {
        if (static_cast<double>(deferred) / static_cast<double>(n) > max_fraction) return;
        const double value = (model_total + delta) / static_cast<double>(n);
        // Candidates arrive in descending threshold order, so only strict improvements move it.
        if (value < best_loss) {
            best_loss = value;
            best_threshold = threshold;
        }
    };

    // Threshold 1 defers exactly the scores equal to 1.
    std::size_t pos = 0;
    double delta = 0.0;
    while (pos < n && scores[order[pos]] >= 1.0) {
        delta += losses.human[order[pos]] - losses.model[order[pos]];
        ++pos;
    }
    consider(1.0, pos, delta);
    while (pos < n) {
        const double value = scores[order[pos]];
        while (pos < n && scores[order[pos]] == value) {
            delta += losses.human[order[pos]] - losses.model[order[pos]];
            ++pos;
        }
        consider(value, pos, delta);
    }
    consider(0.0, n, delta);
    return best_threshold;
}

Decisions deploy_with_budget(const ApproxTriagePolicy& policy, const Dataset& data, double b) {
    require_budget(b);
    const auto scores = policy_scores(policy, data);
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (scores[i] >= policy.threshold) flagged.push_back(i);
    const std::size_t cap = budget_count(b, data.size());
    if (flagged.size() > cap) {
        std::stable_sort(flagged.begin(), flagged.end(),
                         [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
        flagged.resize(cap);
    }
    Decisions out(data.size(), 0);
    for (std::size_t i : flagged) out[i] = 1;
    return out;
}

}  // namespace triage
