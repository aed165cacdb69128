#include "triage/baselines.hpp"

#include <algorithm>
#include <numeric>

namespace triage {

namespace {

void require_classifier(const Model& model) {
    if (model.task() != TaskKind::classification)
        throw UnsupportedTask("confidence ranking needs a classification model");
}

std::vector<double> confidences(const Model& model, const Dataset& data) {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = confidence(predict(model, data[i].x));
    return out;
}

// Indices sorted by ascending key, ties by ascending index.
std::vector<std::size_t> ascending(std::span<const double> key) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    return order;
}

std::vector<std::size_t> first_sorted(std::vector<std::size_t> order, std::size_t count) {
    order.resize(std::min(count, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::ours: return "ours";
        case Method::full_automation: return "full_automation";
        case Method::score: return "score";
        case Method::confidence: return "confidence";
    }
    return "unknown";
}

Method parse_method(std::string_view text) {
    for (auto m : {Method::ours, Method::full_automation, Method::score, Method::confidence})
        if (to_string(m) == text) return m;
    throw PreconditionError("unknown method '" + std::string(text) + "'; valid: " + std::string(method_names()));
}

std::string_view method_names() { return "ours, full_automation, score, confidence"; }

std::string_view to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::full_automation: return "full_automation";
        case BaselineKind::score_based: return "score_based";
        case BaselineKind::confidence_based: return "confidence_based";
    }
    return "unknown";
}

TriagePipeline fit_triage_pipeline(const Dataset& train, const Dataset& validation, const ModelSpec& spec,
                                   const ModelSpec& scorer_spec, const TrainConfig& config, double training_budget) {
    TrainConfig model_config = config;
    model_config.budget = training_budget;
    auto result = train_under_triage(train, spec, model_config, &validation);

    auto policy = fit_policy_approximator(*result.model, train, scorer_spec, config, &result.trace);
    policy.threshold = calibrate_deployment_threshold(policy, *result.model, validation, config.budget,
                                                      config.loss_for(train.task()));
    return {std::move(result.model), std::move(policy), std::move(result.trace)};
}

TriagePipeline train_full_automation(const Dataset& train, const Dataset& validation, const ModelSpec& spec,
                                     const ModelSpec& scorer_spec, const TrainConfig& config) {
    return fit_triage_pipeline(train, validation, spec, scorer_spec, config, 0.0);
}

std::vector<std::size_t> score_based_rank(const Model& model, const Dataset& test, double b) {
    require_classifier(model);
    require_budget(b);
    const auto conf = confidences(model, test);
    return first_sorted(ascending(conf), budget_count(b, test.size()));
}

double global_human_accuracy(const Dataset& data) {
    std::size_t hits = 0, votes = 0;
    for (const auto& s : data.samples()) {
        hits += static_cast<std::size_t>(std::count(s.h.begin(), s.h.end(), s.y));
        votes += s.h.size();
    }
    return votes == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(votes);
}

TrainResult confidence_based_train(const Dataset& train, const ModelSpec& spec, const TrainConfig& config, double b) {
    config.validate();
    require_budget(b);
    if (train.task() != TaskKind::classification || spec.task() != TaskKind::classification)
        throw UnsupportedTask("confidence-based triage needs a classification task");

    const double accuracy = global_human_accuracy(train);
    const LossFn loss = config.loss_for(train.task());
    AnyModel model = make_model(spec, config.seed);
    TrainState state(train, config, model->num_params());
    TrainTrace trace;
    std::size_t fallbacks = 0, batches = 0;

    std::vector<double> margin;
    std::vector<double> total(model->num_params());
    for (int t = 0; t < config.outer_steps; ++t) {
        for (const auto& batch : make_minibatches(train.size(), config.batch_size, config.shuffle, state.rng)) {
            ++batches;
            margin.resize(batch.size());
            std::size_t n_c = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double conf = confidence(predict(*model, train[batch[i]].x));
                margin[i] = accuracy - conf;
                if (accuracy > conf) ++n_c;
            }
            std::size_t keep = std::min(budget_count(b, batch.size()), n_c);
            std::vector<std::uint8_t> use(batch.size(), 1);
            if (keep == 0) {
                ++fallbacks;
            } else {
                std::fill(use.begin(), use.end(), 0);
                const auto order = ascending(margin);
                for (std::size_t j = 0; j < keep; ++j) use[order[j]] = 1;
            }
            std::fill(total.begin(), total.end(), 0.0);
            std::size_t used = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (!use[i]) continue;
                const auto g = loss_gradient(*model, train[batch[i]], loss);
                for (std::size_t p = 0; p < total.size(); ++p) total[p] += g[p];
                ++used;
            }
            for (double& g : total) g /= static_cast<double>(used);
            state.optimizer.step(model->params(), total);
        }
        trace.step_losses.push_back(thresholded_system_loss(*model, train, b, loss));
    }
    if (fallbacks > 0)
        trace.warnings.push_back("confidence-based training kept zero samples in " + std::to_string(fallbacks) + " of " +
                                 std::to_string(batches) + " minibatches; used the full batch instead");
    trace.final_params.assign(model->params().begin(), model->params().end());
    return {std::move(model), std::move(trace)};
}

std::vector<std::size_t> confidence_based_test_selection(const Model& model, const Dataset& test, double b,
                                                         double human_accuracy) {
    require_classifier(model);
    require_budget(b);
    const auto conf = confidences(model, test);
    const auto n_c = static_cast<std::size_t>(
        std::count_if(conf.begin(), conf.end(), [&](double c) { return human_accuracy > c; }));
    return first_sorted(ascending(conf), std::min(budget_count(b, test.size()), n_c));
}

}  // namespace triage
