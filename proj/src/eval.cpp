#include "triage/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

namespace triage {

namespace {

void require_aligned(const Decisions& decisions, const Dataset& data) {
    if (decisions.size() != data.size())
        throw PreconditionError("decisions have " + std::to_string(decisions.size()) + " entries for " +
                                std::to_string(data.size()) + " samples");
    for (auto d : decisions)
        if (d > 1) throw PreconditionError("decisions must be 0 or 1");
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double mean_gradient_norm(const Model& model, const Dataset& data, const LossFn& loss, const Decisions& decisions,
                          std::uint8_t group) {
    std::vector<double> total(model.num_params(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (decisions[i] != group) continue;
        const auto g = loss_gradient(model, data[i], loss);
        for (std::size_t p = 0; p < total.size(); ++p) total[p] += g[p];
        ++count;
    }
    if (count == 0) return 0.0;
    double sq = 0.0;
    for (double g : total) sq += (g / static_cast<double>(count)) * (g / static_cast<double>(count));
    return std::sqrt(sq);
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    if (sorted[lo] == sorted[hi]) return sorted[lo];
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

RatioSummary summarize_ratios(std::vector<double> ratios) {
    RatioSummary s;
    if (ratios.empty()) return s;
    std::sort(ratios.begin(), ratios.end());
    s.present = true;
    s.count = ratios.size();
    s.infinite = static_cast<std::size_t>(std::count(ratios.begin(), ratios.end(), std::numeric_limits<double>::infinity()));
    s.q25 = quantile(ratios, 0.25);
    s.median = quantile(ratios, 0.5);
    s.q75 = quantile(ratios, 0.75);
    return s;
}

double deferred_fraction(const Decisions& d) {
    return d.empty() ? 0.0 : static_cast<double>(std::count(d.begin(), d.end(), 1)) / static_cast<double>(d.size());
}

Decisions from_indices(std::span<const std::size_t> deferred, std::size_t n) {
    Decisions d(n, 0);
    for (auto i : deferred) d[i] = 1;
    return d;
}

}  // namespace

std::string_view to_string(SettingId id) {
    switch (id) {
        case SettingId::S1_full_auto_no_triage: return "S1_full_auto_no_triage";
        case SettingId::S2_full_auto_optimal_triage: return "S2_full_auto_optimal_triage";
        case SettingId::S3_triage_model_mismatched_policy: return "S3_triage_model_mismatched_policy";
        case SettingId::S4_triage_model_optimal_triage: return "S4_triage_model_optimal_triage";
    }
    return "unknown";
}

double system_loss(const Decisions& decisions, const Model& model, const Dataset& data, const LossFn& loss) {
    require_aligned(decisions, data);
    if (data.empty()) throw PreconditionError("system_loss needs a nonempty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += decisions[i] ? human_loss(data[i], loss) : sample_loss(model, data[i], loss);
    return total / static_cast<double>(data.size());
}

double biased_point_estimate_loss(const Decisions& decisions, const Model& model, const Dataset& data) {
    if (data.task() != TaskKind::regression || model.task() != TaskKind::regression)
        throw UnsupportedTask("the point-estimate human loss is defined for squared-loss regression");
    require_aligned(decisions, data);
    if (data.empty()) throw PreconditionError("biased_point_estimate_loss needs a nonempty dataset");
    const LossFn loss = LossFn::squared();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += decisions[i] ? squared_loss(mean_of(data[i].h), data[i].y) : sample_loss(model, data[i], loss);
    return total / static_cast<double>(data.size());
}

double mean_deferred_human_variance(const Decisions& decisions, const Dataset& data) {
    require_aligned(decisions, data);
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (decisions[i]) total += population_variance(data[i].h);
    return total / static_cast<double>(data.size());
}

double deferred_gradient_norm(const Model& model, const Dataset& data, double b, const LossFn& loss) {
    if (data.empty()) return 0.0;
    return mean_gradient_norm(model, data, loss, exact_decisions(model, data.samples(), b, loss), 1);
}

double kept_gradient_norm(const Model& model, const Dataset& data, double b, const LossFn& loss) {
    if (data.empty()) return 0.0;
    return mean_gradient_norm(model, data, loss, exact_decisions(model, data.samples(), b, loss), 0);
}

TriageRatioReport triage_ratio_report(const Model& model, const Decisions& decisions, const Dataset& data,
                                      const LossFn& loss) {
    require_aligned(decisions, data);
    std::vector<double> kept, deferred;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double h = human_loss(data[i], loss);
        const double m = sample_loss(model, data[i], loss);
        const double ratio = h < 1e-12 ? std::numeric_limits<double>::infinity() : m / h;
        (decisions[i] ? deferred : kept).push_back(ratio);
    }
    return {summarize_ratios(std::move(kept)), summarize_ratios(std::move(deferred))};
}

FourSettingsConfig default_four_settings() {
    FourSettingsConfig c;
    c.full_automation.budget = 0.0;
    c.full_automation.outer_steps = 100;
    c.full_automation.batch_size = 8;
    c.full_automation.learning_rate = 0.3;
    c.triage = c.full_automation;
    c.triage.budget = 1.0;
    c.triage.warmup_steps = 1;
    return c;
}

TrainConfig default_sweep_train() {
    TrainConfig c;
    c.outer_steps = 10;
    c.epochs = 20;
    c.batch_size = 32;
    c.learning_rate = 0.1;
    return c;
}

bool RunReport::ordered() const {
    const double s1 = loss(SettingId::S1_full_auto_no_triage), s2 = loss(SettingId::S2_full_auto_optimal_triage),
                 s3 = loss(SettingId::S3_triage_model_mismatched_policy),
                 s4 = loss(SettingId::S4_triage_model_optimal_triage);
    return s4 < s2 && s2 < s3 && s3 < s1;
}

RunReport run_four_settings(const FourSettingsConfig& config) {
    const Dataset data = gen_regression(config.data);
    if (config.model.task() != TaskKind::regression)
        throw UnsupportedTask("the four-settings comparison uses a regression model");

    TrainConfig fa_config = config.full_automation;
    fa_config.budget = 0.0;
    const double b = config.triage.budget;
    const LossFn loss = config.triage.loss_for(TaskKind::regression);

    auto fa = train_under_triage(data, config.model, fa_config);
    auto tr = train_under_triage(data, config.model, config.triage);
    const Model& m0 = *fa.model;
    const Model& m = *tr.model;

    const auto paired0 = paired_losses(m0, data.samples(), loss);
    const auto paired = paired_losses(m, data.samples(), loss);
    const Decisions pi0(data.size(), 0);
    const Decisions policy0 = exact_decisions(paired0.diffs(), b);
    const Decisions policy = exact_decisions(paired.diffs(), b);

    RunReport r;
    r.budget = b;
    r.setting_loss[0] = system_loss(pi0, m0, data, loss);
    r.setting_loss[1] = thresholded_system_loss(paired0, b);
    r.setting_loss[2] = system_loss(policy0, m, data, loss);
    r.setting_loss[3] = thresholded_system_loss(paired, b);
    r.theta_full_auto.assign(m0.params().begin(), m0.params().end());
    r.theta_triage.assign(m.params().begin(), m.params().end());
    r.deferred_fraction_full_auto = deferred_fraction(policy0);
    r.deferred_fraction_triage = deferred_fraction(policy);
    r.bias_gap = system_loss(policy, m, data, loss) - biased_point_estimate_loss(policy, m, data);
    r.deferred_gradient_norm = deferred_gradient_norm(m0, data, b, loss);
    r.kept_gradient_norm = kept_gradient_norm(m, data, b, loss);
    r.instances.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        r.instances.push_back({data[i].x[0], data[i].y, paired.human[i], paired0.model[i], paired.model[i],
                               policy0[i], policy[i]});
    r.trace_full_auto = std::move(fa.trace);
    r.trace_triage = std::move(tr.trace);
    return r;
}

std::vector<double> draw_human_predictions(const Dataset& test, RngSeed seed) {
    auto rng = make_rng(seed, 0x4d2a);
    std::vector<double> out(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& h = test[i].h;
        std::uniform_int_distribution<std::size_t> pick(0, h.size() - 1);
        out[i] = h[pick(rng)];
    }
    return out;
}

SweepRow evaluate_method(const DatasetSplit& split, Method method, double b, const SweepConfig& config,
                         std::uint64_t seed, std::span<const double> human_draws, std::vector<std::string>* warnings) {
    require_budget(b);
    const Dataset& test = split.test;
    if (human_draws.size() != test.size()) throw PreconditionError("need one human draw per test sample");
    const bool classification = test.task() == TaskKind::classification;
    if (!classification && (method == Method::score || method == Method::confidence))
        throw UnsupportedTask(std::string(to_string(method)) + " triage needs a classification task");

    TrainConfig cfg = config.train;
    cfg.budget = b;
    cfg.seed = RngSeed{seed};
    const LossFn loss = cfg.loss_for(test.task());

    SweepRow row;
    row.method = method;
    row.budget = b;
    row.seed = seed;
    row.n_test = test.size();

    std::optional<AnyModel> model;
    Decisions decisions;
    std::vector<std::string> notes;
    switch (method) {
        case Method::ours:
        case Method::full_automation: {
            auto p = fit_triage_pipeline(split.train, split.val, config.model, config.scorer, cfg,
                                         method == Method::ours ? b : 0.0);
            decisions = deploy_with_budget(p.policy, test, b);
            row.threshold = p.policy.threshold;
            notes = std::move(p.trace.warnings);
            model.emplace(std::move(p.model));
            break;
        }
        case Method::score: {
            TrainConfig fa = cfg;
            fa.budget = 0.0;
            auto r = train_under_triage(split.train, config.model, fa, &split.val);
            decisions = from_indices(score_based_rank(*r.model, test, b), test.size());
            notes = std::move(r.trace.warnings);
            model.emplace(std::move(r.model));
            break;
        }
        case Method::confidence: {
            auto r = confidence_based_train(split.train, config.model, cfg, b);
            decisions = from_indices(
                confidence_based_test_selection(*r.model, test, b, global_human_accuracy(split.train)), test.size());
            notes = std::move(r.trace.warnings);
            model.emplace(std::move(r.model));
            break;
        }
    }

    row.test_system_loss = system_loss(decisions, **model, test, loss);
    row.deferred_fraction = deferred_fraction(decisions);
    if (classification) {
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double pred = decisions[i] ? human_draws[i]
                                             : static_cast<double>(predicted_class(predict(**model, test[i].x)));
            if (pred != test[i].y) ++wrong;
        }
        row.test_error = static_cast<double>(wrong) / static_cast<double>(test.size());
    }
    if (warnings)
        for (auto& w : notes)
            warnings->push_back(std::string(to_string(method)) + " b=" + std::to_string(b) +
                                " seed=" + std::to_string(seed) + ": " + w);
    return row;
}

SweepResult budget_sweep(const SweepConfig& config) {
    if (config.budgets.empty() || config.methods.empty() || config.seeds.empty())
        throw PreconditionError("sweep needs at least one budget, method and seed");
    for (double b : config.budgets) require_budget(b);
    config.train.validate();

    struct SeedData {
        DatasetSplit split;
        std::vector<double> draws;
    };
    std::vector<SeedData> per_seed;
    per_seed.reserve(config.seeds.size());
    for (auto seed : config.seeds) {
        ClassificationSpec spec = config.data;
        spec.seed = RngSeed{seed};
        auto split = split_dataset(gen_classification(spec), config.split, RngSeed{seed});
        auto draws = draw_human_predictions(split.test, RngSeed{seed});
        per_seed.push_back({std::move(split), std::move(draws)});
    }

    const std::size_t per = config.methods.size() * config.budgets.size();
    const std::size_t cells = config.seeds.size() * per;
    std::vector<SweepRow> rows(cells);
    std::vector<std::vector<std::string>> cell_warnings(cells);
    std::vector<std::exception_ptr> errors(cells);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t c = next++; c < cells; c = next++) {
            const std::size_t s = c / per;
            const std::size_t m = (c % per) / config.budgets.size();
            const std::size_t k = c % config.budgets.size();
            try {
                rows[c] = evaluate_method(per_seed[s].split, config.methods[m], config.budgets[k], config,
                                          config.seeds[s], per_seed[s].draws, &cell_warnings[c]);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const auto jobs = static_cast<std::size_t>(std::max(1, config.jobs));
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < std::min(jobs, cells); ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    SweepResult result;
    result.rows = std::move(rows);
    for (auto& w : cell_warnings) result.warnings.insert(result.warnings.end(), w.begin(), w.end());
    result.summary = summarize(result.rows);
    return result;
}

std::vector<SweepSummary> summarize(std::span<const SweepRow> rows) {
    std::vector<SweepSummary> out;
    auto mean_se = [](const std::vector<double>& v) {
        const double m = mean_of(v);
        if (v.size() < 2) return std::pair{m, 0.0};
        double acc = 0.0;
        for (double x : v) acc += (x - m) * (x - m);
        return std::pair{m, std::sqrt(acc / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
    };
    std::vector<std::pair<Method, double>> keys;
    for (const auto& r : rows)
        if (std::find(keys.begin(), keys.end(), std::pair{r.method, r.budget}) == keys.end())
            keys.emplace_back(r.method, r.budget);
    for (const auto& [method, b] : keys) {
        std::vector<double> err, sys, frac;
        bool has_error = true;
        for (const auto& r : rows) {
            if (r.method != method || r.budget != b) continue;
            if (r.test_error) err.push_back(*r.test_error);
            else has_error = false;
            sys.push_back(r.test_system_loss);
            frac.push_back(r.deferred_fraction);
        }
        SweepSummary s;
        s.method = method;
        s.budget = b;
        s.seeds = sys.size();
        if (has_error) {
            const auto [m, se] = mean_se(err);
            s.mean_error = m;
            s.se_error = se;
        }
        std::tie(s.mean_system_loss, s.se_system_loss) = mean_se(sys);
        s.mean_deferred_fraction = mean_of(frac);
        out.push_back(s);
    }
    return out;
}

}  // namespace triage
