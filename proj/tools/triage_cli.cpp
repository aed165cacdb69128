// Command-line driver: dataset generation, training, evaluation, budget sweeps,
// the four-settings regression comparison and gradient checking.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "triage/baselines.hpp"
#include "triage/core.hpp"
#include "triage/eval.hpp"
#include "triage/io.hpp"
#include "triage/policy.hpp"
#include "triage/synthdata.hpp"
#include "triage/train.hpp"

namespace fs = std::filesystem;
using namespace triage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutDirEnv = "TRIAGE_OUT_DIR";

// A failure the user can fix by changing flags or the config file.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& out_help) {
    cmd->add_option("--config", o.config, "JSON config file (every key optional)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Seed applied to data generation, splitting and training");
    cmd->add_option("--out", o.out, out_help);
}

fs::path default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? fs::path(env) : fs::path("results");
}

fs::path out_dir(const CommonOptions& o) { return o.out.empty() ? default_out_dir() : fs::path(o.out); }

AppConfig load(const CommonOptions& o) {
    AppConfig c = o.config.empty() ? AppConfig{} : load_config(o.config);
    if (o.seed) c.override_seed(*o.seed);
    return c;
}

std::string jsonl(const std::vector<Json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

Json header(const char* format, std::initializer_list<const char*> columns) {
    return Json{{"format", format}, {"columns", std::vector<std::string>(columns.begin(), columns.end())}};
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void log(const std::string& msg) { std::cerr << "[triage] " << msg << '\n'; }

void log_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) log("warning: " + w);
}

// ---- generate -------------------------------------------------------------------------------

struct GenerateOptions {
    CommonOptions common;
    std::string task;
};

int cmd_generate(const GenerateOptions& o) {
    AppConfig c = load(o.common);
    if (!o.task.empty()) c.task = parse_task_kind(o.task);
    const fs::path path = o.common.out.empty() ? default_out_dir() / "dataset.jsonl" : fs::path(o.common.out);

    std::vector<std::size_t> regions;
    const Dataset data =
        c.task == TaskKind::regression ? gen_regression(c.regression) : gen_classification(c.classification, &regions);
    write_dataset(path, data);

    std::cout << "wrote " << data.size() << " samples (" << to_string(data.task()) << ") to " << path.string() << '\n';
    if (data.task() == TaskKind::regression) {
        const auto& spec = c.regression;
        const std::size_t regions = spec.boundaries.size() + 1;
        std::vector<std::size_t> count(regions);
        std::vector<double> sq(regions);
        std::vector<std::size_t> draws(regions);
        for (const auto& s : data.samples()) {
            const auto r = spec.region_of(s.x[0]);
            ++count[r];
            for (double h : s.h) {
                sq[r] += (h - s.y) * (h - s.y);
                ++draws[r];
            }
        }
        std::cout << "region  samples  noise_var(config)  noise_var(empirical)\n";
        for (std::size_t r = 0; r < regions; ++r)
            std::cout << std::setw(6) << r << std::setw(9) << count[r] << std::setw(19)
                      << fmt("%.4g", spec.noise_variances[r]) << std::setw(22)
                      << (draws[r] ? fmt("%.4g", sq[r] / static_cast<double>(draws[r])) : std::string("-")) << '\n';
    } else {
        const auto& spec = c.classification;
        std::vector<std::size_t> count(spec.regions);
        std::vector<double> agree(spec.regions);
        for (std::size_t i = 0; i < data.size(); ++i) {
            ++count[regions[i]];
            agree[regions[i]] += human_agreement(data[i]);
        }
        std::cout << "region  samples  confusion(config)  expert_accuracy(empirical)\n";
        for (std::size_t r = 0; r < spec.regions; ++r)
            std::cout << std::setw(6) << r << std::setw(9) << count[r] << std::setw(19)
                      << fmt("%.4g", spec.confusion_of(r)) << std::setw(28)
                      << (count[r] ? fmt("%.4f", agree[r] / static_cast<double>(count[r])) : std::string("-")) << '\n';
    }
    return kExitOk;
}

// ---- train / evaluate --------------------------------------------------------------------------

struct TrainOptions {
    CommonOptions common;
    std::string data;
    std::optional<double> budget;
    std::string method = "ours";
    std::string filter_with;
};

Dataset load_or_generate(const AppConfig& c, const std::string& data_path) {
    if (!data_path.empty()) return read_dataset(fs::path(data_path));
    return c.task == TaskKind::regression ? gen_regression(c.regression) : gen_classification(c.classification);
}

int cmd_train(const TrainOptions& o) {
    AppConfig c = load(o.common);
    if (o.budget) c.train.budget = *o.budget;
    if (!o.filter_with.empty()) c.train.filter_with = parse_filter_with(o.filter_with);
    const Method method = parse_method(o.method);
    const Dataset data = load_or_generate(c, o.data);
    c.task = data.task();
    const auto split = split_dataset(data, c.split, c.train.seed);
    const ModelSpec spec = c.model_for_task();
    const fs::path dir = out_dir(o.common);
    const double b = c.train.budget;
    log("training " + std::string(to_string(method)) + " at b=" + fmt("%g", b) + " on " +
        std::to_string(split.train.size()) + " samples");

    Json ckpt{{"format", "triage.run.v1"},
              {"method", std::string(to_string(method))},
              {"budget", b},
              {"split_seed", c.train.seed.value},
              {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
              {"train", to_json(c.train)}};
    TrainTrace trace;
    switch (method) {
        case Method::ours:
        case Method::full_automation: {
            auto p = fit_triage_pipeline(split.train, split.val, spec, c.scorer_for_task(), c.train,
                                         method == Method::ours ? b : 0.0);
            ckpt["model"] = checkpoint_to_json(*p.model);
            ckpt["scorer"] = checkpoint_to_json(*p.policy.scorer);
            ckpt["threshold"] = p.policy.threshold;
            trace = std::move(p.trace);
            break;
        }
        case Method::score: {
            if (data.task() != TaskKind::classification)
                throw UnsupportedTask("score-based triage needs a classification task");
            TrainConfig fa = c.train;
            fa.budget = 0.0;
            auto r = train_under_triage(split.train, spec, fa, &split.val);
            ckpt["model"] = checkpoint_to_json(*r.model);
            trace = std::move(r.trace);
            break;
        }
        case Method::confidence: {
            auto r = confidence_based_train(split.train, spec, c.train, b);
            ckpt["model"] = checkpoint_to_json(*r.model);
            ckpt["human_accuracy"] = global_human_accuracy(split.train);
            trace = std::move(r.trace);
            break;
        }
    }
    log_warnings(trace.warnings);

    std::vector<Json> records{header("triage.trace.v1", {"kind", "step", "value"})};
    for (std::size_t i = 0; i < trace.step_losses.size(); ++i)
        records.push_back({{"kind", "train_loss"}, {"step", i}, {"value", trace.step_losses[i]}});
    for (std::size_t i = 0; i < trace.validation_losses.size(); ++i)
        records.push_back({{"kind", "validation_loss"}, {"step", i}, {"value", trace.validation_losses[i]}});
    for (std::size_t i = 0; i < trace.approximator_losses.size(); ++i)
        records.push_back({{"kind", "approximator_bce"}, {"step", i}, {"value", trace.approximator_losses[i]}});
    write_text_file(dir / "checkpoint.json", ckpt.dump(2) + "\n");
    write_text_file(dir / "trace.jsonl", jsonl(records));

    std::cout << "method " << to_string(method) << "  b " << b << "  steps " << trace.step_losses.size();
    if (!trace.step_losses.empty()) std::cout << "  final train loss " << fmt("%.6g", trace.step_losses.back());
    if (ckpt.contains("threshold")) std::cout << "  p_hat " << fmt("%.6g", ckpt["threshold"].get<double>());
    std::cout << '\n' << "wrote " << (dir / "checkpoint.json").string() << " and " << (dir / "trace.jsonl").string()
              << '\n';
    return kExitOk;
}

struct EvaluateOptions {
    CommonOptions common;
    std::string data;
    std::string checkpoint;
    std::optional<double> budget;
};

int cmd_evaluate(const EvaluateOptions& o) {
    AppConfig c = load(o.common);
    const Json run = read_json_file(o.checkpoint);
    if (!run.is_object() || run.value("format", "") != "triage.run.v1")
        throw ConfigError(o.checkpoint + ": not a run checkpoint written by 'train'");
    const Method method = parse_method(run.at("method").get<std::string>());
    const double b = o.budget ? *o.budget : run.at("budget").get<double>();
    require_budget(b);
    const AnyModel model = checkpoint_from_json(run.at("model"));
    SplitFractions fr{run.at("split").at("train").get<double>(), run.at("split").at("val").get<double>(),
                      run.at("split").at("test").get<double>()};

    const Dataset data = load_or_generate(c, o.data);
    const auto split = split_dataset(data, fr, RngSeed{run.at("split_seed").get<std::uint64_t>()});
    const Dataset& test = split.test;
    const LossFn loss = LossFn::for_task(test.task(), run.at("train").at("smoothing_epsilon").get<double>());

    Decisions decisions(test.size(), 0);
    std::vector<double> scores;
    switch (method) {
        case Method::ours:
        case Method::full_automation: {
            ApproxTriagePolicy policy{checkpoint_from_json(run.at("scorer")), run.at("threshold").get<double>()};
            decisions = deploy_with_budget(policy, test, b);
            scores = policy_scores(policy, test);
            break;
        }
        case Method::score:
            for (auto i : score_based_rank(*model, test, b)) decisions[i] = 1;
            break;
        case Method::confidence:
            for (auto i : confidence_based_test_selection(*model, test, b, run.at("human_accuracy").get<double>()))
                decisions[i] = 1;
            break;
    }

    const auto paired = paired_losses(*model, test.samples(), loss);
    std::vector<Json> records{
        header("triage.instances.v1", {"index", "model_loss", "human_loss", "decision", "score", "exact_decision"})};
    const Decisions exact = exact_decisions(paired.diffs(), b);
    for (std::size_t i = 0; i < test.size(); ++i)
        records.push_back({{"index", i},
                           {"model_loss", paired.model[i]},
                           {"human_loss", paired.human[i]},
                           {"decision", decisions[i]},
                           {"score", scores.empty() ? Json(nullptr) : Json(scores[i])},
                           {"exact_decision", exact[i]}});

    const double sys = system_loss(decisions, *model, test, loss);
    const double frac = static_cast<double>(std::count(decisions.begin(), decisions.end(), 1)) /
                        static_cast<double>(test.size());
    const auto ratios = triage_ratio_report(*model, decisions, test, loss);
    auto group = [](const RatioSummary& s) -> Json {
        if (!s.present) return Json{{"present", false}};
        auto num = [](double v) { return std::isinf(v) ? Json("inf") : Json(v); };
        return Json{{"present", true}, {"count", s.count},         {"infinite", s.infinite},
                    {"q25", num(s.q25)}, {"median", num(s.median)}, {"q75", num(s.q75)}};
    };
    Json summary{{"format", "triage.evaluation.v1"},
                 {"method", std::string(to_string(method))},
                 {"budget", b},
                 {"n_test", test.size()},
                 {"system_loss", sys},
                 {"deferred_fraction", frac},
                 {"ratio_kept", group(ratios.kept)},
                 {"ratio_deferred", group(ratios.deferred)}};
    const fs::path dir = out_dir(o.common);
    write_text_file(dir / "evaluation.jsonl", jsonl(records));
    write_text_file(dir / "evaluation_summary.json", summary.dump(2) + "\n");

    std::cout << "method " << to_string(method) << "  b " << b << "  n_test " << test.size() << "  system loss "
              << fmt("%.6g", sys) << "  deferred " << fmt("%.4f", frac) << '\n';
    return kExitOk;
}

// ---- sweep ------------------------------------------------------------------------------------

struct SweepOptions {
    CommonOptions common;
    std::vector<double> budgets;
    std::vector<std::string> methods;
    std::optional<int> jobs;
    std::string filter_with;
};

int cmd_sweep(const SweepOptions& o) {
    AppConfig c = load(o.common);
    c.task = TaskKind::classification;
    if (!o.budgets.empty()) c.sweep_budgets = o.budgets;
    if (!o.methods.empty()) {
        c.sweep_methods.clear();
        for (const auto& m : o.methods) c.sweep_methods.push_back(parse_method(m));
    }
    if (o.jobs) c.jobs = *o.jobs;
    if (!o.filter_with.empty()) c.train.filter_with = parse_filter_with(o.filter_with);
    const SweepConfig cfg = c.sweep_config();
    log("sweep: " + std::to_string(cfg.methods.size()) + " methods x " + std::to_string(cfg.budgets.size()) +
        " budgets x " + std::to_string(cfg.seeds.size()) + " seeds, jobs=" + std::to_string(cfg.jobs));

    const SweepResult r = budget_sweep(cfg);
    log_warnings(r.warnings);

    std::vector<Json> rows{header("triage.sweep.v1", {"method", "budget", "seed", "n_test", "test_error",
                                                     "test_system_loss", "deferred_fraction", "threshold"})};
    for (const auto& row : r.rows)
        rows.push_back({{"method", std::string(to_string(row.method))},
                        {"budget", row.budget},
                        {"seed", row.seed},
                        {"n_test", row.n_test},
                        {"test_error", optional_number(row.test_error)},
                        {"test_system_loss", row.test_system_loss},
                        {"deferred_fraction", row.deferred_fraction},
                        {"threshold", optional_number(row.threshold)}});
    std::vector<Json> summary{header("triage.sweep_summary.v1",
                                     {"method", "budget", "seeds", "mean_error", "se_error", "mean_system_loss",
                                      "se_system_loss", "mean_deferred_fraction"})};
    for (const auto& s : r.summary)
        summary.push_back({{"method", std::string(to_string(s.method))},
                           {"budget", s.budget},
                           {"seeds", s.seeds},
                           {"mean_error", optional_number(s.mean_error)},
                           {"se_error", optional_number(s.se_error)},
                           {"mean_system_loss", s.mean_system_loss},
                           {"se_system_loss", s.se_system_loss},
                           {"mean_deferred_fraction", s.mean_deferred_fraction}});
    const fs::path dir = out_dir(o.common);
    write_text_file(dir / "sweep.jsonl", jsonl(rows));
    write_text_file(dir / "sweep_summary.jsonl", jsonl(summary));

    std::cout << "method            b     error    +-se     sys_loss  +-se      deferred\n";
    for (const auto& s : r.summary)
        std::cout << std::left << std::setw(16) << to_string(s.method) << std::right << std::setw(5)
                  << fmt("%.2f", s.budget) << std::setw(9) << (s.mean_error ? fmt("%.4f", *s.mean_error) : "-")
                  << std::setw(9) << (s.se_error ? fmt("%.4f", *s.se_error) : "-") << std::setw(10)
                  << fmt("%.4f", s.mean_system_loss) << std::setw(8) << fmt("%.4f", s.se_system_loss) << std::setw(10)
                  << fmt("%.3f", s.mean_deferred_fraction) << '\n';
    std::cout << "wrote " << (dir / "sweep.jsonl").string() << " and " << (dir / "sweep_summary.jsonl").string()
              << '\n';
    return kExitOk;
}

// ---- four-settings -----------------------------------------------------------------------------

struct FourSettingsOptions {
    CommonOptions common;
    std::optional<double> budget;
    std::string filter_with;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_four_settings(const FourSettingsOptions& o) {
    const AppConfig c = load(o.common);
    FourSettingsConfig base = c.four_settings;
    if (o.budget) base.triage.budget = *o.budget;
    if (!o.filter_with.empty()) {
        base.triage.filter_with = parse_filter_with(o.filter_with);
        base.full_automation.filter_with = base.triage.filter_with;
    }
    const fs::path dir = out_dir(o.common);

    std::vector<Json> runs{header("triage.four_settings.v1",
                                  {"seed", "S1", "S2", "S3", "S4", "ordered", "theta_full_auto", "theta_triage",
                                   "deferred_fraction_full_auto", "deferred_fraction_triage", "bias_gap",
                                   "deferred_gradient_norm", "kept_gradient_norm"})};
    std::array<std::vector<double>, 4> losses;
    std::size_t ordered = 0;
    std::cout << "seed        S1        S2        S3        S4  ordered\n";
    for (auto seed : c.four_settings_seeds) {
        FourSettingsConfig cfg = base;
        cfg.data.seed = RngSeed{seed};
        cfg.full_automation.seed = RngSeed{seed};
        cfg.triage.seed = RngSeed{seed};
        const RunReport r = run_four_settings(cfg);
        log_warnings(r.trace_full_auto.warnings);
        log_warnings(r.trace_triage.warnings);
        for (std::size_t k = 0; k < 4; ++k) losses[k].push_back(r.setting_loss[k]);
        ordered += r.ordered();
        runs.push_back({{"seed", seed},
                        {"S1", r.setting_loss[0]},
                        {"S2", r.setting_loss[1]},
                        {"S3", r.setting_loss[2]},
                        {"S4", r.setting_loss[3]},
                        {"ordered", r.ordered()},
                        {"theta_full_auto", r.theta_full_auto},
                        {"theta_triage", r.theta_triage},
                        {"deferred_fraction_full_auto", r.deferred_fraction_full_auto},
                        {"deferred_fraction_triage", r.deferred_fraction_triage},
                        {"bias_gap", r.bias_gap},
                        {"deferred_gradient_norm", r.deferred_gradient_norm},
                        {"kept_gradient_norm", r.kept_gradient_norm}});

        std::vector<Json> inst{header("triage.four_settings_instances.v1",
                                      {"x", "y", "human_loss", "loss_full_auto", "loss_triage", "decision_full_auto",
                                       "decision_triage"})};
        for (const auto& i : r.instances)
            inst.push_back({{"x", i.x},
                            {"y", i.y},
                            {"human_loss", i.human_loss},
                            {"loss_full_auto", i.loss_full_auto},
                            {"loss_triage", i.loss_triage},
                            {"decision_full_auto", i.decision_full_auto},
                            {"decision_triage", i.decision_triage}});
        write_text_file(dir / ("instances_seed" + std::to_string(seed) + ".jsonl"), jsonl(inst));

        std::vector<Json> trace{header("triage.trace.v1", {"run", "step", "train_loss"})};
        for (std::size_t t = 0; t < r.trace_full_auto.step_losses.size(); ++t)
            trace.push_back({{"run", "full_automation"}, {"step", t}, {"train_loss", r.trace_full_auto.step_losses[t]}});
        for (std::size_t t = 0; t < r.trace_triage.step_losses.size(); ++t)
            trace.push_back({{"run", "triage"}, {"step", t}, {"train_loss", r.trace_triage.step_losses[t]}});
        write_text_file(dir / ("trace_seed" + std::to_string(seed) + ".jsonl"), jsonl(trace));

        std::cout << std::setw(4) << seed;
        for (double v : r.setting_loss) std::cout << std::setw(10) << fmt("%.5f", v);
        std::cout << std::setw(9) << (r.ordered() ? "yes" : "no") << '\n';
    }
    Json summary{{"format", "triage.four_settings_summary.v1"},
                 {"seeds", c.four_settings_seeds.size()},
                 {"ordered_seeds", ordered},
                 {"median_S1", median(losses[0])},
                 {"median_S2", median(losses[1])},
                 {"median_S3", median(losses[2])},
                 {"median_S4", median(losses[3])},
                 {"full_automation", to_json(base.full_automation)},
                 {"triage", to_json(base.triage)},
                 {"data", to_json(base.data)}};
    summary["data"].erase("seed");
    write_text_file(dir / "four_settings.jsonl", jsonl(runs));
    write_text_file(dir / "four_settings_summary.json", summary.dump(2) + "\n");

    std::cout << "median";
    for (const auto& l : losses) std::cout << std::setw(10) << fmt("%.5f", median(l));
    std::cout << "\nordering S4 < S2 < S3 < S1 held on " << ordered << "/" << c.four_settings_seeds.size()
              << " seeds\n";
    return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------------------------------

struct GradcheckOptionsCli {
    CommonOptions common;
    std::optional<std::size_t> trials;
    std::string model;
    bool corrupt = false;
};

int cmd_gradcheck(const GradcheckOptionsCli& o) {
    AppConfig c = load(o.common);
    GradcheckConfig g = c.gradcheck;
    if (o.trials) g.options.trials = *o.trials;
    if (g.options.trials < 1) throw UsageError("--trials must be at least 1");
    g.options.corrupt_gradient = o.corrupt;
    if (!o.model.empty()) {
        const ModelKind kind = parse_model_kind(o.model);
        std::erase_if(g.models, [&](const ModelSpec& s) { return s.kind != kind; });
        if (g.models.empty()) throw UsageError("no configured model of kind '" + o.model + "'");
    }
    bool all = true;
    double worst = 0.0;
    std::cout << "model                         trials  worst_rel_error  result\n";
    for (const auto& spec : g.models) {
        const auto r = gradcheck(spec, g.options);
        all = all && r.passed;
        worst = std::max(worst, r.worst);
        std::string name(to_string(spec.kind));
        if (spec.kind == ModelKind::mlp) {
            name += "(" + std::string(to_string(spec.activation));
            for (auto h : spec.hidden) name += "," + std::to_string(h);
            name += spec.num_classes ? ",K=" + std::to_string(spec.num_classes) + ")" : ")";
        }
        std::cout << std::left << std::setw(30) << name << std::right << std::setw(6) << r.trials << std::setw(17)
                  << fmt("%.3e", r.worst) << "  " << (r.passed ? "pass" : "FAIL") << '\n';
    }
    std::cout << "worst relative error " << fmt("%.3e", worst) << " (threshold " << fmt("%g", g.options.threshold)
              << "): " << (all ? "pass" : "FAIL") << '\n';
    return all ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Algorithmic triage: train models under triage, compare baselines, run sweeps.\n"
                 "Results go to stdout and files; logs go to stderr. Output directory defaults to $" +
                 std::string(kOutDirEnv) + " or ./results."};
    app.require_subcommand(1);
    const std::string method_help = "Method: " + std::string(method_names());
    auto method_check = CLI::Validator(
        [](std::string& v) -> std::string {
            try {
                (void)parse_method(v);
                return {};
            } catch (const PreconditionError& e) {
                return e.what();
            }
        },
        "METHOD");
    auto filter_check = CLI::IsMember({"previous_step", "current_iterate"});

    GenerateOptions gen;
    auto* c_gen = app.add_subcommand("generate", "Generate a synthetic dataset file");
    add_common(c_gen, gen.common, "Dataset file to write (default $" + std::string(kOutDirEnv) + "/dataset.jsonl)");
    c_gen->add_option("--task", gen.task, "regression or classification (overrides config 'task')")
        ->check(CLI::IsMember({"regression", "classification"}));

    TrainOptions tr;
    auto* c_train = app.add_subcommand("train", "Train one method and write checkpoint.json and trace.jsonl");
    add_common(c_train, tr.common, "Output directory");
    c_train->add_option("--data", tr.data, "Dataset file (default: generate from config)")->check(CLI::ExistingFile);
    c_train->add_option("--budget", tr.budget, "Triage level b")->check(CLI::Range(0.0, 1.0));
    c_train->add_option("--method", tr.method, method_help)->check(method_check);
    c_train->add_option("--filter-with", tr.filter_with, "previous_step or current_iterate")->check(filter_check);

    EvaluateOptions ev;
    auto* c_eval = app.add_subcommand("evaluate", "Deploy a trained run on its test split");
    add_common(c_eval, ev.common, "Output directory");
    c_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint.json written by 'train'")
        ->required()
        ->check(CLI::ExistingFile);
    c_eval->add_option("--data", ev.data, "Dataset file (default: generate from config)")->check(CLI::ExistingFile);
    c_eval->add_option("--budget", ev.budget, "Override the run's triage level")->check(CLI::Range(0.0, 1.0));

    SweepOptions sw;
    auto* c_sweep = app.add_subcommand("sweep", "Budget sweep over methods on the classification benchmark");
    add_common(c_sweep, sw.common, "Output directory");
    c_sweep->add_option("--budget", sw.budgets, "Triage levels (repeatable)")->check(CLI::Range(0.0, 1.0));
    c_sweep->add_option("--method", sw.methods, method_help + " (repeatable)")->check(method_check);
    c_sweep->add_option("--jobs", sw.jobs, "Worker threads over grid cells")->check(CLI::PositiveNumber);
    c_sweep->add_option("--filter-with", sw.filter_with, "previous_step or current_iterate")->check(filter_check);

    FourSettingsOptions fs_opts;
    auto* c_four = app.add_subcommand("four-settings", "Four-setting comparison on the synthetic regression task");
    add_common(c_four, fs_opts.common, "Output directory");
    c_four->add_option("--budget", fs_opts.budget, "Triage level of settings 2 to 4")->check(CLI::Range(0.0, 1.0));
    c_four->add_option("--filter-with", fs_opts.filter_with, "previous_step or current_iterate")->check(filter_check);

    GradcheckOptionsCli gc;
    auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check for every model type");
    add_common(c_grad, gc.common, "Unused; accepted for uniformity");
    c_grad->add_option("--trials", gc.trials, "Random draws per model");
    c_grad->add_option("--model", gc.model, "Only check models of this kind")
        ->check(CLI::IsMember({"sigmoid_1d", "linear", "softmax_linear", "mlp"}));
    c_grad->add_flag("--corrupt-gradient", gc.corrupt, "Test fixture: perturb the analytic gradient (must fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*c_gen) return cmd_generate(gen);
        if (*c_train) return cmd_train(tr);
        if (*c_eval) return cmd_evaluate(ev);
        if (*c_sweep) return cmd_sweep(sw);
        if (*c_four) return cmd_four_settings(fs_opts);
        if (*c_grad) return cmd_gradcheck(gc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PreconditionError& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UnsupportedTask& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
