// Acceptance checks, one per criterion. Usage: acceptance <id>|all
// Prints one PASS/FAIL line per criterion; exits nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "triage/baselines.hpp"
#include "triage/eval.hpp"
#include "triage/io.hpp"

using namespace triage;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes pinned by the criteria.
constexpr double kBandRelative = 0.5;
constexpr int kOrderedMin = 8;
constexpr double kPaperS[4] = {0.0053, 0.0020, 0.0031, 0.0009};
constexpr double kOracleTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
constexpr double kTauTol = 1e-9;
constexpr double kTraceTol = 1e-9;
constexpr double kBiasTol = 1e-10;
constexpr double kDeferredNormMin = 1e-6;
constexpr double kKeptNormMax = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr double kTimingRatio = 2.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FourSettingsConfig seeded_four_settings(std::uint64_t seed) {
    FourSettingsConfig c = default_four_settings();
    c.data.seed = RngSeed{seed};
    c.full_automation.seed = RngSeed{seed};
    c.triage.seed = RngSeed{seed};
    return c;
}

// ---- 1 --------------------------------------------------------------------------------------

Outcome four_settings_reproduction() {
    std::vector<double> s[4];
    int ordered = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const RunReport r = run_four_settings(seeded_four_settings(seed));
        for (int k = 0; k < 4; ++k) s[k].push_back(r.setting_loss[static_cast<std::size_t>(k)]);
        ordered += r.ordered();
    }
    bool pass = ordered >= kOrderedMin;
    std::string detail = "ordered on " + std::to_string(ordered) + "/10 seeds; medians";
    for (int k = 0; k < 4; ++k) {
        const double m = median(s[k]);
        const bool in_band = std::abs(m - kPaperS[k]) <= kBandRelative * kPaperS[k];
        pass = pass && in_band;
        detail += " S" + std::to_string(k + 1) + "=" + fmt("%.5f", m) + (in_band ? "" : "(out of band)");
    }
    return {pass, detail};
}

// ---- 2 --------------------------------------------------------------------------------------

Dataset random_regression(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> x(-3.0, 3.0), y(0.0, 1.0), noise(-0.3, 0.3);
    std::uniform_int_distribution<int> reps(1, 3);
    Dataset d(TaskKind::regression, 1);
    // Continuous draws: tied diffs have probability zero. Ties at t > 0 are deliberately
    // not deferred, which the unit tests cover separately.
    for (std::size_t i = 0; i < n; ++i) {
        Sample s{{x(rng)}, y(rng), {}};
        for (int r = reps(rng); r > 0; --r) s.h.push_back(s.y + noise(rng));
        d.add(std::move(s));
    }
    return d;
}

Outcome threshold_optimality_oracle() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> size(1, 12);
    std::uniform_real_distribution<double> theta(-4.0, 4.0);
    const LossFn loss = LossFn::squared();
    double worst = 0.0;
    int cases = 0;
    for (int ds = 0; ds < 200; ++ds) {
        const Dataset d = random_regression(rng, size(rng));
        auto m = make_model({ModelKind::sigmoid_1d, 1});
        m->params()[0] = theta(rng);
        // Independent per-sample losses.
        const std::size_t n = d.size();
        std::vector<double> ml(n), hl(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-m->params()[0] * d[i].x[0]));
            ml[i] = (p - d[i].y) * (p - d[i].y);
            for (double h : d[i].h) hl[i] += (h - d[i].y) * (h - d[i].y);
            hl[i] /= static_cast<double>(d[i].h.size());
        }
        for (double b : {0.0, 0.25, 0.5, 1.0}) {
            double best = INFINITY;
            for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                const auto k = static_cast<double>(__builtin_popcount(mask));
                if (k > b * static_cast<double>(n) + 1e-12) continue;
                double total = 0.0;
                for (std::size_t i = 0; i < n; ++i) total += (mask >> i & 1u) ? hl[i] : ml[i];
                best = std::min(best, total / static_cast<double>(n));
            }
            worst = std::max(worst, std::abs(best - thresholded_system_loss(*m, d, b, loss)));
            ++cases;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= kOracleTol && secs < kOracleSeconds,
            std::to_string(cases) + " (dataset, b) cases; max |brute force - threshold| = " + fmt("%.3g", worst) +
                "; " + fmt("%.2f", secs) + " s"};
}

// ---- 3 --------------------------------------------------------------------------------------

double tau_objective(const std::vector<double>& diffs, double tau, double b) {
    double acc = 0.0;
    for (double d : diffs) acc += std::max(d - tau, 0.0);
    return tau * b + acc / static_cast<double>(diffs.size());
}

Outcome tau_solver_equivalence() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(1, 50);
    std::normal_distribution<double> diff(0.0, 1.0);
    std::uniform_real_distribution<double> budget(0.0, 1.0);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        std::vector<double> diffs(size(rng));
        for (double& d : diffs) d = diff(rng);
        const double b = c % 10 == 0 ? 0.0 : (c % 10 == 1 ? 1.0 : budget(rng));
        const double t = empirical_threshold(diffs, b);
        // Grid scan over [0, max diff] plus every breakpoint: the objective is piecewise
        // linear and convex in tau, so its minimum on tau >= 0 sits at 0 or a breakpoint.
        const double hi = std::max(0.0, *std::max_element(diffs.begin(), diffs.end()));
        double best = tau_objective(diffs, 0.0, b);
        for (int g = 0; g <= 20000; ++g) best = std::min(best, tau_objective(diffs, hi * g / 20000.0, b));
        for (double d : diffs)
            if (d >= 0.0) best = std::min(best, tau_objective(diffs, d, b));
        // Ternary search as a second, grid-free estimate.
        double lo = 0.0, up = hi;
        for (int it = 0; it < 200; ++it) {
            const double a = lo + (up - lo) / 3.0, z = up - (up - lo) / 3.0;
            if (tau_objective(diffs, a, b) <= tau_objective(diffs, z, b)) up = z;
            else lo = a;
        }
        best = std::min(best, tau_objective(diffs, 0.5 * (lo + up), b));
        worst = std::max(worst, tau_objective(diffs, t, b) - best);
    }
    return {worst <= kTauTol, "100 diff vectors; max objective excess of the order-statistic threshold = " +
                                  fmt("%.3g", worst)};
}

// ---- 4 --------------------------------------------------------------------------------------

Outcome monotone_trace() {
    const double lambda = sigmoid_squared_smoothness(3.0);
    bool pass = true;
    double worst = 0.0;
    int runs = 0;
    for (auto filter : {FilterWith::current_iterate, FilterWith::previous_step}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            FourSettingsConfig c = seeded_four_settings(seed);
            TrainConfig t = c.triage;
            t.outer_steps = 10;
            t.filter_with = filter;
            if (!(t.learning_rate < 1.0 / lambda)) pass = false;
            const auto r = train_under_triage(gen_regression(c.data), c.model, t);
            for (std::size_t s = 1; s < r.trace.step_losses.size(); ++s)
                worst = std::max(worst, r.trace.step_losses[s] - r.trace.step_losses[s - 1]);
            ++runs;
        }
    }
    pass = pass && worst <= kTraceTol;
    return {pass, std::to_string(runs) + " runs (T=10, both filters, alpha=0.3 < 1/Lambda=" + fmt("%.4f", 1.0 / lambda) +
                      "); largest step increase " + fmt("%.3g", worst)};
}

// ---- 5 --------------------------------------------------------------------------------------

Outcome bias_identity() {
    double worst = 0.0;
    bool positive = true;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> theta(-3.0, 3.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RegressionSpec spec;
        spec.replicate_humans = 5;
        spec.seed = RngSeed{seed};
        const Dataset d = gen_regression(spec);
        auto m = make_model({ModelKind::sigmoid_1d, 1});
        m->params()[0] = theta(rng);
        for (double b : {0.1, 0.3, 0.5, 1.0}) {
            const auto dec = exact_decisions(*m, d.samples(), b, LossFn::squared());
            const double gap = system_loss(dec, *m, d, LossFn::squared()) - biased_point_estimate_loss(dec, *m, d);
            double var = 0.0;
            bool spread = false;
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (!dec[i]) continue;
                const auto& h = d[i].h;
                double mean = 0.0;
                for (double v : h) mean += v;
                mean /= static_cast<double>(h.size());
                for (double v : h) var += (v - mean) * (v - mean) / static_cast<double>(h.size());
                spread = spread || std::any_of(h.begin(), h.end(), [&](double v) { return v != h[0]; });
            }
            var /= static_cast<double>(d.size());
            worst = std::max(worst, std::abs(gap - var));
            if (spread && !(gap > 0.0)) positive = false;
        }
    }
    return {worst <= kBiasTol && positive, "80 (dataset, b) cases; max |gap - mean deferred variance| = " +
                                                 fmt("%.3g", worst) + (positive ? "; gap > 0 whenever h varies" : "; gap not positive")};
}

// ---- 6 --------------------------------------------------------------------------------------

Outcome gradient_diagnostics() {
    double min_deferred = INFINITY, max_kept = 0.0;
    std::size_t min_kept_count = SIZE_MAX;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const FourSettingsConfig c = seeded_four_settings(seed);
        const RunReport r = run_four_settings(c);
        min_deferred = std::min(min_deferred, r.deferred_gradient_norm);
        // Settle the minibatch noise with full-batch triage steps from the trained model.
        TrainConfig refine = c.triage;
        refine.warmup_steps = 0;
        refine.batch_size = 72;
        refine.outer_steps = 3000;
        refine.shuffle = false;
        const Dataset data = gen_regression(c.data);
        const auto settled = train_under_triage(data, make_model(c.model, r.theta_triage), refine);
        max_kept = std::max(max_kept, kept_gradient_norm(*settled.model, data, c.triage.budget, LossFn::squared()));
        const auto dec = exact_decisions(*settled.model, data.samples(), c.triage.budget, LossFn::squared());
        min_kept_count = std::min(min_kept_count, static_cast<std::size_t>(std::count(dec.begin(), dec.end(), 0)));
    }
    return {min_deferred > kDeferredNormMin && max_kept < kKeptNormMax && min_kept_count > 0,
            "10 seeds; min deferred-set gradient norm at m_theta0 = " + fmt("%.3g", min_deferred) +
                "; max kept-set gradient norm at the triage optimum = " + fmt("%.3g", max_kept) + " (kept sets of " +
                std::to_string(min_kept_count) + "+ samples)"};
}

// ---- 7 --------------------------------------------------------------------------------------

Outcome gradient_correctness() {
    const GradcheckConfig g = default_gradcheck();
    double worst = 0.0;
    bool pass = g.options.trials >= 100;
    for (const auto& spec : g.models) {
        GradcheckOptions o = g.options;
        o.threshold = kGradTol;
        const auto rep = gradcheck(spec, o);
        worst = std::max(worst, rep.worst);
        pass = pass && rep.passed && rep.trials >= 100;
    }
    return {pass && worst < kGradTol, std::to_string(g.models.size()) + " model specs x " +
                                          std::to_string(g.options.trials) + " trials; worst relative error " +
                                          fmt("%.3g", worst)};
}

// ---- 8, 9 -----------------------------------------------------------------------------------

const SweepResult& default_sweep() {
    static const SweepResult r = [] {
        SweepConfig c;
        c.budgets = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
        return budget_sweep(c);
    }();
    return r;
}

Outcome budget_contracts() {
    const auto& r = default_sweep();
    bool pass = true;
    double worst_excess = -INFINITY;
    for (const auto& row : r.rows) {
        const double n = static_cast<double>(row.n_test);
        const double deferred = std::round(row.deferred_fraction * n);
        worst_excess = std::max(worst_excess, deferred - (row.budget * n + 1.0));
        if (deferred > row.budget * n + 1.0) pass = false;
        if (row.method == Method::score && deferred != static_cast<double>(budget_count(row.budget, row.n_test)))
            pass = false;
    }
    return {pass, std::to_string(r.rows.size()) + " (method, b, seed) rows; max deferred - (b n + 1) = " +
                      fmt("%.0f", worst_excess) + "; score-based defers exactly floor(b n)"};
}

Outcome baseline_dominance() {
    const auto& r = default_sweep();
    std::map<std::pair<Method, double>, std::vector<double>> loss;
    for (const auto& row : r.rows) loss[{row.method, row.budget}].push_back(row.test_system_loss);
    bool pass = true;
    std::string detail = "median test system loss ours/full_automation:";
    for (double b : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double ours = median(loss[{Method::ours, b}]), fa = median(loss[{Method::full_automation, b}]);
        pass = pass && ours <= fa;
        detail += " b=" + fmt("%.1f", b) + " " + fmt("%.3f", ours) + "/" + fmt("%.3f", fa);
    }
    return {pass, detail};
}

// ---- 10 -------------------------------------------------------------------------------------

Outcome scalability() {
    ClassificationSpec spec;
    spec.n = 10000;
    spec.seed = RngSeed{10};
    const Dataset data = gen_classification(spec);
    const ModelSpec model{ModelKind::softmax_linear, spec.d, spec.num_classes};
    TrainConfig c;
    c.batch_size = 32;
    c.outer_steps = 5;
    c.learning_rate = 0.1;
    c.budget = 0.5;
    c.seed = RngSeed{10};

    auto time_of = [](const std::function<void()>& f) {
        double best = INFINITY;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            f();
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    const double vanilla = time_of([&] {
        auto m = make_model(model, c.seed);
        TrainState state(data, c, m->num_params());
        for (int t = 0; t < c.outer_steps; ++t) train_vanilla_step(*m, data, c, state);
    });
    const double filtered = time_of([&] {
        auto m = make_model(model, c.seed);
        TrainState state(data, c, m->num_params());
        for (int t = 0; t < c.outer_steps; ++t) train_model_step(*m, data, c, state);
    });
    const double ratio = filtered / vanilla;
    return {ratio <= kTimingRatio, "n=10000, B=32, T=5, min of 3: vanilla " + fmt("%.4f", vanilla) + " s, filtered " +
                                       fmt("%.4f", filtered) + " s, ratio " + fmt("%.2f", ratio)};
}

// ---- 11 -------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return rc;
}

Outcome cli_determinism() {
    const fs::path root = fs::path(TRIAGE_ACCEPT_DIR) / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cli = std::string("\"") + TRIAGE_CLI_PATH + "\"";
    {
        std::ofstream cfg(root / "small.json");
        cfg << R"({"classification": {"n": 300}, "train": {"outer_steps": 3, "epochs": 3},)"
            << R"( "sweep": {"budgets": [0.0, 0.5], "seeds": [1, 2], "jobs": 2}, "four_settings": {"seeds": [1, 2, 3]}})";
    }
    const std::string cfg = "\"" + (root / "small.json").string() + "\"";

    auto commands = [&](const fs::path& out) {
        const std::string o = "\"" + out.string() + "\"";
        const std::string reg = "\"" + (out / "reg.jsonl").string() + "\"";
        const std::string cls = "\"" + (out / "cls.jsonl").string() + "\"";
        return std::vector<std::string>{
            cli + " generate --seed 4 --out " + reg,
            cli + " generate --task classification --config " + cfg + " --seed 4 --out " + cls,
            cli + " train --config " + cfg + " --data " + cls + " --budget 0.4 --seed 4 --out " + o + "/train",
            cli + " evaluate --config " + cfg + " --checkpoint " + o + "/train/checkpoint.json --data " + cls +
                " --out " + o + "/eval",
            cli + " sweep --config " + cfg + " --out " + o + "/sweep",
            cli + " four-settings --config " + cfg + " --out " + o + "/four",
            cli + " gradcheck --trials 20 --out " + o + "/grad",
        };
    };
    std::vector<std::map<std::string, std::string>> snapshots;
    for (const char* name : {"a", "b"}) {
        const fs::path out = root / name;
        fs::create_directories(out);
        for (const auto& cmd : commands(out))
            if (run(cmd) != 0) return {false, "command failed: " + cmd};
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(out))
            if (e.is_regular_file()) files[fs::relative(e.path(), out).string()] = slurp(e.path());
        snapshots.push_back(std::move(files));
    }
    std::size_t differing = 0;
    std::string first;
    for (const auto& [name, bytes] : snapshots[0]) {
        const auto it = snapshots[1].find(name);
        if (it == snapshots[1].end() || it->second != bytes) {
            if (!differing++) first = name;
        }
    }
    if (snapshots[0].size() != snapshots[1].size()) ++differing;
    return {differing == 0 && !snapshots[0].empty(),
            std::to_string(snapshots[0].size()) + " result files from 7 commands compared across two runs; " +
                std::to_string(differing) + " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*check)();
};

const Criterion kCriteria[] = {
    {1, "four-settings reproduction", four_settings_reproduction},
    {2, "threshold-policy optimality oracle", threshold_optimality_oracle},
    {3, "tau-solver equivalence", tau_solver_equivalence},
    {4, "monotone outer trace", monotone_trace},
    {5, "point-estimate bias identity", bias_identity},
    {6, "deferred/kept gradient diagnostics", gradient_diagnostics},
    {7, "gradient correctness", gradient_correctness},
    {8, "budget contracts", budget_contracts},
    {9, "baseline dominance", baseline_dominance},
    {10, "scalability", scalability},
    {11, "determinism", cli_determinism},
};

}  // namespace

int main(int argc, char** argv) {
    const std::string which = argc > 1 ? argv[1] : "all";
    bool all_pass = true, any = false;
    for (const auto& c : kCriteria) {
        if (which != "all" && which != std::to_string(c.id)) continue;
        any = true;
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %2d %-36s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    if (!any) {
        std::fprintf(stderr, "unknown criterion '%s' (use 1..11 or all)\n", which.c_str());
        return 2;
    }
    return all_pass ? 0 : 1;
}
