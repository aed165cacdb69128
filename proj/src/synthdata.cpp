#include "triage/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace triage {

void RegressionSpec::validate() const {
    if (n < 1) throw PreconditionError("regression spec needs n >= 1");
    if (!(x_min < x_max)) throw PreconditionError("regression spec needs x_min < x_max");
    if (!std::is_sorted(boundaries.begin(), boundaries.end()))
        throw PreconditionError("region boundaries must be sorted");
    for (double v : boundaries)
        if (!(v > x_min && v < x_max)) throw PreconditionError("region boundaries must lie inside (x_min, x_max)");
    const std::size_t regions = boundaries.size() + 1;
    if (generator_thetas.size() != regions || noise_variances.size() != regions)
        throw PreconditionError("need one generator theta and one noise variance per region");
    for (double v : noise_variances)
        if (!(v >= 0.0)) throw PreconditionError("noise variances must be non-negative");
    if (replicate_humans < 1) throw PreconditionError("need at least one human prediction per sample");
}

std::size_t RegressionSpec::region_of(double x) const {
    return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), x) - boundaries.begin());
}

Dataset gen_regression(const RegressionSpec& spec) {
    spec.validate();
    auto rng = make_rng(spec.seed, 0x4e9);
    std::uniform_real_distribution<double> uniform(spec.x_min, spec.x_max);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset data(TaskKind::regression, 1);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = uniform(rng);
        const std::size_t r = spec.region_of(x);
        const double y = 1.0 / (1.0 + std::exp(-spec.generator_thetas[r] * x));
        const double sd = std::sqrt(spec.noise_variances[r]);
        Sample s{{x}, y, {}};
        for (std::size_t e = 0; e < spec.replicate_humans; ++e) s.h.push_back(sd > 0.0 ? y + sd * normal(rng) : y);
        data.add(std::move(s));
    }
    return data;
}

void ClassificationSpec::validate() const {
    if (n < 1 || d < 1) throw PreconditionError("classification spec needs n >= 1 and d >= 1");
    if (num_classes < 2) throw PreconditionError("classification spec needs at least 2 classes");
    if (experts < 1) throw PreconditionError("classification spec needs at least one expert");
    const auto k = static_cast<std::size_t>(num_classes);
    if (blob_std.empty() || (blob_std.size() != 1 && blob_std.size() != k))
        throw PreconditionError("blob_std needs 1 or K entries");
    if (regions < 1) throw PreconditionError("classification spec needs at least one region");
    if (confusion_rates.empty() || (confusion_rates.size() != 1 && confusion_rates.size() != regions))
        throw PreconditionError("confusion_rates needs 1 entry or one per region");
    for (double v : blob_std)
        if (!(v > 0.0)) throw PreconditionError("blob_std entries must be positive");
    for (double v : confusion_rates)
        if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("confusion rates must lie in [0, 1]");
}

double ClassificationSpec::std_of(int k) const {
    return blob_std.size() == 1 ? blob_std[0] : blob_std[static_cast<std::size_t>(k)];
}

double ClassificationSpec::confusion_of(std::size_t region) const {
    return confusion_rates.size() == 1 ? confusion_rates[0] : confusion_rates[region];
}

std::vector<double> ClassificationSpec::center_of(int k, std::size_t region) const {
    std::vector<double> c(d, 0.0);
    const double slot = static_cast<double>((static_cast<std::size_t>(k) + region) % static_cast<std::size_t>(num_classes));
    const double angle = 2.0 * std::numbers::pi * slot / num_classes;
    c[0] = static_cast<double>(region) * region_spacing + separation * std::cos(angle);
    if (d > 1) c[1] = separation * std::sin(angle);
    return c;
}

Dataset gen_classification(const ClassificationSpec& spec, std::vector<std::size_t>* regions) {
    spec.validate();
    auto rng = make_rng(spec.seed, 0xc1a55);
    std::uniform_int_distribution<std::size_t> pick_region(0, spec.regions - 1);
    std::uniform_int_distribution<int> pick_class(0, spec.num_classes - 1);
    std::uniform_int_distribution<int> pick_other(0, spec.num_classes - 2);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset data(TaskKind::classification, spec.d, spec.num_classes);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t region = pick_region(rng);
        const int label = pick_class(rng);
        auto x = spec.center_of(label, region);
        const double sd = spec.std_of(label);
        for (double& v : x) v += sd * normal(rng);

        Sample s{std::move(x), static_cast<double>(label), {}};
        const double rate = spec.confusion_of(region);
        for (std::size_t e = 0; e < spec.experts; ++e) {
            int vote = label;
            if (coin(rng) < rate) {
                vote = pick_other(rng);
                if (vote >= label) ++vote;
            }
            s.h.push_back(vote);
        }
        data.add(std::move(s));
        if (regions) regions->push_back(region);
    }
    return data;
}

}  // namespace triage
