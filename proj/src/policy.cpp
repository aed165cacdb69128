#include "triage/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace triage {

std::vector<double> PairedLosses::diffs() const {
    std::vector<double> d(model.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = model[i] - human[i];
    return d;
}

std::vector<double> human_losses(std::span<const Sample> batch, const LossFn& loss) {
    std::vector<double> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = human_loss(batch[i], loss);
    return out;
}

PairedLosses paired_losses(const Model& model, std::span<const Sample> batch, const LossFn& loss) {
    PairedLosses out;
    out.model.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out.model[i] = sample_loss(model, batch[i], loss);
    out.human = human_losses(batch, loss);
    return out;
}

std::vector<DiffScore> diff_scores(const Model& model, std::span<const Sample> batch, const LossFn& loss) {
    if (batch.empty()) throw PreconditionError("diff_scores needs a nonempty batch");
    const auto d = paired_losses(model, batch, loss).diffs();
    std::vector<DiffScore> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = {i, d[i]};
    return out;
}

double empirical_threshold(std::span<const double> diffs, double b) {
    require_budget(b);
    if (diffs.empty()) throw PreconditionError("empirical_threshold needs at least one diff");
    const std::size_t k = budget_count(b, diffs.size());
    if (k >= diffs.size()) return 0.0;
    std::vector<double> sorted(diffs.begin(), diffs.end());
    // k-th element in descending order is the (k+1)-th largest.
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                     std::greater<>());
    return std::max(0.0, sorted[k]);
}

ExactTriagePolicy fit_exact_policy(std::span<const double> diffs, double b) {
    return {empirical_threshold(diffs, b), b};
}

Decisions exact_decisions(std::span<const double> diffs, double b) {
    const auto policy = fit_exact_policy(diffs, b);
    Decisions out(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) out[i] = static_cast<std::uint8_t>(decide(policy, diffs[i]));
    return out;
}

Decisions exact_decisions(const Model& model, std::span<const Sample> batch, double b, const LossFn& loss) {
    return exact_decisions(paired_losses(model, batch, loss).diffs(), b);
}

TriageSelection select_by_diff(std::span<const double> diffs, double b) {
    require_budget(b);
    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
        return diffs[a] < diffs[c] || (diffs[a] == diffs[c] && a < c);
    });
    const auto negatives = static_cast<std::size_t>(std::count_if(diffs.begin(), diffs.end(), [](double d) {
        return d < 0.0;
    }));
    const std::size_t keep = std::max(keep_count(b, n), negatives);
    TriageSelection out;
    out.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    out.deferred.assign(order.begin() + static_cast<std::ptrdiff_t>(keep), order.end());
    return out;
}

TriageSelection select_training_subset(const Model& model, std::span<const Sample> batch, double b,
                                       const LossFn& loss) {
    return select_by_diff(paired_losses(model, batch, loss).diffs(), b);
}

double thresholded_system_loss(const PairedLosses& losses, double b) {
    const auto d = losses.diffs();
    if (d.empty()) return 0.0;
    const double t = empirical_threshold(d, b);
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) total += losses.model[i] - (d[i] > t ? d[i] : 0.0);
    return total / static_cast<double>(d.size());
}

double thresholded_system_loss(const Model& model, const Dataset& data, double b, const LossFn& loss) {
    return thresholded_system_loss(paired_losses(model, data.samples(), loss), b);
}

}  // namespace triage
