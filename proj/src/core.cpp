#include "triage/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace triage {

namespace {

constexpr double kCountSlack = 1e-9;

bool is_class_index(double v, int num_classes) {
    return v >= 0.0 && v < num_classes && std::floor(v) == v;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::regression ? "regression" : "classification";
}

TaskKind parse_task_kind(std::string_view text) {
    if (text == "regression") return TaskKind::regression;
    if (text == "classification") return TaskKind::classification;
    throw PreconditionError("unknown task kind: " + std::string(text));
}

Dataset::Dataset(TaskKind task, std::size_t dim, int num_classes)
    : task_(task), dim_(dim), num_classes_(task == TaskKind::classification ? num_classes : 0) {
    if (dim_ == 0) throw PreconditionError("feature dimension must be >= 1");
    if (task_ == TaskKind::classification && num_classes_ < 2)
        throw PreconditionError("classification needs at least 2 classes");
}

Dataset::Dataset(TaskKind task, std::size_t dim, int num_classes, std::vector<Sample> samples)
    : Dataset(task, dim, num_classes) {
    for (const auto& s : samples) validate(s);
    samples_ = std::move(samples);
}

void Dataset::add(Sample sample) {
    validate(sample);
    samples_.push_back(std::move(sample));
}

void Dataset::validate(const Sample& s) const {
    if (s.x.size() != dim_)
        throw PreconditionError("sample has " + std::to_string(s.x.size()) +
                                " features, dataset expects " + std::to_string(dim_));
    if (s.h.empty()) throw PreconditionError("sample needs at least one human prediction");
    if (task_ == TaskKind::classification) {
        if (!is_class_index(s.y, num_classes_)) throw PreconditionError("label outside {0..K-1}");
        for (double v : s.h)
            if (!is_class_index(v, num_classes_))
                throw PreconditionError("human prediction outside {0..K-1}");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out = empty_like();
    out.samples_.reserve(indices.size());
    for (std::size_t i : indices) out.samples_.push_back(samples_.at(i));
    return out;
}

LossFn LossFn::cross_entropy(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw PreconditionError("smoothing epsilon must lie in (0, 0.5)");
    return {LossKind::cross_entropy, eps};
}

LossFn LossFn::for_task(TaskKind task, double eps) {
    return task == TaskKind::regression ? squared() : cross_entropy(eps);
}

bool LossFn::matches(TaskKind task) const noexcept {
    return (kind == LossKind::squared) == (task == TaskKind::regression);
}

double squared_loss(double y_hat, double y) {
    const double d = y_hat - y;
    return d * d;
}

double cross_entropy_loss(std::span<const double> p, int y, double eps) {
    if (y < 0 || static_cast<std::size_t>(y) >= p.size())
        throw PreconditionError("class index outside the probability vector");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("probability component outside [0, 1]");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("probabilities do not sum to 1");
    return -std::log(std::clamp(p[static_cast<std::size_t>(y)], eps, 1.0 - eps));
}

double human_agreement(const Sample& sample) {
    if (sample.h.empty()) throw PreconditionError("sample has no human predictions");
    const auto hits = std::count(sample.h.begin(), sample.h.end(), sample.y);
    return static_cast<double>(hits) / static_cast<double>(sample.h.size());
}

double human_loss(const Sample& sample, const LossFn& loss) {
    if (sample.h.empty()) throw PreconditionError("sample has no human predictions");
    if (loss.kind == LossKind::squared) {
        double sum = 0.0;
        for (double v : sample.h) sum += squared_loss(v, sample.y);
        return sum / static_cast<double>(sample.h.size());
    }
    const double eps = loss.smoothing_epsilon;
    return -std::log(std::clamp(human_agreement(sample), eps, 1.0 - eps));
}

Rng make_rng(RngSeed seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

std::size_t budget_count(double b, std::size_t n) {
    const double raw = b * static_cast<double>(n);
    return static_cast<std::size_t>(std::floor(raw + kCountSlack * std::max(1.0, raw)));
}

std::size_t keep_count(double b, std::size_t n) {
    const double raw = (1.0 - b) * static_cast<double>(n);
    const double c = std::ceil(raw - kCountSlack * std::max(1.0, raw));
    return std::min(n, static_cast<std::size_t>(std::max(0.0, c)));
}

void require_budget(double b) {
    if (!(b >= 0.0 && b <= 1.0)) throw PreconditionError("triage budget must lie in [0, 1]");
}

DatasetSplit split_dataset(const Dataset& data, SplitFractions f, RngSeed seed) {
    if (!(f.train > 0 && f.val > 0 && f.test > 0)) throw PreconditionError("split fractions must be positive");
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");
    const std::size_t n = data.size();
    if (n < 3) throw PreconditionError("need at least 3 samples to split");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, 0x5917);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t n_val = budget_count(f.val, n);
    const std::size_t n_test = budget_count(f.test, n);
    const std::size_t n_train = n - n_val - n_test;

    std::span<const std::size_t> all(order);
    return {data.subset(all.first(n_train)), data.subset(all.subspan(n_train, n_val)),
            data.subset(all.subspan(n_train + n_val, n_test))};
}

}  // namespace triage
