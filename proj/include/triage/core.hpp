#pragma once

// Samples, datasets, losses, seeded randomness and splitting.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

// Raised when an argument violates a documented precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when an operation is asked to work on the wrong kind of task.
class UnsupportedTask : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class TaskKind { regression, classification };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

// One instance: features, ground truth, and every recorded human prediction.
// For classification, y and the entries of h hold class indices.
struct Sample {
    std::vector<double> x;
    double y = 0.0;
    std::vector<double> h;

    int label() const { return static_cast<int>(y); }
};

class Dataset {
public:
    Dataset(TaskKind task, std::size_t dim, int num_classes = 0);
    Dataset(TaskKind task, std::size_t dim, int num_classes, std::vector<Sample> samples);

    // Validates the sample against the dataset header before appending.
    void add(Sample sample);

    TaskKind task() const noexcept { return task_; }
    std::size_t dim() const noexcept { return dim_; }
    int num_classes() const noexcept { return num_classes_; }

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    std::span<const Sample> samples() const noexcept { return samples_; }

    Dataset subset(std::span<const std::size_t> indices) const;
    Dataset empty_like() const { return Dataset(task_, dim_, num_classes_); }

private:
    void validate(const Sample& sample) const;

    TaskKind task_;
    std::size_t dim_;
    int num_classes_;
    std::vector<Sample> samples_;
};

enum class LossKind { squared, cross_entropy };

struct LossFn {
    LossKind kind = LossKind::squared;
    // Probabilities are clamped into [eps, 1 - eps] before taking logs.
    double smoothing_epsilon = 1e-6;

    static LossFn squared() { return {LossKind::squared, 1e-6}; }
    static LossFn cross_entropy(double eps = 1e-6);
    static LossFn for_task(TaskKind task, double eps = 1e-6);

    bool matches(TaskKind task) const noexcept;
};

double squared_loss(double y_hat, double y);

// -log p[y] with p[y] clamped into [eps, 1 - eps]. p must be a probability vector.
double cross_entropy_loss(std::span<const double> p, int y, double eps);

// Fraction of recorded human votes equal to the true label.
double human_agreement(const Sample& sample);

// Average loss of the recorded human predictions. Classification scores the
// empirical vote distribution, i.e. -log of the smoothed vote share of y.
double human_loss(const Sample& sample, const LossFn& loss);

struct RngSeed {
    std::uint64_t value = 0;
};

using Rng = std::mt19937_64;

// Independent generator for (seed, stream); streams separate the consumers of one run seed.
Rng make_rng(RngSeed seed, std::uint64_t stream = 0);

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct DatasetSplit {
    Dataset train;
    Dataset val;
    Dataset test;
};

// Shuffled disjoint partition. Sizes are floor(fraction * n); the remainder goes to train.
DatasetSplit split_dataset(const Dataset& data, SplitFractions fractions, RngSeed seed);

// floor(b * n), robust to representation error in b.
std::size_t budget_count(double b, std::size_t n);
// ceil((1 - b) * n), robust to representation error in b.
std::size_t keep_count(double b, std::size_t n);

void require_budget(double b);

}  // namespace triage
