#pragma once

// Synthetic benchmarks: the 1-D sigmoid regression task with heteroscedastic
// expert noise, and a Gaussian-blob classification task labelled by a
// committee of simulated experts.

#include <cstddef>
#include <vector>

#include "triage/core.hpp"

namespace triage {

struct RegressionSpec {
    std::size_t n = 72;
    double x_min = -3.0;
    double x_max = 3.0;
    // Region r is [boundaries[r-1], boundaries[r]); the last region also holds x_max.
    std::vector<double> boundaries{-1.5, 0.0, 1.5};
    // y = 1 / (1 + exp(-theta_r x)) in region r.
    std::vector<double> generator_thetas{1.0, 5.0, 1.0, 5.0};
    // Variance of the Gaussian noise added to y by the experts in region r.
    std::vector<double> noise_variances{8e-3, 1e-3, 4e-3, 2e-3};
    // Independent expert predictions per sample.
    std::size_t replicate_humans = 1;
    RngSeed seed{0};

    void validate() const;
    std::size_t region_of(double x) const;
};

// x ~ U[x_min, x_max); y from the region's sigmoid; h = y + N(0, sigma_r^2) per expert.
Dataset gen_regression(const RegressionSpec& spec);

struct ClassificationSpec {
    std::size_t n = 1500;
    std::size_t d = 2;
    int num_classes = 3;
    // Feature space is split into regions laid out along the first coordinate, `region_spacing`
    // apart. Each region holds one blob per class on a circle of radius `separation`; region r
    // rotates the class layout by r positions, so no single linear model fits every region.
    std::size_t regions = 2;
    double region_spacing = 6.0;
    double separation = 1.5;
    // Per-class isotropic spread; a single entry applies to every class.
    std::vector<double> blob_std{1.0};
    std::size_t experts = 10;
    // Probability that an expert labels a sample of region r wrongly; one entry per region
    // (a single entry applies everywhere). Wrong votes are uniform over the other classes.
    std::vector<double> confusion_rates{0.3, 0.02};
    RngSeed seed{0};

    void validate() const;
    double std_of(int k) const;
    double confusion_of(std::size_t region) const;
    std::vector<double> center_of(int k, std::size_t region = 0) const;
};

// `regions`, when given, receives the region of every sample.
Dataset gen_classification(const ClassificationSpec& spec, std::vector<std::size_t>* regions = nullptr);

}  // namespace triage
