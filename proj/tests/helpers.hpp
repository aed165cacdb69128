#pragma once

#include <cmath>
#include <vector>

#include "triage/core.hpp"

namespace testing {

inline triage::Dataset regression_set(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const std::vector<std::vector<double>>& hs) {
    triage::Dataset d(triage::TaskKind::regression, 1);
    for (std::size_t i = 0; i < xs.size(); ++i) d.add({{xs[i]}, ys[i], hs[i]});
    return d;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace testing
