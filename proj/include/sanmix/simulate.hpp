// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <utility>

#include "sanmix/data.hpp"
#include "sanmix/prior.hpp"
#include "sanmix/rng.hpp"

namespace sanmix {

/// Univariate three-cluster benchmark: J = 6 groups, two per distributional
/// cluster, five Gaussian atoms at -5, -2, 0, 2, 5 with sd 0.6.
std::pair<GroupedDataset, GroundTruth> univariate_benchmark(int n_per_group,
                                                            RngStream& rng);

/// Multivariate extension for d in {2, ..., 10}: atoms at -5, -2, 0, 2, 5
/// times the ones vector, covariances 0.2 * R with banded / exchangeable
/// correlation structures.
std::pair<GroupedDataset, GroundTruth> multivariate_benchmark(int d,
                                                              int n_per_group,
                                                              RngStream& rng);

struct PriorSampleLabels {
  std::vector<int> s;                // J distributional labels
  std::vector<std::vector<int>> m;   // observational labels per group
};

/// Forward simulation of the two-level label process under a SAN prior.
PriorSampleLabels prior_generative_sample(const PriorFamily& family, int J,
                                          int n_per_group, RngStream& rng);

}  // namespace sanmix
