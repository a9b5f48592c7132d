// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <utility>
#include <vector>

#include "sanmix/cavi.hpp"
#include "sanmix/data.hpp"
#include "sanmix/gibbs.hpp"

namespace sanmix {

enum class Level { distributional, observational };

struct Partition {
  std::vector<int> labels;
  Level level = Level::observational;
};

/// Argmax point estimates from a fitted variational state; ties break to the
/// lowest index.  Returns (distributional, observational).
std::pair<Partition, Partition> vi_partition(const VariationalState& state);

/// Posterior similarity matrix: entry (u, v) is the fraction of stored draws
/// with equal labels.
Eigen::MatrixXd psm(const ChainStore& chain, Level level,
                    Exec exec = Exec::parallel);

/// Greedy Binder-loss minimization over a posterior similarity matrix:
/// agglomerates the pair with the largest gain sum(psm_uv - 1/2) until no
/// merge improves the loss.  Deterministic, lowest-index tie break.
Partition mcmc_partition(const Eigen::MatrixXd& psm_matrix, Level level);

/// Adjusted Rand index between two equal-length partitions.
double ari(const Partition& p, const Partition& q);
double ari(const std::vector<int>& p, const std::vector<int>& q);

struct DensityGrid {
  Eigen::MatrixXd points;  // G x d
  Eigen::VectorXd values;  // G
};

/// Evenly spaced 1-d grid.
Eigen::MatrixXd make_grid_1d(double lo, double hi, int n);
/// 1-d grid spanning the pooled data range +- sd_mult standard deviations.
Eigen::MatrixXd grid_for_data(const GroupedDataset& data, double sd_mult,
                              int n);

/// Posterior mean mixture density for one group: per-draw plug-in densities
/// averaged over the stored draws.
DensityGrid density_mcmc(const ChainStore& chain, const Eigen::MatrixXd& grid,
                         int group, Exec exec = Exec::parallel);

/// Variational plug-in density for one group: posterior-mean weights and
/// atoms substituted into the mixture (univariate variance d/(c-1), i.e.
/// the inverse-gamma mean; multivariate covariance (c D)^{-1}).
DensityGrid density_vi(const VariationalState& state,
                       const Eigen::MatrixXd& grid, int group);

/// Trapezoid-rule KL divergence between two densities on a shared 1-d grid.
double kl_on_grid(const DensityGrid& f_true, const DensityGrid& f_hat);

/// Monte Carlo KL for d > 1: draws from the generating truth of `group` and
/// averages log(f_true / f_hat) under the variational plug-in density.
double kl_true_vs_vi_mc(const GroundTruth& truth, int group,
                        const VariationalState& state, long samples,
                        RngStream& rng);

/// Per-draw minimum-cost assignment of atoms to reference means (squared
/// distance); permutes atoms, allocations, and weights consistently.
ChainStore relabel(const ChainStore& chain,
                   const Eigen::MatrixXd& reference_means);

/// Hungarian algorithm on a square cost matrix; returns column assigned to
/// each row.  Exposed for tests.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace sanmix
