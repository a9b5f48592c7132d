// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>
#include <cmath>
#include <string>

#include "sanmix/cavi.hpp"
#include "sanmix/data.hpp"
#include "sanmix/rng.hpp"

namespace sanmix {

/// Sampler state.  fiSAN carries the slice variables, the adaptive component
/// count k_star, and the concentration alpha; fSAN keeps a fixed K-vector of
/// weights.  Labels are 0-based.
struct GibbsState {
  bool finite_pi = false;
  std::vector<int> s;                 // J distributional labels
  std::vector<std::vector<int>> m;    // observational labels per group
  Eigen::VectorXd pi;                 // K (fSAN) or k_star (fiSAN) weights
  Eigen::VectorXd u;                  // J slice variables (fiSAN)
  int k_star = 0;                     // retained components (fiSAN)
  Eigen::MatrixXd omega;              // (K or k_star) x L rows sum to 1
  Eigen::MatrixXd atom_mean;          // L x d
  std::vector<Eigen::MatrixXd> atom_prec;  // L of d x d
  double alpha = 1.0;                 // fiSAN concentration
};

struct ChainStore {
  int J = 0, L = 0, d = 0;
  Eigen::VectorXi group_sizes;
  long iterations = 0, burn_in = 0, thinning = 1;
  Eigen::MatrixXi s_draws;                      // draws x J
  Eigen::MatrixXi m_draws;                      // draws x N (group-major)
  Eigen::VectorXd alpha_draws;                  // draws (fiSAN only)
  std::vector<Eigen::MatrixXd> group_weights;   // draws of J x L
  std::vector<Eigen::MatrixXd> atom_means;      // draws of L x d
  std::vector<std::vector<Eigen::MatrixXd>> atom_precs;  // draws x L of d x d
  std::vector<double> loglik;                   // one entry per iteration

  int num_draws() const { return static_cast<int>(s_draws.rows()); }
};

GibbsState gibbs_init(const GroupedDataset& data, const SanConfig& config,
                      RngStream& rng);

/// One full scan in the fixed order: distributional weights, observational
/// weights, distributional allocations (collapsed/slice), observational
/// allocations, concentration, atoms.
void gibbs_sweep(GibbsState& state, const GroupedDataset& data,
                 const SanConfig& config, RngStream& rng);

struct RunLength {
  long iterations = 10000;
  long burn_in = 1000;
  long thinning = 1;
};

ChainStore gibbs_run(const GroupedDataset& data, const SanConfig& config,
                     const RunLength& length, RngStream rng);

// Collapsed distributional-allocation log weights, exposed for tests.
Eigen::VectorXd gibbs_s_logweights(const GibbsState& state, int group,
                                   const std::vector<int>& m_labels);

/// Joint-distribution sampler check in the style of Geweke's "getting it
/// right": the successive-conditional simulator (sweeps alternated with data
/// regeneration) must reproduce the prior-predictive distribution of every
/// tracked statistic.
struct GewekeOptions {
  int J = 2;
  int n_per_group = 3;
  int sweeps_per_rep = 2;
  long reps = 20000;
};

struct GewekeStat {
  std::string name;
  double prior_mean = 0.0, prior_se = 0.0;
  double chain_mean = 0.0, chain_se = 0.0;
  double zscore() const {
    return (chain_mean - prior_mean) /
           std::sqrt(prior_se * prior_se + chain_se * chain_se);
  }
};

std::vector<GewekeStat> successive_conditional_sample(
    const SanConfig& config, const GewekeOptions& options, RngStream rng);

}  // namespace sanmix
