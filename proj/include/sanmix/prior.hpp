// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>

#include "sanmix/common.hpp"
#include "sanmix/rng.hpp"

namespace sanmix {

// Nested prior specifications.  Concentration parameters are strictly
// positive and the Dirichlet dimensions are at least 1; the factory helpers
// below validate on construction.
struct FisanPrior {
  double alpha;
  int L;
  double b;
};
struct FsanPrior {
  double a;
  int K;
  int L;
  double b;
};
struct NdpPrior {
  double alpha;
  double beta;
};
struct CamPrior {
  double alpha;
  double beta;
};
struct HhdpPrior {
  double alpha;
  double beta;
  double beta0;
};

using PriorFamily =
    std::variant<FisanPrior, FsanPrior, NdpPrior, CamPrior, HhdpPrior>;

PriorFamily make_fisan(double alpha, int L, double b);
PriorFamily make_fsan(double a, int K, int L, double b);
PriorFamily make_ndp(double alpha, double beta);
PriorFamily make_cam(double alpha, double beta);
PriorFamily make_hhdp(double alpha, double beta, double beta0);

std::string family_name(const PriorFamily& family);

/// Prior correlation Corr(G_j(A), G_j'(A)) in closed form.
double correlation(const PriorFamily& family);

struct CoclusterProbs {
  double distributional;  // P(G_j = G_j')
  double observational;   // P(theta_ij = theta_i'j')
};

/// Co-clustering probabilities; available for the SAN families only.
CoclusterProbs cocluster_probs(const PriorFamily& family);

/// Hyperprior on a single concentration parameter: fixed or Gamma(shape, rate).
struct HyperPrior {
  static HyperPrior fixed(double value);
  static HyperPrior gamma(double shape, double rate);
  double draw(RngStream& rng) const;
  bool is_fixed = true;
  double value = 1.0;  // fixed value, or gamma shape
  double rate = 1.0;
};

/// Keys name the concentration parameter ("alpha", "beta", "beta0", "a", "b");
/// parameters without an entry stay at the family's fixed value.
using HyperPriorMap = std::map<std::string, HyperPrior>;

struct McEstimate {
  double estimate;
  double std_error;
};

/// Monte Carlo estimate of the prior correlation by forward simulation of
/// (G_j(A), G_j'(A)) pairs with H(A) = h.  Hyperparameters with gamma
/// hyperpriors are redrawn across outer replicates and the per-replicate
/// sample correlations are averaged, which is the quantity the closed forms
/// report when all parameters are fixed.
McEstimate mc_correlation(const PriorFamily& family,
                          const HyperPriorMap& hyperpriors, double h,
                          long draws, RngStream rng,
                          Exec exec = Exec::parallel);

}  // namespace sanmix
