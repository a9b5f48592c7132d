// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sanmix/common.hpp"
#include "sanmix/prior.hpp"
#include "sanmix/rng.hpp"

namespace sanmix {

/// Per-cluster frequencies of a two-sample configuration.  n1 and n2 have one
/// entry per observational component; s0/s1/s2 count shared and
/// group-specific occupied components.
class TwoSampleCounts {
 public:
  TwoSampleCounts(Eigen::VectorXi n1, Eigen::VectorXi n2);

  /// Build from occupied-block frequencies, padding with zeros to length.
  static TwoSampleCounts from_blocks(
      const std::vector<std::pair<int, int>>& blocks, int length);

  const Eigen::VectorXi& n1() const { return n1_; }
  const Eigen::VectorXi& n2() const { return n2_; }
  int length() const { return static_cast<int>(n1_.size()); }
  int s0() const { return s0_; }
  int s1() const { return s1_; }
  int s2() const { return s2_; }
  int s() const { return s0_ + s1_ + s2_; }
  int N1() const { return total1_; }
  int N2() const { return total2_; }

 private:
  Eigen::VectorXi n1_, n2_;
  int s0_ = 0, s1_ = 0, s2_ = 0, total1_ = 0, total2_ = 0;
};

/// log EPPF of a symmetric Dirichlet_L(b) mixture for one sample with block
/// frequencies `counts` (zeros allowed).  Throws InfeasiblePartitionError if
/// the number of occupied blocks exceeds L.
double dirichlet_eppf(const Eigen::VectorXi& counts, int L, double b);

/// log of the correction constant C^L_{s0,s1,s2}.
double correction_constant(int s0, int s1, int s2, int L);

/// log Ewens EPPF of a DP(beta) for one sample with block frequencies
/// `counts` (zeros allowed).
double dp_eppf(const Eigen::VectorXi& counts, double beta);

/// log pEPPF of the two-sample partition under fiSAN, fSAN, or nDP.
double peppf(const PriorFamily& family, const TwoSampleCounts& counts);

/// A distinct two-sample partition shape: the multiset of per-block
/// (group-1 count, group-2 count) pairs, with the number of set partitions
/// of the pooled items inducing it.
struct ShapeInfo {
  std::vector<std::pair<int, int>> blocks;  // sorted descending
  long multiplicity;
};

/// All shapes of partitions of N1 + N2 items into at most max_blocks blocks.
std::vector<ShapeInfo> enumerate_two_sample_shapes(int N1, int N2,
                                                   int max_blocks);

/// Enumeration oracle: total pEPPF mass over every two-sample partition,
/// which equals 1 for a valid pEPPF.  Sizes are capped (N1 + N2 <= 8 and,
/// for SAN families, L <= 6).
double peppf_total_mass(const PriorFamily& family, int N1, int N2);

/// Monte Carlo oracle: forward-simulates the generative model and returns the
/// frequency of the queried partition shape.  Matches
/// multiplicity * exp(peppf) for the shape.
McEstimate generative_peppf_frequency(const PriorFamily& family,
                                      const TwoSampleCounts& counts, long reps,
                                      RngStream rng,
                                      Exec exec = Exec::parallel);

}  // namespace sanmix
