// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/peppf.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>

#include "sanmix/math.hpp"

namespace sanmix {

TwoSampleCounts::TwoSampleCounts(Eigen::VectorXi n1, Eigen::VectorXi n2)
    : n1_(std::move(n1)), n2_(std::move(n2)) {
  if (n1_.size() != n2_.size())
    throw ShapeError("TwoSampleCounts: n1 and n2 must have equal length");
  if (n1_.size() == 0)
    throw ShapeError("TwoSampleCounts: empty frequency vectors");
  for (Eigen::Index l = 0; l < n1_.size(); ++l) {
    if (n1_[l] < 0 || n2_[l] < 0)
      throw std::domain_error("TwoSampleCounts: negative frequency");
    total1_ += n1_[l];
    total2_ += n2_[l];
    if (n1_[l] > 0 && n2_[l] > 0)
      ++s0_;
    else if (n1_[l] > 0)
      ++s1_;
    else if (n2_[l] > 0)
      ++s2_;
  }
}

TwoSampleCounts TwoSampleCounts::from_blocks(
    const std::vector<std::pair<int, int>>& blocks, int length) {
  if (static_cast<int>(blocks.size()) > length)
    throw InfeasiblePartitionError(
        "TwoSampleCounts: more blocks than components");
  Eigen::VectorXi n1 = Eigen::VectorXi::Zero(length);
  Eigen::VectorXi n2 = Eigen::VectorXi::Zero(length);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    n1[static_cast<Eigen::Index>(i)] = blocks[i].first;
    n2[static_cast<Eigen::Index>(i)] = blocks[i].second;
  }
  return TwoSampleCounts(std::move(n1), std::move(n2));
}

double dirichlet_eppf(const Eigen::VectorXi& counts, int L, double b) {
  if (L < 1) throw std::domain_error("dirichlet_eppf: L must be >= 1");
  if (!(b > 0.0)) throw std::domain_error("dirichlet_eppf: b must be positive");
  int s = 0;
  long total = 0;
  for (Eigen::Index l = 0; l < counts.size(); ++l) {
    if (counts[l] < 0)
      throw std::domain_error("dirichlet_eppf: negative frequency");
    if (counts[l] > 0) ++s;
    total += counts[l];
  }
  if (s > L)
    throw InfeasiblePartitionError(
        "dirichlet_eppf: partition has more blocks than components");
  double out = std::lgamma(L + 1.0) - std::lgamma(L - s + 1.0) +
               std::lgamma(L * b) - std::lgamma(L * b + total);
  for (Eigen::Index l = 0; l < counts.size(); ++l)
    if (counts[l] > 0)
      out += std::lgamma(b + counts[l]) - std::lgamma(b);
  return out;
}

double correction_constant(int s0, int s1, int s2, int L) {
  if (s0 < 0 || s1 < 0 || s2 < 0 || L < 1 || s0 + s1 + s2 > L)
    throw InfeasiblePartitionError("correction_constant: infeasible counts");
  return std::lgamma(L - s0 - s1 + 1.0) + std::lgamma(L - s0 - s2 + 1.0) -
         std::lgamma(L + 1.0) - std::lgamma(L - s0 - s1 - s2 + 1.0);
}

double dp_eppf(const Eigen::VectorXi& counts, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("dp_eppf: beta must be positive");
  int s = 0;
  long total = 0;
  double block_terms = 0.0;
  for (Eigen::Index l = 0; l < counts.size(); ++l) {
    if (counts[l] < 0) throw std::domain_error("dp_eppf: negative frequency");
    if (counts[l] > 0) {
      ++s;
      total += counts[l];
      block_terms += std::lgamma(static_cast<double>(counts[l]));
    }
  }
  return s * std::log(beta) + std::lgamma(beta) - std::lgamma(beta + total) +
         block_terms;
}

namespace {

double log_sum_exp2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double peppf(const PriorFamily& family, const TwoSampleCounts& counts) {
  const Eigen::VectorXi pooled = counts.n1() + counts.n2();
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    const double log_q = -std::log1p(f->alpha);
    const double log_1mq = std::log(f->alpha) - std::log1p(f->alpha);
    const double same = log_q + dirichlet_eppf(pooled, f->L, f->b);
    const double split = log_1mq +
                         correction_constant(counts.s0(), counts.s1(),
                                             counts.s2(), f->L) +
                         dirichlet_eppf(counts.n1(), f->L, f->b) +
                         dirichlet_eppf(counts.n2(), f->L, f->b);
    return log_sum_exp2(same, split);
  }
  if (const auto* f = std::get_if<FsanPrior>(&family)) {
    const double denom = std::log1p(f->K * f->a);
    const double same =
        std::log1p(f->a) - denom + dirichlet_eppf(pooled, f->L, f->b);
    if (f->K == 1) return same;
    const double split = std::log((f->K - 1) * f->a) - denom +
                         correction_constant(counts.s0(), counts.s1(),
                                             counts.s2(), f->L) +
                         dirichlet_eppf(counts.n1(), f->L, f->b) +
                         dirichlet_eppf(counts.n2(), f->L, f->b);
    return log_sum_exp2(same, split);
  }
  if (const auto* f = std::get_if<NdpPrior>(&family)) {
    const double log_q = -std::log1p(f->alpha);
    const double same = log_q + dp_eppf(pooled, f->beta);
    if (counts.s0() > 0) return same;
    const double split = std::log(f->alpha) - std::log1p(f->alpha) +
                         dp_eppf(counts.n1(), f->beta) +
                         dp_eppf(counts.n2(), f->beta);
    return log_sum_exp2(same, split);
  }
  throw CapabilityError("peppf: not implemented for " + family_name(family));
}

namespace {

std::vector<std::pair<int, int>> canonical_shape(
    const Eigen::VectorXi& n1, const Eigen::VectorXi& n2) {
  std::vector<std::pair<int, int>> blocks;
  for (Eigen::Index l = 0; l < n1.size(); ++l)
    if (n1[l] > 0 || n2[l] > 0) blocks.emplace_back(n1[l], n2[l]);
  std::sort(blocks.begin(), blocks.end(),
            std::greater<std::pair<int, int>>());
  return blocks;
}

// Enumerate set partitions via restricted growth strings.
void visit_partitions(
    int n, int max_blocks, std::vector<int>& labels, int used,
    const std::function<void(const std::vector<int>&, int)>& fn) {
  const int pos = static_cast<int>(labels.size());
  if (pos == n) {
    fn(labels, used);
    return;
  }
  for (int lab = 0; lab < std::min(used + 1, max_blocks); ++lab) {
    labels.push_back(lab);
    visit_partitions(n, max_blocks, labels, std::max(used, lab + 1), fn);
    labels.pop_back();
  }
}

}  // namespace

std::vector<ShapeInfo> enumerate_two_sample_shapes(int N1, int N2,
                                                   int max_blocks) {
  if (N1 < 0 || N2 < 0 || N1 + N2 < 1)
    throw std::domain_error("enumerate_two_sample_shapes: invalid sizes");
  const int n = N1 + N2;
  std::map<std::vector<std::pair<int, int>>, long> tally;
  std::vector<int> labels;
  labels.reserve(n);
  visit_partitions(n, max_blocks, labels, 0,
                   [&](const std::vector<int>& lab, int blocks) {
                     Eigen::VectorXi c1 = Eigen::VectorXi::Zero(blocks);
                     Eigen::VectorXi c2 = Eigen::VectorXi::Zero(blocks);
                     for (int i = 0; i < n; ++i) {
                       if (i < N1)
                         ++c1[lab[i]];
                       else
                         ++c2[lab[i]];
                     }
                     ++tally[canonical_shape(c1, c2)];
                   });
  std::vector<ShapeInfo> shapes;
  shapes.reserve(tally.size());
  for (auto& [blocks, mult] : tally) shapes.push_back({blocks, mult});
  return shapes;
}

double peppf_total_mass(const PriorFamily& family, int N1, int N2) {
  if (N1 + N2 > 8)
    throw ResourceError("peppf_total_mass: N1 + N2 must not exceed 8");
  int max_blocks = N1 + N2;
  int pad_length = N1 + N2;
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    if (f->L > 6) throw ResourceError("peppf_total_mass: L must not exceed 6");
    max_blocks = std::min(max_blocks, f->L);
    pad_length = f->L;
  } else if (const auto* f = std::get_if<FsanPrior>(&family)) {
    if (f->L > 6) throw ResourceError("peppf_total_mass: L must not exceed 6");
    max_blocks = std::min(max_blocks, f->L);
    pad_length = f->L;
  }
  double total = 0.0;
  for (const ShapeInfo& shape : enumerate_two_sample_shapes(N1, N2, max_blocks)) {
    const TwoSampleCounts counts =
        TwoSampleCounts::from_blocks(shape.blocks, pad_length);
    total += static_cast<double>(shape.multiplicity) *
             std::exp(peppf(family, counts));
  }
  return total;
}

namespace {

// One forward simulation of the two-sample generative model; returns the
// induced canonical partition shape.
std::vector<std::pair<int, int>> simulate_shape(const PriorFamily& family,
                                                int N1, int N2,
                                                RngStream& rng) {
  auto labels_from = [&](const Eigen::VectorXd& w, int n) {
    std::vector<int> out(n);
    for (int i = 0; i < n; ++i) out[i] = rng.categorical(w);
    return out;
  };

  if (const auto* f = std::get_if<NdpPrior>(&family)) {
    std::vector<double> pi_sticks;
    {
      double residual = 1.0;
      while (residual > 1e-8) {
        const double v = rng.beta(1.0, f->alpha);
        pi_sticks.push_back(residual * v);
        residual *= 1.0 - v;
      }
    }
    Eigen::VectorXd pi = Eigen::Map<Eigen::VectorXd>(
        pi_sticks.data(), static_cast<Eigen::Index>(pi_sticks.size()));
    const int S1 = rng.categorical(pi);
    const int S2 = rng.categorical(pi);
    // Labels index atoms local to the selected distributional atom; distinct
    // clusters use disjoint atom sets.
    auto dp_labels = [&](int n) {
      std::vector<double> sticks;
      double residual = 1.0;
      while (residual > 1e-8) {
        const double v = rng.beta(1.0, f->beta);
        sticks.push_back(residual * v);
        residual *= 1.0 - v;
      }
      Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(
          sticks.data(), static_cast<Eigen::Index>(sticks.size()));
      return labels_from(w, n);
    };
    std::map<std::pair<int, int>, std::pair<int, int>> blocks;  // key -> counts
    if (S1 == S2) {
      auto l1 = dp_labels(N1 + N2);
      for (int i = 0; i < N1; ++i) ++blocks[{0, l1[i]}].first;
      for (int i = 0; i < N2; ++i) ++blocks[{0, l1[N1 + i]}].second;
    } else {
      auto l1 = dp_labels(N1);
      auto l2 = dp_labels(N2);
      for (int v : l1) ++blocks[{1, v}].first;
      for (int v : l2) ++blocks[{2, v}].second;
    }
    std::vector<std::pair<int, int>> shape;
    for (auto& [key, counts] : blocks) shape.push_back(counts);
    std::sort(shape.begin(), shape.end(), std::greater<>());
    return shape;
  }

  int L = 0;
  double b = 0.0;
  int S1 = 0, S2 = 0;
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    L = f->L;
    b = f->b;
    std::vector<double> sticks;
    double residual = 1.0;
    while (residual > 1e-8) {
      const double v = rng.beta(1.0, f->alpha);
      sticks.push_back(residual * v);
      residual *= 1.0 - v;
    }
    Eigen::VectorXd pi = Eigen::Map<Eigen::VectorXd>(
        sticks.data(), static_cast<Eigen::Index>(sticks.size()));
    S1 = rng.categorical(pi);
    S2 = rng.categorical(pi);
  } else if (const auto* f = std::get_if<FsanPrior>(&family)) {
    L = f->L;
    b = f->b;
    const Eigen::VectorXd pi =
        rng.dirichlet(Eigen::VectorXd::Constant(f->K, f->a));
    S1 = rng.categorical(pi);
    S2 = rng.categorical(pi);
  } else {
    throw CapabilityError("generative_peppf_frequency: unsupported family");
  }

  const Eigen::VectorXd conc = Eigen::VectorXd::Constant(L, b);
  const Eigen::VectorXd w1 = rng.dirichlet(conc);
  const Eigen::VectorXd w2 = S1 == S2 ? w1 : rng.dirichlet(conc);
  Eigen::VectorXi c1 = Eigen::VectorXi::Zero(L);
  Eigen::VectorXi c2 = Eigen::VectorXi::Zero(L);
  for (int i = 0; i < N1; ++i) ++c1[rng.categorical(w1)];
  for (int i = 0; i < N2; ++i) ++c2[rng.categorical(w2)];
  return canonical_shape(c1, c2);
}

}  // namespace

McEstimate generative_peppf_frequency(const PriorFamily& family,
                                      const TwoSampleCounts& counts, long reps,
                                      RngStream rng, Exec exec) {
  if (reps < 10000)
    throw std::domain_error("generative_peppf_frequency: need >= 1e4 reps");
  const std::vector<std::pair<int, int>> target =
      canonical_shape(counts.n1(), counts.n2());
  constexpr long kBlock = 1000;
  const long blocks = (reps + kBlock - 1) / kBlock;
  std::vector<long> hits(blocks, 0);

  auto run_block = [&](long blk) {
    RngStream local = rng.split(blk);
    const long lo = blk * kBlock;
    const long hi = std::min(reps, lo + kBlock);
    long count = 0;
    for (long r = lo; r < hi; ++r)
      if (simulate_shape(family, counts.N1(), counts.N2(), local) == target)
        ++count;
    return count;
  };

  if (exec == Exec::serial) {
    for (long blk = 0; blk < blocks; ++blk) hits[blk] = run_block(blk);
  } else {
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long blk = 0; blk < blocks; ++blk) {
      try {
        hits[blk] = run_block(blk);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  }

  long total = 0;
  for (long hcount : hits) total += hcount;
  const double freq = static_cast<double>(total) / static_cast<double>(reps);
  const double se =
      std::sqrt(std::max(freq * (1.0 - freq), 1e-12) / static_cast<double>(reps));
  return {freq, se};
}

}  // namespace sanmix
