// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sanmix/common.hpp"

namespace sanmix {

/// Grouped observations: J groups of d-dimensional rows with ragged sizes.
struct GroupedDataset {
  int d = 0;
  std::vector<std::string> group_keys;
  std::vector<Eigen::MatrixXd> groups;  // each N_j x d

  int num_groups() const { return static_cast<int>(groups.size()); }
  long total_observations() const {
    long n = 0;
    for (const auto& g : groups) n += g.rows();
    return n;
  }
  Eigen::VectorXi group_sizes() const {
    Eigen::VectorXi sizes(num_groups());
    for (int j = 0; j < num_groups(); ++j)
      sizes[j] = static_cast<int>(groups[j].rows());
    return sizes;
  }
  void validate() const {
    if (groups.empty()) throw ShapeError("GroupedDataset: no groups");
    if (group_keys.size() != groups.size())
      throw ShapeError("GroupedDataset: keys/groups size mismatch");
    for (const auto& g : groups) {
      if (g.rows() < 1) throw ShapeError("GroupedDataset: empty group");
      if (g.cols() != d) throw ShapeError("GroupedDataset: dimension mismatch");
    }
  }
};

struct MixtureComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Generating truth for the synthetic benchmarks: the two-level labels plus
/// the component parameters and per-distributional-cluster weights.
struct GroundTruth {
  std::vector<int> s_true;               // length J
  std::vector<std::vector<int>> m_true;  // ragged, per observation
  std::vector<MixtureComponent> components;
  // cluster_weights[k][c] is the weight of component c inside distributional
  // cluster k (zero where the component does not participate).
  std::vector<std::vector<double>> cluster_weights;

  /// Density of the distributional cluster that generated `group`.
  double density(int group, const Eigen::VectorXd& y) const;
};

}  // namespace sanmix
