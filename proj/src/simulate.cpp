// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "sanmix/math.hpp"

namespace sanmix {

double GroundTruth::density(int group, const Eigen::VectorXd& y) const {
  const int k = s_true.at(group);
  double out = 0.0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const double w = cluster_weights.at(k).at(c);
    if (w <= 0.0) continue;
    const Eigen::MatrixXd precision =
        components[c].cov.llt().solve(Eigen::MatrixXd::Identity(
            components[c].cov.rows(), components[c].cov.cols()));
    out += w * std::exp(math::log_mvn_density(y, components[c].mean, precision));
  }
  return out;
}

namespace {

// Groups are assigned to distributional clusters deterministically (two per
// cluster) so replications differ only in observation noise.
constexpr int kGroupCluster[6] = {0, 0, 1, 1, 2, 2};

std::pair<GroupedDataset, GroundTruth> benchmark_from_components(
    const std::vector<MixtureComponent>& components,
    const std::vector<std::vector<double>>& cluster_weights, int n_per_group,
    RngStream& rng) {
  const int d = static_cast<int>(components.front().mean.size());
  std::vector<Eigen::MatrixXd> chol(components.size());
  for (std::size_t c = 0; c < components.size(); ++c)
    chol[c] = math::cholesky_logdet(components[c].cov).lower;

  GroupedDataset data;
  data.d = d;
  GroundTruth truth;
  truth.components = components;
  truth.cluster_weights = cluster_weights;
  for (int j = 0; j < 6; ++j) {
    const int k = kGroupCluster[j];
    truth.s_true.push_back(k);
    const Eigen::VectorXd weights = Eigen::Map<const Eigen::VectorXd>(
        cluster_weights[k].data(),
        static_cast<Eigen::Index>(cluster_weights[k].size()));
    Eigen::MatrixXd block(n_per_group, d);
    std::vector<int> labels(n_per_group);
    for (int i = 0; i < n_per_group; ++i) {
      const int c = rng.categorical(weights);
      labels[i] = c;
      block.row(i) =
          rng.mvn_from_cholesky(components[c].mean, chol[c]).transpose();
    }
    data.group_keys.push_back("g" + std::to_string(j + 1));
    data.groups.push_back(std::move(block));
    truth.m_true.push_back(std::move(labels));
  }
  return {std::move(data), std::move(truth)};
}

}  // namespace

std::pair<GroupedDataset, GroundTruth> univariate_benchmark(int n_per_group,
                                                            RngStream& rng) {
  if (n_per_group < 1)
    throw std::domain_error("univariate_benchmark: n_per_group must be >= 1");
  const double means[5] = {-5.0, -2.0, 0.0, 2.0, 5.0};
  std::vector<MixtureComponent> components(5);
  for (int c = 0; c < 5; ++c) {
    components[c].mean = Eigen::VectorXd::Constant(1, means[c]);
    components[c].cov = Eigen::MatrixXd::Constant(1, 1, 0.6 * 0.6);
  }
  const std::vector<std::vector<double>> weights = {
      {0.5, 0.5, 0.0, 0.0, 0.0},   // f1: atoms at -5 and -2
      {0.0, 0.0, 0.0, 0.5, 0.5},   // f2: atoms at 2 and 5
      {0.0, 0.0, 1.0, 0.0, 0.0}};  // f3: atom at 0
  return benchmark_from_components(components, weights, n_per_group, rng);
}

std::pair<GroupedDataset, GroundTruth> multivariate_benchmark(int d,
                                                              int n_per_group,
                                                              RngStream& rng) {
  if (d < 2 || d > 10)
    throw std::domain_error("multivariate_benchmark: d must lie in {2,...,10}");
  if (n_per_group < 1)
    throw std::domain_error("multivariate_benchmark: n_per_group must be >= 1");

  auto exchangeable = [&](double r) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d, d, r);
    m.diagonal().setOnes();
    return m;
  };
  Eigen::MatrixXd band = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i + 1 < d; ++i) {
    band(i, i + 1) = 0.25;
    band(i + 1, i) = 0.25;
  }

  const double level[5] = {-5.0, -2.0, 0.0, 2.0, 5.0};
  std::vector<MixtureComponent> components(5);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd covs[5] = {identity, band, exchangeable(0.85),
                                   identity, exchangeable(0.5)};
  for (int c = 0; c < 5; ++c) {
    components[c].mean = Eigen::VectorXd::Constant(d, level[c]);
    components[c].cov = 0.2 * covs[c];
    math::cholesky_logdet(components[c].cov);  // assert PD before sampling
  }
  const std::vector<std::vector<double>> weights = {
      {0.5, 0.5, 0.0, 0.0, 0.0},
      {0.0, 0.0, 0.0, 0.5, 0.5},
      {0.0, 0.0, 1.0, 0.0, 0.0}};
  return benchmark_from_components(components, weights, n_per_group, rng);
}

PriorSampleLabels prior_generative_sample(const PriorFamily& family, int J,
                                          int n_per_group, RngStream& rng) {
  if (J < 1 || n_per_group < 1)
    throw std::domain_error("prior_generative_sample: sizes must be >= 1");

  int L = 0;
  double b = 0.0;
  Eigen::VectorXd pi;
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    L = f->L;
    b = f->b;
    std::vector<double> sticks;
    double residual = 1.0;
    while (residual > 1e-8) {
      if (sticks.size() >= 100000)
        throw ResourceError(
            "prior_generative_sample: stick truncation did not reach 1e-8");
      const double v = rng.beta(1.0, f->alpha);
      sticks.push_back(residual * v);
      residual *= 1.0 - v;
    }
    pi = Eigen::Map<Eigen::VectorXd>(sticks.data(),
                                     static_cast<Eigen::Index>(sticks.size()));
  } else if (const auto* f = std::get_if<FsanPrior>(&family)) {
    L = f->L;
    b = f->b;
    pi = rng.dirichlet(Eigen::VectorXd::Constant(f->K, f->a));
  } else {
    throw CapabilityError(
        "prior_generative_sample: only SAN families are supported");
  }

  PriorSampleLabels out;
  out.s.resize(J);
  for (int j = 0; j < J; ++j) out.s[j] = rng.categorical(pi);
  const int max_s = *std::max_element(out.s.begin(), out.s.end());
  std::vector<Eigen::VectorXd> omega(max_s + 1);
  const Eigen::VectorXd conc = Eigen::VectorXd::Constant(L, b);
  for (int k = 0; k <= max_s; ++k) omega[k] = rng.dirichlet(conc);
  out.m.resize(J);
  for (int j = 0; j < J; ++j) {
    out.m[j].resize(n_per_group);
    for (int i = 0; i < n_per_group; ++i)
      out.m[j][i] = rng.categorical(omega[out.s[j]]);
  }
  return out;
}

}  // namespace sanmix
