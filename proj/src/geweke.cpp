// Apache License, Version 2.0, refer to LICENSE.txt
#include <algorithm>
#include <cmath>
#include <set>

#include "sanmix/gibbs.hpp"

namespace sanmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct TrackedStats {
  std::vector<double> values;
};

std::vector<std::string> stat_names(bool track_alpha) {
  std::vector<std::string> names = {"atom_mean_avg", "atom_mean_max",
                                    "atom_var_avg", "data_mean",
                                    "data_second_moment", "occupied_dc",
                                    "occupied_oc"};
  if (track_alpha) names.insert(names.begin(), "alpha");
  return names;
}

TrackedStats compute_stats(const GibbsState& state, const GroupedDataset& data,
                           bool track_alpha) {
  TrackedStats out;
  if (track_alpha) out.values.push_back(state.alpha);
  const int L = static_cast<int>(state.atom_prec.size());
  double mean_avg = 0.0, mean_max = -std::numeric_limits<double>::infinity();
  double var_avg = 0.0;
  for (int l = 0; l < L; ++l) {
    const double mu = state.atom_mean(l, 0);
    mean_avg += mu / L;
    mean_max = std::max(mean_max, mu);
    var_avg += 1.0 / state.atom_prec[l](0, 0) / L;
  }
  double y_sum = 0.0, y_sq = 0.0;
  long n = 0;
  for (const auto& g : data.groups) {
    for (int i = 0; i < g.rows(); ++i) {
      y_sum += g(i, 0);
      y_sq += g(i, 0) * g(i, 0);
      ++n;
    }
  }
  const int occ_dc =
      static_cast<int>(std::set<int>(state.s.begin(), state.s.end()).size());
  std::set<int> oc;
  for (const auto& labels : state.m) oc.insert(labels.begin(), labels.end());
  out.values.push_back(mean_avg);
  out.values.push_back(mean_max);
  out.values.push_back(var_avg);
  out.values.push_back(y_sum / n);
  out.values.push_back(y_sq / n);
  out.values.push_back(static_cast<double>(occ_dc));
  out.values.push_back(static_cast<double>(oc.size()));
  return out;
}

// One draw of (parameters, labels) from the joint prior plus data from the
// likelihood; the state is a valid sampler state.
std::pair<GibbsState, GroupedDataset> prior_joint_draw(const SanConfig& config,
                                                       int J, int n_per_group,
                                                       RngStream& rng) {
  const KernelPrior& kernel = kernel_prior(config);
  const int L = observational_components(config);
  GibbsState state;
  state.finite_pi = !is_fisan(config);
  state.s.resize(J);
  state.m.resize(J);

  if (is_fisan(config)) {
    const auto& cfg = std::get<FisanConfig>(config);
    state.alpha = cfg.alpha.is_fixed
                      ? cfg.alpha.value
                      : rng.gamma(cfg.alpha.shape, cfg.alpha.rate);
    std::vector<double> sticks;
    double residual = 1.0;
    while (residual > 1e-10 && sticks.size() < 1024) {
      const double v = rng.beta(1.0, state.alpha);
      sticks.push_back(residual * v);
      residual *= 1.0 - v;
    }
    state.pi = Eigen::Map<VectorXd>(sticks.data(),
                                    static_cast<Eigen::Index>(sticks.size()));
  } else {
    const auto& cfg = std::get<FsanConfig>(config);
    state.pi = rng.dirichlet(VectorXd::Constant(cfg.K, cfg.a));
  }
  int max_label = 0;
  for (int j = 0; j < J; ++j) {
    state.s[j] = rng.categorical(state.pi);
    max_label = std::max(max_label, state.s[j]);
  }
  if (is_fisan(config)) {
    state.u.resize(J);
    for (int j = 0; j < J; ++j)
      state.u[j] = rng.uniform(0.0, std::pow(0.5, state.s[j] + 1));
    state.k_star = max_label + 1;
  }

  const double b = is_fisan(config) ? std::get<FisanConfig>(config).b
                                    : std::get<FsanConfig>(config).b;
  const int rows = state.finite_pi ? static_cast<int>(state.pi.size())
                                   : max_label + 1;
  state.omega.resize(rows, L);
  for (int k = 0; k < rows; ++k)
    state.omega.row(k) = rng.dirichlet(VectorXd::Constant(L, b)).transpose();

  state.atom_mean.resize(L, kernel.dim());
  state.atom_prec.resize(L);
  for (int l = 0; l < L; ++l) {
    const auto draw = rng.normal_wishart(kernel.mu0, kernel.kappa0, kernel.dof,
                                         kernel.scale);
    state.atom_mean.row(l) = draw.mu.transpose();
    state.atom_prec[l] = draw.lambda;
  }

  GroupedDataset data;
  data.d = kernel.dim();
  for (int j = 0; j < J; ++j) {
    state.m[j].resize(n_per_group);
    MatrixXd block(n_per_group, data.d);
    for (int i = 0; i < n_per_group; ++i) {
      const int l = rng.categorical(state.omega.row(state.s[j]).transpose());
      state.m[j][i] = l;
      const double sd = 1.0 / std::sqrt(state.atom_prec[l](0, 0));
      block(i, 0) = rng.normal(state.atom_mean(l, 0), sd);
    }
    data.group_keys.push_back("g" + std::to_string(j + 1));
    data.groups.push_back(std::move(block));
  }
  return {std::move(state), std::move(data)};
}

void regenerate_data(const GibbsState& state, GroupedDataset& data,
                     RngStream& rng) {
  for (int j = 0; j < data.num_groups(); ++j)
    for (int i = 0; i < data.groups[j].rows(); ++i) {
      const int l = state.m[j][i];
      const double sd = 1.0 / std::sqrt(state.atom_prec[l](0, 0));
      data.groups[j](i, 0) = rng.normal(state.atom_mean(l, 0), sd);
    }
}

}  // namespace

std::vector<GewekeStat> successive_conditional_sample(
    const SanConfig& config, const GewekeOptions& options, RngStream rng) {
  if (options.J > 2 || options.n_per_group > 3)
    throw std::domain_error(
        "successive_conditional_sample: configuration must stay tiny "
        "(J <= 2, N_j <= 3)");
  if (observational_components(config) > 2)
    throw std::domain_error("successive_conditional_sample: L must be <= 2");
  if (!is_fisan(config) && distributional_components(config) > 2)
    throw std::domain_error("successive_conditional_sample: K must be <= 2");
  if (kernel_prior(config).dim() != 1)
    throw std::domain_error("successive_conditional_sample: d must be 1");
  if (options.reps < 1000)
    throw std::domain_error(
        "successive_conditional_sample: need at least 1000 reps");

  const bool track_alpha =
      is_fisan(config) && !std::get<FisanConfig>(config).alpha.is_fixed;
  const std::vector<std::string> names = stat_names(track_alpha);
  const std::size_t n_stats = names.size();

  // marginal-conditional side: iid draws from the joint prior
  RngStream prior_rng = rng.split(1);
  std::vector<double> prior_sum(n_stats, 0.0), prior_sq(n_stats, 0.0);
  for (long rep = 0; rep < options.reps; ++rep) {
    auto [state, data] =
        prior_joint_draw(config, options.J, options.n_per_group, prior_rng);
    const TrackedStats stats = compute_stats(state, data, track_alpha);
    for (std::size_t i = 0; i < n_stats; ++i) {
      prior_sum[i] += stats.values[i];
      prior_sq[i] += stats.values[i] * stats.values[i];
    }
  }

  // successive-conditional side: transition kernel + data regeneration
  RngStream chain_rng = rng.split(2);
  auto [state, data] =
      prior_joint_draw(config, options.J, options.n_per_group, chain_rng);
  const int n_batches = 50;
  const long batch_size = std::max(1L, options.reps / n_batches);
  std::vector<double> chain_sum(n_stats, 0.0);
  std::vector<std::vector<double>> batch_means(
      n_stats, std::vector<double>());
  std::vector<double> batch_acc(n_stats, 0.0);
  long in_batch = 0;
  for (long rep = 0; rep < options.reps; ++rep) {
    for (int sweep = 0; sweep < options.sweeps_per_rep; ++sweep)
      gibbs_sweep(state, data, config, chain_rng);
    regenerate_data(state, data, chain_rng);
    const TrackedStats stats = compute_stats(state, data, track_alpha);
    for (std::size_t i = 0; i < n_stats; ++i) {
      chain_sum[i] += stats.values[i];
      batch_acc[i] += stats.values[i];
    }
    if (++in_batch == batch_size) {
      for (std::size_t i = 0; i < n_stats; ++i) {
        batch_means[i].push_back(batch_acc[i] / in_batch);
        batch_acc[i] = 0.0;
      }
      in_batch = 0;
    }
  }

  std::vector<GewekeStat> out(n_stats);
  for (std::size_t i = 0; i < n_stats; ++i) {
    GewekeStat& st = out[i];
    st.name = names[i];
    st.prior_mean = prior_sum[i] / options.reps;
    const double prior_var =
        prior_sq[i] / options.reps - st.prior_mean * st.prior_mean;
    st.prior_se = std::sqrt(std::max(prior_var, 0.0) / options.reps);
    st.chain_mean = chain_sum[i] / options.reps;
    // batch-means standard error to absorb the chain autocorrelation
    const auto& batches = batch_means[i];
    double bm = 0.0;
    for (double v : batches) bm += v;
    bm /= batches.size();
    double bvar = 0.0;
    for (double v : batches) bvar += (v - bm) * (v - bm);
    bvar /= std::max<std::size_t>(batches.size() - 1, 1);
    st.chain_se = std::sqrt(bvar / batches.size());
  }
  return out;
}

}  // namespace sanmix
