// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sanmix/math.hpp"

namespace sanmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

constexpr int kMaxComponents = 1024;

// Deterministic slice sequence xi_k = 0.5^k (k 1-based); labels are 0-based.
double slice_level(int label) { return std::pow(0.5, label + 1); }

struct GibbsParams {
  bool fisan = false;
  int K = 0;  // fSAN
  int L = 0;
  double a = 0.0, b = 0.0;
  AlphaPrior alpha;
  const KernelPrior* kernel = nullptr;
};

GibbsParams params_of(const SanConfig& config) {
  GibbsParams p;
  if (const auto* f = std::get_if<FisanConfig>(&config)) {
    p.fisan = true;
    p.L = f->L;
    p.b = f->b;
    p.alpha = f->alpha;
    p.kernel = &f->kernel;
  } else {
    const auto& cfg = std::get<FsanConfig>(config);
    p.K = cfg.K;
    p.L = cfg.L;
    p.a = cfg.a;
    p.b = cfg.b;
    p.kernel = &cfg.kernel;
  }
  return p;
}

// Observational counts per (distributional cluster, component).
MatrixXd component_counts(const GibbsState& state, int n_components, int L) {
  MatrixXd counts = MatrixXd::Zero(n_components, L);
  for (std::size_t j = 0; j < state.m.size(); ++j)
    for (int label : state.m[j]) counts(state.s[j], label) += 1.0;
  return counts;
}

void sample_atoms(GibbsState& state, const GroupedDataset& data,
                  const KernelPrior& prior, RngStream& rng) {
  const int L = static_cast<int>(state.atom_prec.size());
  const int d = data.d;
  std::vector<double> n(L, 0.0);
  std::vector<VectorXd> sum(L, VectorXd::Zero(d));
  for (int j = 0; j < data.num_groups(); ++j)
    for (int i = 0; i < data.groups[j].rows(); ++i) {
      const int l = state.m[j][i];
      n[l] += 1.0;
      sum[l] += data.groups[j].row(i).transpose();
    }
  for (int l = 0; l < L; ++l) {
    const double t = prior.kappa0 + n[l];
    const double c = prior.dof + n[l];
    VectorXd m = prior.mu0;
    MatrixXd d_inv = prior.scale_inv;
    if (n[l] > 0.0) {
      const VectorXd ybar = sum[l] / n[l];
      MatrixXd scatter = MatrixXd::Zero(d, d);
      for (int j = 0; j < data.num_groups(); ++j)
        for (int i = 0; i < data.groups[j].rows(); ++i)
          if (state.m[j][i] == l) {
            const VectorXd r = data.groups[j].row(i).transpose() - ybar;
            scatter.noalias() += r * r.transpose();
          }
      const VectorXd dev = ybar - prior.mu0;
      d_inv += scatter + (prior.kappa0 * n[l] / t) * dev * dev.transpose();
      m = (prior.kappa0 * prior.mu0 + n[l] * ybar) / t;
    }
    const MatrixXd scale = d_inv.llt().solve(MatrixXd::Identity(d, d));
    const auto draw = rng.normal_wishart(m, t, c, scale);
    state.atom_mean.row(l) = draw.mu.transpose();
    state.atom_prec[l] = draw.lambda;
  }
}

double data_loglik(const GibbsState& state, const GroupedDataset& data) {
  double total = 0.0;
  const int L = static_cast<int>(state.atom_prec.size());
  std::vector<double> logdet(L);
  for (int l = 0; l < L; ++l)
    logdet[l] = math::cholesky_logdet(state.atom_prec[l]).log_det;
  const double ln2pi = std::log(2.0 * M_PI);
  for (int j = 0; j < data.num_groups(); ++j)
    for (int i = 0; i < data.groups[j].rows(); ++i) {
      const int l = state.m[j][i];
      const VectorXd r =
          data.groups[j].row(i).transpose() - state.atom_mean.row(l).transpose();
      total += 0.5 * (logdet[l] - data.d * ln2pi -
                      r.dot(state.atom_prec[l] * r));
    }
  return total;
}

}  // namespace

GibbsState gibbs_init(const GroupedDataset& data, const SanConfig& config,
                      RngStream& rng) {
  std::visit([](const auto& c) { c.validate(); }, config);
  data.validate();
  const GibbsParams p = params_of(config);
  if (p.kernel->dim() != data.d)
    throw ShapeError("gibbs_init: kernel prior dimension does not match data");
  const int J = data.num_groups();

  GibbsState state;
  state.finite_pi = !p.fisan;
  state.s.resize(J);
  state.m.resize(J);

  int n_components;
  if (p.fisan) {
    state.alpha = p.alpha.is_fixed ? p.alpha.value
                                   : rng.gamma(p.alpha.shape, p.alpha.rate);
    // stick-breaking weights from the prior
    std::vector<double> sticks;
    double residual = 1.0;
    while (residual > 1e-8 &&
           static_cast<int>(sticks.size()) < kMaxComponents) {
      const double v = rng.beta(1.0, state.alpha);
      sticks.push_back(residual * v);
      residual *= 1.0 - v;
    }
    state.pi = Eigen::Map<VectorXd>(sticks.data(),
                                    static_cast<Eigen::Index>(sticks.size()));
    n_components = static_cast<int>(sticks.size());
  } else {
    state.pi = rng.dirichlet(VectorXd::Constant(p.K, p.a));
    n_components = p.K;
  }

  for (int j = 0; j < J; ++j)
    state.s[j] = static_cast<int>(rng.uniform() * n_components);

  if (p.fisan) {
    state.u.resize(J);
    int max_label = 0;
    for (int j = 0; j < J; ++j) {
      state.u[j] = rng.uniform(0.0, slice_level(state.s[j]));
      max_label = std::max(max_label, state.s[j]);
    }
    state.k_star = std::max(n_components, max_label + 1);
  }

  const int rows = p.fisan ? state.k_star : p.K;
  state.omega.resize(rows, p.L);
  const VectorXd conc = VectorXd::Constant(p.L, p.b);
  for (int k = 0; k < rows; ++k)
    state.omega.row(k) = rng.dirichlet(conc).transpose();

  for (int j = 0; j < J; ++j) {
    state.m[j].resize(data.groups[j].rows());
    for (std::size_t i = 0; i < state.m[j].size(); ++i)
      state.m[j][i] = static_cast<int>(rng.uniform() * p.L);
  }

  state.atom_mean.resize(p.L, data.d);
  state.atom_prec.resize(p.L);
  for (int l = 0; l < p.L; ++l) {
    const auto draw = rng.normal_wishart(p.kernel->mu0, p.kernel->kappa0,
                                         p.kernel->dof, p.kernel->scale);
    state.atom_mean.row(l) = draw.mu.transpose();
    state.atom_prec[l] = draw.lambda;
  }
  return state;
}

Eigen::VectorXd gibbs_s_logweights(const GibbsState& state, int group,
                                   const std::vector<int>& m_labels) {
  const int n_components = static_cast<int>(state.pi.size());
  VectorXd logw = VectorXd::Constant(
      n_components, -std::numeric_limits<double>::infinity());
  for (int k = 0; k < n_components; ++k) {
    if (!state.finite_pi && !(state.u[group] < slice_level(k))) continue;
    if (!(state.pi[k] > 0.0)) continue;
    double acc = std::log(state.pi[k]);
    if (!state.finite_pi) acc -= std::log(slice_level(k));
    for (int label : m_labels) acc += std::log(state.omega(k, label));
    logw[k] = acc;
  }
  return logw;
}

void gibbs_sweep(GibbsState& state, const GroupedDataset& data,
                 const SanConfig& config, RngStream& rng) {
  const GibbsParams p = params_of(config);
  const int J = data.num_groups();

  // step 1: distributional weights
  if (p.fisan) {
    double min_u = 1.0;
    for (int j = 0; j < J; ++j) {
      state.u[j] = rng.uniform(0.0, slice_level(state.s[j]));
      min_u = std::min(min_u, state.u[j]);
    }
    int k_star = 1;
    while (slice_level(k_star - 1) >= min_u) {
      ++k_star;
      if (k_star > kMaxComponents)
        throw ResourceError(
            "gibbs_sweep: slice threshold exceeded 1024 components");
    }
    state.k_star = k_star;

    VectorXi occupancy = VectorXi::Zero(k_star);
    VectorXi beyond = VectorXi::Zero(k_star);
    for (int j = 0; j < J; ++j) {
      occupancy[state.s[j]] += 1;
      for (int k = 0; k < std::min(state.s[j], k_star); ++k) beyond[k] += 1;
    }
    state.pi.resize(k_star);
    double carry = 1.0;
    for (int k = 0; k < k_star; ++k) {
      const double v = rng.beta(1.0 + occupancy[k], state.alpha + beyond[k]);
      state.pi[k] = carry * v;
      carry *= 1.0 - v;
    }
  } else {
    VectorXd conc = VectorXd::Constant(p.K, p.a);
    for (int j = 0; j < J; ++j) conc[state.s[j]] += 1.0;
    state.pi = rng.dirichlet(conc);
  }

  // step 2: observational weights per retained component
  const int rows = p.fisan ? state.k_star : p.K;
  const MatrixXd counts = component_counts(state, rows, p.L);
  state.omega.resize(rows, p.L);
  for (int k = 0; k < rows; ++k) {
    const VectorXd conc = counts.row(k).transpose().array() + p.b;
    state.omega.row(k) = rng.dirichlet(conc).transpose();
  }

  // step 3: collapsed distributional allocations
  for (int j = 0; j < J; ++j) {
    const VectorXd logw = gibbs_s_logweights(state, j, state.m[j]);
    state.s[j] = rng.categorical_from_log(logw);
  }

  // step 4: observational allocations
  const int d = data.d;
  std::vector<double> logdet(p.L);
  for (int l = 0; l < p.L; ++l)
    logdet[l] = math::cholesky_logdet(state.atom_prec[l]).log_det;
  const double ln2pi = std::log(2.0 * M_PI);
  for (int j = 0; j < J; ++j) {
    const int k = state.s[j];
    for (int i = 0; i < data.groups[j].rows(); ++i) {
      VectorXd logw(p.L);
      const VectorXd y = data.groups[j].row(i).transpose();
      for (int l = 0; l < p.L; ++l) {
        const VectorXd r = y - state.atom_mean.row(l).transpose();
        logw[l] = std::log(state.omega(k, l)) +
                  0.5 * (logdet[l] - d * ln2pi - r.dot(state.atom_prec[l] * r));
      }
      state.m[j][i] = rng.categorical_from_log(logw);
    }
  }

  // step 5: concentration parameter via the auxiliary-variable update
  if (p.fisan && !p.alpha.is_fixed) {
    const int occupied =
        static_cast<int>(std::set<int>(state.s.begin(), state.s.end()).size());
    const double eta = rng.beta(state.alpha + 1.0, static_cast<double>(J));
    const double rate = p.alpha.rate - std::log(eta);
    const double odds = (p.alpha.shape + occupied - 1.0) / (J * rate);
    if (rng.uniform() < odds / (1.0 + odds))
      state.alpha = rng.gamma(p.alpha.shape + occupied, rate);
    else
      state.alpha = rng.gamma(p.alpha.shape + occupied - 1.0, rate);
  }

  // step 6: conjugate atom draws
  sample_atoms(state, data, *p.kernel, rng);
}

ChainStore gibbs_run(const GroupedDataset& data, const SanConfig& config,
                     const RunLength& length, RngStream rng) {
  if (length.burn_in < 0 || length.iterations <= length.burn_in)
    throw std::domain_error("gibbs_run: need iterations > burn_in >= 0");
  if (length.thinning < 1)
    throw std::domain_error("gibbs_run: thinning must be >= 1");
  const GibbsParams p = params_of(config);
  const int J = data.num_groups();
  const int N = static_cast<int>(data.total_observations());
  const long stored = (length.iterations - length.burn_in) / length.thinning;

  ChainStore chain;
  chain.J = J;
  chain.L = p.L;
  chain.d = data.d;
  chain.group_sizes = data.group_sizes();
  chain.iterations = length.iterations;
  chain.burn_in = length.burn_in;
  chain.thinning = length.thinning;
  chain.s_draws.resize(stored, J);
  chain.m_draws.resize(stored, N);
  if (p.fisan && !p.alpha.is_fixed) chain.alpha_draws.resize(stored);
  chain.group_weights.reserve(stored);
  chain.atom_means.reserve(stored);
  chain.atom_precs.reserve(stored);
  chain.loglik.reserve(length.iterations);

  GibbsState state = gibbs_init(data, config, rng);
  long row = 0;
  for (long t = 1; t <= length.iterations; ++t) {
    gibbs_sweep(state, data, config, rng);
    chain.loglik.push_back(data_loglik(state, data));
    if (t > length.burn_in && (t - length.burn_in) % length.thinning == 0 &&
        row < stored) {
      for (int j = 0; j < J; ++j) chain.s_draws(row, j) = state.s[j];
      int col = 0;
      for (int j = 0; j < J; ++j)
        for (int label : state.m[j]) chain.m_draws(row, col++) = label;
      if (chain.alpha_draws.size() > 0) chain.alpha_draws[row] = state.alpha;
      MatrixXd weights(J, p.L);
      for (int j = 0; j < J; ++j) weights.row(j) = state.omega.row(state.s[j]);
      chain.group_weights.push_back(std::move(weights));
      chain.atom_means.push_back(state.atom_mean);
      chain.atom_precs.push_back(state.atom_prec);
      ++row;
    }
  }
  return chain;
}

}  // namespace sanmix
