// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/cavi.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "sanmix/math.hpp"

namespace sanmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

AlphaPrior AlphaPrior::fixed(double value) {
  if (!(value > 0.0)) throw std::domain_error("alpha must be positive");
  AlphaPrior p;
  p.is_fixed = true;
  p.value = value;
  return p;
}

AlphaPrior AlphaPrior::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("alpha hyperprior parameters must be positive");
  AlphaPrior p;
  p.is_fixed = false;
  p.shape = shape;
  p.rate = rate;
  return p;
}

KernelPrior KernelPrior::normal_wishart(VectorXd mu0, double kappa0,
                                        double dof, MatrixXd scale) {
  const int d = static_cast<int>(mu0.size());
  if (!(kappa0 > 0.0)) throw std::domain_error("kappa0 must be positive");
  if (!(dof > d - 1)) throw std::domain_error("dof must exceed dim - 1");
  KernelPrior prior;
  prior.mu0 = std::move(mu0);
  prior.kappa0 = kappa0;
  prior.dof = dof;
  prior.scale = std::move(scale);
  math::cholesky_logdet(prior.scale);  // PD check
  prior.scale_inv = prior.scale.llt().solve(MatrixXd::Identity(d, d));
  return prior;
}

KernelPrior KernelPrior::normal_inv_gamma(double mu0, double kappa0,
                                          double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::domain_error("normal-inverse-gamma parameters must be positive");
  return normal_wishart(VectorXd::Constant(1, mu0), kappa0, 2.0 * shape,
                        MatrixXd::Constant(1, 1, 1.0 / (2.0 * scale)));
}

KernelPrior KernelPrior::defaults(int d) {
  if (d < 1) throw std::domain_error("dimension must be >= 1");
  if (d == 1) return normal_inv_gamma(0.0, 0.01, 3.0, 2.0);
  return normal_wishart(VectorXd::Zero(d), 0.01, d + 5.0,
                        MatrixXd::Identity(d, d));
}

namespace {

std::vector<std::string> check_common(int L, double b, const KernelPrior& k) {
  if (L < 2) throw std::domain_error("L must be >= 2");
  if (!(b > 0.0)) throw std::domain_error("b must be positive");
  if (k.dim() < 1) throw std::domain_error("kernel prior dimension invalid");
  std::vector<std::string> warnings;
  const int d = k.dim();
  const double zeta = d + 0.5 * d * (d + 1);
  if (b >= 0.5 * zeta)
    warnings.push_back("b >= zeta/2: sparsity condition not satisfied, "
                       "surplus components may not empty");
  return warnings;
}

}  // namespace

std::vector<std::string> FisanConfig::validate() const {
  if (T < 2) throw std::domain_error("T must be >= 2");
  return check_common(L, b, kernel);
}

std::vector<std::string> FsanConfig::validate() const {
  if (K < 1) throw std::domain_error("K must be >= 1");
  return check_common(L, b, kernel);
}

int distributional_components(const SanConfig& config) {
  if (const auto* f = std::get_if<FisanConfig>(&config)) return f->T;
  return std::get<FsanConfig>(config).K;
}

int observational_components(const SanConfig& config) {
  if (const auto* f = std::get_if<FisanConfig>(&config)) return f->L;
  return std::get<FsanConfig>(config).L;
}

const KernelPrior& kernel_prior(const SanConfig& config) {
  if (const auto* f = std::get_if<FisanConfig>(&config)) return f->kernel;
  return std::get<FsanConfig>(config).kernel;
}

bool is_fisan(const SanConfig& config) {
  return std::holds_alternative<FisanConfig>(config);
}

void KernelPosterior::refresh() {
  const int d = static_cast<int>(m.size());
  log_det_d = math::cholesky_logdet(D).log_det;
  double acc = d * std::log(2.0) + log_det_d;
  for (int x = 1; x <= d; ++x) acc += math::digamma(0.5 * (c - x + 1));
  e_log_det = acc;
}

double VariationalState::e_log_alpha() const {
  return alpha_fixed ? std::log(alpha_value) : math::digamma(s1) - std::log(s2);
}

namespace {

struct Pooled {
  MatrixXd y;                // N x d
  std::vector<int> offset;   // J + 1
  int J = 0, N = 0, d = 0;
};

Pooled pool(const GroupedDataset& data) {
  data.validate();
  Pooled out;
  out.J = data.num_groups();
  out.d = data.d;
  out.N = static_cast<int>(data.total_observations());
  out.y.resize(out.N, out.d);
  out.offset.resize(out.J + 1, 0);
  int row = 0;
  for (int j = 0; j < out.J; ++j) {
    out.offset[j] = row;
    out.y.middleRows(row, data.groups[j].rows()) = data.groups[j];
    row += static_cast<int>(data.groups[j].rows());
  }
  out.offset[out.J] = row;
  return out;
}

// h_l(p_k) table: H(k, l) = psi(p_kl) - psi(sum_l p_kl).
MatrixXd digamma_table(const MatrixXd& p) {
  MatrixXd h(p.rows(), p.cols());
  for (Eigen::Index k = 0; k < p.rows(); ++k) {
    const double row_sum = math::digamma(p.row(k).sum());
    for (Eigen::Index l = 0; l < p.cols(); ++l)
      h(k, l) = math::digamma(p(k, l)) - row_sum;
  }
  return h;
}

double g_fn(double x, double y) {
  return math::digamma(x) - math::digamma(x + y);
}

// E[log pi_k] under the truncated stick representation; index k is 0-based
// and the last component uses the leftover stick (v_T = 1).
VectorXd stick_log_weights(const VariationalState& state) {
  const int T = state.T();
  VectorXd out(T);
  double prefix = 0.0;
  for (int k = 0; k < T; ++k) {
    const double own =
        k < T - 1 ? g_fn(state.stick_a[k], state.stick_b[k]) : 0.0;
    out[k] = own + prefix;
    if (k < T - 1) prefix += g_fn(state.stick_b[k], state.stick_a[k]);
  }
  return out;
}

VectorXd distributional_log_weights(const VariationalState& state) {
  if (!state.finite_pi) return stick_log_weights(state);
  const double total = math::digamma(state.p_tilde.sum());
  VectorXd out(state.p_tilde.size());
  for (Eigen::Index k = 0; k < out.size(); ++k)
    out[k] = math::digamma(state.p_tilde[k]) - total;
  return out;
}

// Per-group sums of xi rows: XS(j, l) = sum_{i in group j} xi(i, l).
MatrixXd group_xi_sums(const VariationalState& state, const Pooled& pooled) {
  MatrixXd xs = MatrixXd::Zero(pooled.J, state.L());
  for (int j = 0; j < pooled.J; ++j)
    xs.row(j) = state.xi
                    .middleRows(pooled.offset[j],
                                pooled.offset[j + 1] - pooled.offset[j])
                    .colwise()
                    .sum();
  return xs;
}

struct KernelStats {
  VectorXd n;                  // L soft counts
  MatrixXd ybar;               // L x d weighted means (zero rows when empty)
  std::vector<MatrixXd> scatter;  // L of d x d
};

KernelStats kernel_stats(const MatrixXd& xi, const Pooled& pooled, Exec exec) {
  const int L = static_cast<int>(xi.cols());
  const int d = pooled.d;
  KernelStats stats;
  stats.n = xi.colwise().sum().transpose();
  stats.ybar = MatrixXd::Zero(L, d);
  stats.scatter.assign(L, MatrixXd::Zero(d, d));

  auto per_component = [&](int l) {
    if (!(stats.n[l] > 0.0)) return;
    VectorXd mean = VectorXd::Zero(d);
    for (int i = 0; i < pooled.N; ++i)
      mean += xi(i, l) * pooled.y.row(i).transpose();
    mean /= stats.n[l];
    MatrixXd sc = MatrixXd::Zero(d, d);
    for (int i = 0; i < pooled.N; ++i) {
      const VectorXd r = pooled.y.row(i).transpose() - mean;
      sc.noalias() += xi(i, l) * r * r.transpose();
    }
    stats.ybar.row(l) = mean.transpose();
    stats.scatter[l] = std::move(sc);
  };

  if (exec == Exec::serial) {
    for (int l = 0; l < L; ++l) per_component(l);
  } else {
#pragma omp parallel for schedule(static)
    for (int l = 0; l < L; ++l) per_component(l);
  }
  return stats;
}

void normalize_rows(MatrixXd& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index cidx = 0; cidx < logits.cols(); ++cidx) {
      logits(r, cidx) = std::exp(logits(r, cidx) - m);
      total += logits(r, cidx);
    }
    logits.row(r) /= total;
  }
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw NumericalError(std::string("cavi: non-positive ") + what + " = " +
                         std::to_string(v));
}

}  // namespace

namespace cavi_detail {

void update_rho(VariationalState& state, const GroupedDataset& data,
                const SanConfig& config) {
  (void)config;
  const Pooled pooled = pool(data);
  const MatrixXd xs = group_xi_sums(state, pooled);
  const MatrixXd h = digamma_table(state.p);
  const VectorXd dist = distributional_log_weights(state);
  MatrixXd logits = xs * h.transpose();
  logits.rowwise() += dist.transpose();
  normalize_rows(logits);
  state.rho = std::move(logits);
}

void update_xi(VariationalState& state, const GroupedDataset& data,
               const SanConfig& config, Exec exec) {
  (void)config;
  const Pooled pooled = pool(data);
  const int L = state.L();
  const MatrixXd h = digamma_table(state.p);
  const MatrixXd group_term = state.rho * h;  // J x L
  const int d = pooled.d;

  VectorXd base(L);
  for (int l = 0; l < L; ++l) {
    const KernelPosterior& kp = state.kernels[l];
    base[l] = 0.5 * kp.e_log_det - 0.5 * d / kp.t;
  }

  auto row_update = [&](int j, int i) {
    const VectorXd y = pooled.y.row(i).transpose();
    VectorXd logits(L);
    for (int l = 0; l < L; ++l) {
      const KernelPosterior& kp = state.kernels[l];
      const VectorXd r = y - kp.m;
      logits[l] = base[l] - 0.5 * kp.c * r.dot(kp.D * r) + group_term(j, l);
    }
    const double m = logits.maxCoeff();
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
      logits[l] = std::exp(logits[l] - m);
      total += logits[l];
    }
    state.xi.row(i) = logits.transpose() / total;
  };

  if (exec == Exec::serial) {
    for (int j = 0; j < pooled.J; ++j)
      for (int i = pooled.offset[j]; i < pooled.offset[j + 1]; ++i)
        row_update(j, i);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < pooled.N; ++i) {
      const int j = static_cast<int>(
          std::upper_bound(pooled.offset.begin(), pooled.offset.end(), i) -
          pooled.offset.begin() - 1);
      row_update(j, i);
    }
  }
}

void update_omega(VariationalState& state, const GroupedDataset& data,
                  const SanConfig& config) {
  const Pooled pooled = pool(data);
  const MatrixXd xs = group_xi_sums(state, pooled);
  const double b = is_fisan(config) ? std::get<FisanConfig>(config).b
                                    : std::get<FsanConfig>(config).b;
  state.p = (state.rho.transpose() * xs).array() + b;
  for (Eigen::Index k = 0; k < state.p.rows(); ++k)
    for (Eigen::Index l = 0; l < state.p.cols(); ++l)
      check_positive(state.p(k, l), "omega Dirichlet parameter");
}

void update_distributional(VariationalState& state, const SanConfig& config) {
  const VectorXd counts = state.rho.colwise().sum().transpose();
  if (const auto* f = std::get_if<FsanConfig>(&config)) {
    state.p_tilde = counts.array() + f->a;
    return;
  }
  const int T = state.T();
  const double e_alpha = state.e_alpha();
  // suffix(k) = sum of counts over components after k, down to the final
  // leftover component T (the printed upper limit T-1 drops the leftover
  // mass and breaks ELBO monotonicity).
  double suffix = counts[T - 1];
  for (int k = T - 2; k >= 0; --k) {
    state.stick_a[k] = 1.0 + counts[k];
    state.stick_b[k] = e_alpha + suffix;
    check_positive(state.stick_a[k], "stick parameter a");
    check_positive(state.stick_b[k], "stick parameter b");
    suffix += counts[k];
  }
}

void update_kernels(VariationalState& state, const GroupedDataset& data,
                    const SanConfig& config, Exec exec) {
  const Pooled pooled = pool(data);
  const KernelPrior& prior = kernel_prior(config);
  const KernelStats stats = kernel_stats(state.xi, pooled, exec);
  const int L = state.L();
  const int d = pooled.d;

  auto one = [&](int l) {
    KernelPosterior& kp = state.kernels[l];
    const double n = stats.n[l];
    kp.t = prior.kappa0 + n;
    kp.c = prior.dof + n;
    if (n > 0.0) {
      const VectorXd ybar = stats.ybar.row(l).transpose();
      kp.m = (prior.kappa0 * prior.mu0 + n * ybar) / kp.t;
      const VectorXd dev = ybar - prior.mu0;
      const MatrixXd d_inv = prior.scale_inv + stats.scatter[l] +
                             (prior.kappa0 * n / kp.t) * dev * dev.transpose();
      kp.D = d_inv.llt().solve(MatrixXd::Identity(d, d));
    } else {
      kp.m = prior.mu0;
      kp.D = prior.scale;
    }
    kp.refresh();
  };

  if (exec == Exec::serial) {
    for (int l = 0; l < L; ++l) one(l);
  } else {
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (int l = 0; l < L; ++l) {
      try {
        one(l);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  }
}

void update_alpha(VariationalState& state, const SanConfig& config) {
  const auto* f = std::get_if<FisanConfig>(&config);
  if (f == nullptr || f->alpha.is_fixed) return;
  const int T = state.T();
  double acc = 0.0;
  for (int k = 0; k < T - 1; ++k)
    acc += g_fn(state.stick_b[k], state.stick_a[k]);
  state.s1 = f->alpha.shape + T - 1;
  state.s2 = f->alpha.rate - acc;
  check_positive(state.s2, "alpha posterior rate");
}

}  // namespace cavi_detail

VariationalState cavi_init(const GroupedDataset& data, const SanConfig& config,
                           InitStrategy strategy, RngStream& rng) {
  std::visit([](const auto& c) { c.validate(); }, config);
  const Pooled pooled = pool(data);
  const KernelPrior& prior = kernel_prior(config);
  if (prior.dim() != pooled.d)
    throw ShapeError("cavi_init: kernel prior dimension does not match data");
  const int T = distributional_components(config);
  const int L = observational_components(config);

  VariationalState state;
  state.finite_pi = !is_fisan(config);
  state.rho.resize(pooled.J, T);
  state.xi.resize(pooled.N, L);

  // kmeans++ seeding over the rows of a point matrix; returns, per row, the
  // index of its nearest seed.
  auto seeded_assignment = [&rng](const MatrixXd& points, int n_seeds) {
    const int n = static_cast<int>(points.rows());
    std::vector<int> centers;
    centers.push_back(static_cast<int>(rng.uniform() * n));
    VectorXd dist2(n);
    for (int i = 0; i < n; ++i)
      dist2[i] = (points.row(i) - points.row(centers[0])).squaredNorm();
    while (static_cast<int>(centers.size()) < n_seeds) {
      const int next = dist2.sum() > 0.0
                           ? rng.categorical(dist2)
                           : static_cast<int>(rng.uniform() * n);
      centers.push_back(next);
      for (int i = 0; i < n; ++i)
        dist2[i] = std::min(
            dist2[i], (points.row(i) - points.row(next)).squaredNorm());
    }
    std::vector<int> nearest(n, 0);
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < centers.size(); ++s) {
        const double dd = (points.row(i) - points.row(centers[s])).squaredNorm();
        if (dd < best) {
          best = dd;
          nearest[i] = static_cast<int>(s);
        }
      }
    }
    return nearest;
  };

  auto concentrate = [](MatrixXd& resp, const std::vector<int>& labels) {
    const int cols = static_cast<int>(resp.cols());
    const double off = cols > 1 ? 0.1 / (cols - 1) : 0.0;
    for (int r = 0; r < resp.rows(); ++r) {
      resp.row(r).setConstant(off);
      resp(r, labels[r]) = cols > 1 ? 0.9 + off : 1.0;
      resp.row(r) /= resp.row(r).sum();
    }
  };

  if (strategy == InitStrategy::random_responsibility) {
    const VectorXd ones_t = VectorXd::Ones(T);
    for (int j = 0; j < pooled.J; ++j)
      state.rho.row(j) = rng.dirichlet(ones_t).transpose();
    const VectorXd ones_l = VectorXd::Ones(L);
    for (int i = 0; i < pooled.N; ++i)
      state.xi.row(i) = rng.dirichlet(ones_l).transpose();
  } else {
    // Observational level: spread L centers over the pooled observations and
    // concentrate each row on its nearest center.
    concentrate(state.xi,
                seeded_assignment(pooled.y, std::min(L, pooled.N)));
    // Distributional level: cluster the group profiles the same way, with a
    // restart-varying number of seeds so the multi-restart search explores
    // coarse and fine group partitions.
    MatrixXd profiles(pooled.J, L);
    for (int j = 0; j < pooled.J; ++j) {
      const int size = pooled.offset[j + 1] - pooled.offset[j];
      profiles.row(j) =
          state.xi.middleRows(pooled.offset[j], size).colwise().sum() / size;
    }
    const int max_seeds = std::min(T, pooled.J);
    const int t_seeds = 1 + static_cast<int>(rng.uniform() * max_seeds);
    concentrate(state.rho,
                seeded_assignment(profiles, std::min(t_seeds, max_seeds)));
  }

  state.p.resize(T, L);
  state.kernels.assign(L, KernelPosterior{});
  if (const auto* f = std::get_if<FisanConfig>(&config)) {
    state.stick_a = VectorXd::Ones(T - 1);
    state.stick_b = VectorXd::Ones(T - 1);
    state.alpha_fixed = f->alpha.is_fixed;
    if (f->alpha.is_fixed) {
      state.alpha_value = f->alpha.value;
    } else {
      state.s1 = f->alpha.shape;  // prior as the starting alpha posterior
      state.s2 = f->alpha.rate;
    }
  } else {
    state.p_tilde = VectorXd::Ones(T);
  }

  // Derive the remaining blocks from the responsibilities so every invariant
  // holds from the start; empty components sit at their prior values.
  cavi_detail::update_omega(state, data, config);
  cavi_detail::update_distributional(state, config);
  cavi_detail::update_kernels(state, data, config, Exec::serial);
  cavi_detail::update_alpha(state, config);
  return state;
}

void cavi_iterate(VariationalState& state, const GroupedDataset& data,
                  const SanConfig& config, Exec exec) {
  cavi_detail::update_rho(state, data, config);
  cavi_detail::update_xi(state, data, config, exec);
  cavi_detail::update_omega(state, data, config);
  cavi_detail::update_distributional(state, config);
  cavi_detail::update_kernels(state, data, config, exec);
  cavi_detail::update_alpha(state, config);
}

namespace {

double entropy_term(const MatrixXd& resp) {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < resp.rows(); ++r)
    for (Eigen::Index c = 0; c < resp.cols(); ++c) {
      const double v = resp(r, c);
      if (v > 0.0) acc += v * std::log(std::max(v, 1e-12));
    }
  return acc;
}

}  // namespace

double cavi_elbo(const VariationalState& state, const GroupedDataset& data,
                 const SanConfig& config, Exec exec) {
  const Pooled pooled = pool(data);
  const KernelPrior& prior = kernel_prior(config);
  const int L = state.L();
  const int T = state.T();
  const int d = pooled.d;
  const double ln2pi = std::log(2.0 * M_PI);

  const MatrixXd h = digamma_table(state.p);
  const MatrixXd xs = group_xi_sums(state, pooled);
  const KernelStats stats = kernel_stats(state.xi, pooled, exec);

  // E[log p(y | M, atoms)]
  double e_lik = 0.0;
  for (int l = 0; l < L; ++l) {
    const double n = stats.n[l];
    if (!(n > 0.0)) continue;
    const KernelPosterior& kp = state.kernels[l];
    const VectorXd dev = stats.ybar.row(l).transpose() - kp.m;
    e_lik += 0.5 * (n * (kp.e_log_det - d / kp.t - d * ln2pi) -
                    kp.c * (stats.scatter[l] * kp.D).trace() -
                    n * kp.c * dev.dot(kp.D * dev));
  }

  // E[log p(M | S, omega)]
  const double e_m = ((state.rho.transpose() * xs).cwiseProduct(h)).sum();

  // E[log p(S | pi)] and the pi prior term
  double e_s = 0.0, e_pi_prior = 0.0;
  const VectorXd rho_col = state.rho.colwise().sum().transpose();
  if (state.finite_pi) {
    const auto& cfg = std::get<FsanConfig>(config);
    const double total = math::digamma(state.p_tilde.sum());
    VectorXd hk(T);
    for (int k = 0; k < T; ++k)
      hk[k] = math::digamma(state.p_tilde[k]) - total;
    e_s = rho_col.dot(hk);
    e_pi_prior =
        math::dirichlet_log_norm(VectorXd::Constant(T, cfg.a)) +
        (cfg.a - 1.0) * hk.sum();
  } else {
    const VectorXd dist = stick_log_weights(state);
    e_s = rho_col.dot(dist);
    const double e_log_alpha = state.e_log_alpha();
    const double e_alpha = state.e_alpha();
    double sum_g = 0.0;
    for (int k = 0; k < T - 1; ++k)
      sum_g += g_fn(state.stick_b[k], state.stick_a[k]);
    e_pi_prior = (T - 1) * e_log_alpha + (e_alpha - 1.0) * sum_g;
  }

  // E[log p(omega)]
  const double e_omega_prior =
      T * math::dirichlet_log_norm(VectorXd::Constant(
              L, is_fisan(config) ? std::get<FisanConfig>(config).b
                                  : std::get<FsanConfig>(config).b)) +
      ((is_fisan(config) ? std::get<FisanConfig>(config).b
                         : std::get<FsanConfig>(config).b) -
       1.0) *
          h.sum();

  // E[log p(mu, Lambda)]
  const double log_b0 =
      math::wishart_log_norm_entropy(prior.scale, prior.dof).log_norm;
  double e_kernel_prior = L * log_b0;
  for (int l = 0; l < L; ++l) {
    const KernelPosterior& kp = state.kernels[l];
    const VectorXd dev = kp.m - prior.mu0;
    e_kernel_prior += 0.5 * (prior.dof - d - 1) * kp.e_log_det -
                      0.5 * kp.c * (prior.scale_inv * kp.D).trace() +
                      0.5 * (d * std::log(prior.kappa0 / (2.0 * M_PI)) +
                             kp.e_log_det - d * prior.kappa0 / kp.t -
                             prior.kappa0 * kp.c * dev.dot(kp.D * dev));
  }

  // E[log p(alpha)] (fiSAN with a gamma hyperprior)
  double e_alpha_prior = 0.0;
  if (!state.finite_pi && !state.alpha_fixed) {
    const auto& cfg = std::get<FisanConfig>(config);
    e_alpha_prior = cfg.alpha.shape * std::log(cfg.alpha.rate) -
                    std::lgamma(cfg.alpha.shape) +
                    (cfg.alpha.shape - 1.0) * state.e_log_alpha() -
                    cfg.alpha.rate * state.e_alpha();
  }

  // Variational side.
  const double q_m = entropy_term(state.xi);
  const double q_s = entropy_term(state.rho);

  double q_pi = 0.0;
  if (state.finite_pi) {
    const double total = math::digamma(state.p_tilde.sum());
    q_pi = math::dirichlet_log_norm(state.p_tilde);
    for (int k = 0; k < T; ++k)
      q_pi += (state.p_tilde[k] - 1.0) *
              (math::digamma(state.p_tilde[k]) - total);
  } else {
    for (int k = 0; k < T - 1; ++k) {
      const double a = state.stick_a[k];
      const double b = state.stick_b[k];
      q_pi += std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
              (a - 1.0) * g_fn(a, b) + (b - 1.0) * g_fn(b, a);
    }
  }

  double q_omega = 0.0;
  for (int k = 0; k < T; ++k) {
    q_omega += math::dirichlet_log_norm(state.p.row(k).transpose());
    for (int l = 0; l < L; ++l)
      q_omega += (state.p(k, l) - 1.0) * h(k, l);
  }

  double q_kernel = 0.0;
  for (int l = 0; l < L; ++l) {
    const KernelPosterior& kp = state.kernels[l];
    const double wishart_entropy =
        math::wishart_log_norm_entropy(kp.D, kp.c).entropy;
    q_kernel += 0.5 * kp.e_log_det +
                0.5 * d * (std::log(kp.t / (2.0 * M_PI)) - 1.0) -
                wishart_entropy;
  }

  double q_alpha = 0.0;
  if (!state.finite_pi && !state.alpha_fixed) {
    q_alpha = state.s1 * std::log(state.s2) - std::lgamma(state.s1) +
              (state.s1 - 1.0) * (math::digamma(state.s1) - std::log(state.s2)) -
              state.s1;
  }

  const double model_side = e_lik + e_m + e_s + e_pi_prior + e_omega_prior +
                            e_kernel_prior + e_alpha_prior;
  const double variational_side =
      q_m + q_s + q_pi + q_omega + q_kernel + q_alpha;
  return model_side - variational_side;
}

FitResult cavi_fit(const GroupedDataset& data, const SanConfig& config,
                   const FitOptions& options, RngStream rng) {
  if (options.restarts < 1)
    throw std::domain_error("cavi_fit: restarts must be >= 1");

  struct RestartOutcome {
    bool ok = false;
    VariationalState state;
    std::vector<double> trace;
    std::string error;
  };
  std::vector<RestartOutcome> outcomes(options.restarts);

  auto run_restart = [&](int r) {
    RestartOutcome& out = outcomes[r];
    try {
      RngStream local = rng.split(r);
      VariationalState state = cavi_init(data, config, options.init, local);
      double prev = cavi_elbo(state, data, config, options.exec);
      state.elbo_trace.push_back(prev);
      for (int iter = 0; iter < options.max_iter; ++iter) {
        cavi_iterate(state, data, config, options.exec);
        const double current = cavi_elbo(state, data, config, options.exec);
        state.elbo_trace.push_back(current);
        const double delta = current - prev;
        prev = current;
        if (delta < options.tol) break;
      }
      out.trace = state.elbo_trace;
      out.state = std::move(state);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  };

  if (options.exec == Exec::serial || options.restarts == 1) {
    for (int r = 0; r < options.restarts; ++r) run_restart(r);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < options.restarts; ++r) run_restart(r);
  }

  int best = -1;
  for (int r = 0; r < options.restarts; ++r) {
    if (!outcomes[r].ok) continue;
    if (best < 0 ||
        outcomes[r].trace.back() > outcomes[best].trace.back())
      best = r;
  }
  if (best < 0) {
    std::string msg = "cavi_fit: all restarts failed numerically";
    for (const auto& o : outcomes)
      if (!o.error.empty()) {
        msg += "; first error: " + o.error;
        break;
      }
    throw NumericalError(msg);
  }

  FitResult result;
  result.best = std::move(outcomes[best].state);
  result.best_restart = best;
  for (auto& o : outcomes) result.traces.push_back(std::move(o.trace));
  return result;
}

}  // namespace sanmix
