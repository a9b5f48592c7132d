// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sanmix/math.hpp"

namespace sanmix {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

std::pair<Partition, Partition> vi_partition(const VariationalState& state) {
  Partition s_hat;
  s_hat.level = Level::distributional;
  s_hat.labels.resize(state.rho.rows());
  for (Eigen::Index j = 0; j < state.rho.rows(); ++j) {
    int argmax = 0;
    for (int k = 1; k < state.T(); ++k)
      if (state.rho(j, k) > state.rho(j, argmax)) argmax = k;
    s_hat.labels[j] = argmax;
  }
  Partition m_hat;
  m_hat.level = Level::observational;
  m_hat.labels.resize(state.xi.rows());
  for (Eigen::Index i = 0; i < state.xi.rows(); ++i) {
    int argmax = 0;
    for (int l = 1; l < state.L(); ++l)
      if (state.xi(i, l) > state.xi(i, argmax)) argmax = l;
    m_hat.labels[i] = argmax;
  }
  return {std::move(s_hat), std::move(m_hat)};
}

MatrixXd psm(const ChainStore& chain, Level level, Exec exec) {
  const MatrixXi& draws =
      level == Level::distributional ? chain.s_draws : chain.m_draws;
  const int n = static_cast<int>(draws.cols());
  const int t = static_cast<int>(draws.rows());
  if (t < 1) throw ShapeError("psm: need at least one stored draw");
  MatrixXd out = MatrixXd::Zero(n, n);

  auto fill_row = [&](int u) {
    out(u, u) = 1.0;
    for (int v = u + 1; v < n; ++v) {
      int agree = 0;
      for (int row = 0; row < t; ++row)
        agree += draws(row, u) == draws(row, v) ? 1 : 0;
      const double value = static_cast<double>(agree) / t;
      out(u, v) = value;
      out(v, u) = value;
    }
  };

  if (exec == Exec::serial) {
    for (int u = 0; u < n; ++u) fill_row(u);
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (int u = 0; u < n; ++u) fill_row(u);
  }
  return out;
}

Partition mcmc_partition(const MatrixXd& psm_matrix, Level level) {
  const int n = static_cast<int>(psm_matrix.rows());
  if (n == 0 || psm_matrix.cols() != n)
    throw ShapeError("mcmc_partition: similarity matrix must be square");

  // between-cluster Binder gains; start from singletons
  std::vector<std::vector<int>> clusters(n);
  for (int i = 0; i < n; ++i) clusters[i] = {i};
  MatrixXd gain(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      gain(a, b) = a == b ? 0.0 : psm_matrix(a, b) - 0.5;

  int active = n;
  std::vector<int> index(n);
  for (int i = 0; i < n; ++i) index[i] = i;

  while (active > 1) {
    int best_a = -1, best_b = -1;
    double best = 0.0;
    for (int a = 0; a < active; ++a)
      for (int b = a + 1; b < active; ++b)
        if (gain(index[a], index[b]) > best) {
          best = gain(index[a], index[b]);
          best_a = a;
          best_b = b;
        }
    if (best_a < 0) break;  // no strictly improving merge

    const int ia = index[best_a], ib = index[best_b];
    clusters[ia].insert(clusters[ia].end(), clusters[ib].begin(),
                        clusters[ib].end());
    for (int c = 0; c < active; ++c) {
      const int ic = index[c];
      if (ic == ia || ic == ib) continue;
      gain(ia, ic) += gain(ib, ic);
      gain(ic, ia) = gain(ia, ic);
    }
    index.erase(index.begin() + best_b);
    --active;
  }

  // canonical labels by first appearance
  Partition out;
  out.level = level;
  out.labels.assign(n, -1);
  std::vector<std::pair<int, int>> order;  // (first item, cluster index)
  for (int c = 0; c < active; ++c) {
    std::sort(clusters[index[c]].begin(), clusters[index[c]].end());
    order.emplace_back(clusters[index[c]].front(), index[c]);
  }
  std::sort(order.begin(), order.end());
  for (std::size_t lab = 0; lab < order.size(); ++lab)
    for (int item : clusters[order[lab].second])
      out.labels[item] = static_cast<int>(lab);
  return out;
}

double ari(const std::vector<int>& p, const std::vector<int>& q) {
  if (p.size() != q.size())
    throw ShapeError("ari: partitions must have equal length");
  const double n = static_cast<double>(p.size());
  std::map<std::pair<int, int>, long> cells;
  std::map<int, long> rows, cols;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++cells[{p[i], q[i]}];
    ++rows[p[i]];
    ++cols[q[i]];
  }
  auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0, row_sum = 0.0, col_sum = 0.0;
  for (auto& [key, count] : cells) index += choose2(count);
  for (auto& [key, count] : rows) row_sum += choose2(count);
  for (auto& [key, count] : cols) col_sum += choose2(count);
  const double expected = row_sum * col_sum / choose2(n);
  const double maximum = 0.5 * (row_sum + col_sum);
  if (std::abs(maximum - expected) < 1e-12) return 1.0;
  return (index - expected) / (maximum - expected);
}

double ari(const Partition& p, const Partition& q) {
  return ari(p.labels, q.labels);
}

MatrixXd make_grid_1d(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw ShapeError("make_grid_1d: invalid grid");
  MatrixXd grid(n, 1);
  for (int i = 0; i < n; ++i) grid(i, 0) = lo + (hi - lo) * i / (n - 1.0);
  return grid;
}

MatrixXd grid_for_data(const GroupedDataset& data, double sd_mult, int n) {
  if (data.d != 1)
    throw ShapeError("grid_for_data: only defined for univariate data");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double sum = 0.0, sq = 0.0;
  long count = 0;
  for (const auto& g : data.groups)
    for (int i = 0; i < g.rows(); ++i) {
      lo = std::min(lo, g(i, 0));
      hi = std::max(hi, g(i, 0));
      sum += g(i, 0);
      sq += g(i, 0) * g(i, 0);
      ++count;
    }
  const double mean = sum / count;
  const double sd = std::sqrt(std::max(sq / count - mean * mean, 1e-12));
  return make_grid_1d(lo - sd_mult * sd, hi + sd_mult * sd, n);
}

namespace {

// log N(x | mu, Lambda^{-1}) with a precomputed log determinant
double log_kernel(const VectorXd& x, const VectorXd& mu, const MatrixXd& prec,
                  double logdet) {
  const VectorXd r = x - mu;
  return 0.5 * (logdet - x.size() * std::log(2.0 * M_PI) - r.dot(prec * r));
}

}  // namespace

DensityGrid density_mcmc(const ChainStore& chain, const MatrixXd& grid,
                         int group, Exec exec) {
  if (chain.num_draws() < 1)
    throw ShapeError("density_mcmc: need at least one stored draw");
  if (group < 0 || group >= chain.J)
    throw ShapeError("density_mcmc: group out of range");
  const int g_points = static_cast<int>(grid.rows());
  const int t = chain.num_draws();
  const int L = chain.L;

  std::vector<std::vector<double>> logdet(t, std::vector<double>(L));
  for (int row = 0; row < t; ++row)
    for (int l = 0; l < L; ++l)
      logdet[row][l] = math::cholesky_logdet(chain.atom_precs[row][l]).log_det;

  DensityGrid out;
  out.points = grid;
  out.values = VectorXd::Zero(g_points);

  auto eval_point = [&](int gi) {
    const VectorXd x = grid.row(gi).transpose();
    double acc = 0.0;
    for (int row = 0; row < t; ++row) {
      double fx = 0.0;
      for (int l = 0; l < L; ++l) {
        const double w = chain.group_weights[row](group, l);
        if (w <= 0.0) continue;
        fx += w * std::exp(log_kernel(x,
                                      chain.atom_means[row].row(l).transpose(),
                                      chain.atom_precs[row][l],
                                      logdet[row][l]));
      }
      acc += fx;
    }
    out.values[gi] = acc / t;
  };

  if (exec == Exec::serial) {
    for (int gi = 0; gi < g_points; ++gi) eval_point(gi);
  } else {
#pragma omp parallel for schedule(static)
    for (int gi = 0; gi < g_points; ++gi) eval_point(gi);
  }
  return out;
}

DensityGrid density_vi(const VariationalState& state, const MatrixXd& grid,
                       int group) {
  if (group < 0 || group >= state.rho.rows())
    throw ShapeError("density_vi: group out of range");
  const int L = state.L();
  const int d = static_cast<int>(state.kernels.front().m.size());
  if (grid.cols() != d) throw ShapeError("density_vi: grid dimension mismatch");

  // posterior-mean weights for the group: sum_k rho_jk E[omega_{l,k}]
  VectorXd weights = VectorXd::Zero(L);
  for (int k = 0; k < state.T(); ++k) {
    const double row_sum = state.p.row(k).sum();
    for (int l = 0; l < L; ++l)
      weights[l] += state.rho(group, k) * state.p(k, l) / row_sum;
  }
  weights /= weights.sum();

  std::vector<MatrixXd> prec(L);
  std::vector<double> logdet(L);
  for (int l = 0; l < L; ++l) {
    const KernelPosterior& kp = state.kernels[l];
    if (d == 1) {
      // inverse-gamma posterior mean of the variance, d/(c-1) in NIG form
      if (kp.c <= 2.0)
        throw NumericalError(
            "density_vi: posterior variance undefined (inverse-gamma shape "
            "<= 1)");
      const double sigma2 = 1.0 / (kp.D(0, 0) * (kp.c - 2.0));
      prec[l] = MatrixXd::Constant(1, 1, 1.0 / sigma2);
      logdet[l] = -std::log(sigma2);
    } else {
      prec[l] = kp.c * kp.D;  // E[Lambda]
      logdet[l] = math::cholesky_logdet(prec[l]).log_det;
    }
  }

  DensityGrid out;
  out.points = grid;
  out.values = VectorXd::Zero(grid.rows());
  for (int gi = 0; gi < grid.rows(); ++gi) {
    const VectorXd x = grid.row(gi).transpose();
    double fx = 0.0;
    for (int l = 0; l < L; ++l)
      if (weights[l] > 0.0)
        fx += weights[l] *
              std::exp(log_kernel(x, state.kernels[l].m, prec[l], logdet[l]));
    out.values[gi] = fx;
  }
  return out;
}

double kl_on_grid(const DensityGrid& f_true, const DensityGrid& f_hat) {
  if (f_true.points.rows() != f_hat.points.rows() ||
      f_true.points.cols() != f_hat.points.cols() ||
      (f_true.points - f_hat.points).cwiseAbs().maxCoeff() > 0.0)
    throw ShapeError("kl_on_grid: grids do not match");
  if (f_true.points.cols() != 1)
    throw ShapeError("kl_on_grid: quadrature requires a 1-d grid");
  const int n = static_cast<int>(f_true.points.rows());
  auto integrand = [&](int idx) {
    const double ft = f_true.values[idx];
    if (!(ft > 0.0))
      throw std::domain_error("kl_on_grid: true density must be positive");
    const double fh = std::max(f_hat.values[idx], 1e-300);
    return ft * std::log(ft / fh);
  };
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double h = f_true.points(i + 1, 0) - f_true.points(i, 0);
    acc += 0.5 * h * (integrand(i) + integrand(i + 1));
  }
  return acc;
}

double kl_true_vs_vi_mc(const GroundTruth& truth, int group,
                        const VariationalState& state, long samples,
                        RngStream& rng) {
  const int k = truth.s_true.at(group);
  const auto& weights = truth.cluster_weights.at(k);
  std::vector<MatrixXd> chol(truth.components.size());
  for (std::size_t c = 0; c < truth.components.size(); ++c)
    if (weights[c] > 0.0)
      chol[c] = math::cholesky_logdet(truth.components[c].cov).lower;
  const VectorXd w = Eigen::Map<const VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size()));

  double acc = 0.0;
  for (long s = 0; s < samples; ++s) {
    const int c = rng.categorical(w);
    const VectorXd y = rng.mvn_from_cholesky(truth.components[c].mean, chol[c]);
    const double ft = truth.density(group, y);
    MatrixXd point(1, y.size());
    point.row(0) = y.transpose();
    const double fh =
        std::max(density_vi(state, point, group).values[0], 1e-300);
    acc += std::log(ft / fh);
  }
  return acc / samples;
}

std::vector<int> min_cost_assignment(const MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n == 0 || cost.cols() != n)
    throw ShapeError("min_cost_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pot_u(n + 1, 0.0), pot_v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          const double cur = cost(i0 - 1, j - 1) - pot_u[i0] - pot_v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          pot_u[match[j]] += delta;
          pot_v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

ChainStore relabel(const ChainStore& chain, const MatrixXd& reference_means) {
  const int L = chain.L;
  if (reference_means.rows() > L || reference_means.cols() != chain.d)
    throw ShapeError("relabel: reference shape does not fit the chain");
  const int n_ref = static_cast<int>(reference_means.rows());

  ChainStore out = chain;
  for (int row = 0; row < chain.num_draws(); ++row) {
    MatrixXd cost = MatrixXd::Zero(L, L);
    for (int l = 0; l < L; ++l)
      for (int r = 0; r < L; ++r)
        cost(l, r) =
            r < n_ref
                ? (chain.atom_means[row].row(l) - reference_means.row(r))
                      .squaredNorm()
                : 0.0;  // unmatched atoms park on the free slots
    const std::vector<int> to = min_cost_assignment(cost);

    for (int l = 0; l < L; ++l) {
      out.atom_means[row].row(to[l]) = chain.atom_means[row].row(l);
      out.atom_precs[row][to[l]] = chain.atom_precs[row][l];
      out.group_weights[row].col(to[l]) = chain.group_weights[row].col(l);
    }
    for (int col = 0; col < chain.m_draws.cols(); ++col)
      out.m_draws(row, col) = to[chain.m_draws(row, col)];
  }
  return out;
}

}  // namespace sanmix
