// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "sanmix/common.hpp"

namespace sanmix {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; full-period 64-bit mixer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 1))) {}

RngStream RngStream::split(std::uint64_t substream) const {
  RngStream child(0, 0);
  child.key_ = mix64(key_ ^ mix64((substream + 1) * kGolden));
  child.counter_ = 0;
  child.has_spare_ = false;
  return child;
}

std::uint64_t RngStream::next_u64() {
  return mix64(key_ + (++counter_) * kGolden);
}

double RngStream::uniform() {
  // 53-bit mantissa, shifted into the open interval.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

double RngStream::normal(double mean, double sd) {
  return mean + sd * normal();
}

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("gamma: shape and rate must be positive");
  if (shape < 1.0) {
    const double boosted = gamma(shape + 1.0, 1.0);
    const double u = uniform();
    double draw = boosted * std::pow(u, 1.0 / shape) / rate;
    // Tiny shapes can underflow to zero; keep draws usable in ratios.
    return draw > 0.0 ? draw : 1e-300;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
      return d * v / rate;
  }
}

double RngStream::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double RngStream::chi_squared(double dof) {
  return gamma(0.5 * dof, 0.5);
}

Eigen::VectorXd RngStream::dirichlet(const Eigen::VectorXd& concentration) {
  if (concentration.size() == 0)
    throw std::domain_error("dirichlet: empty concentration vector");
  Eigen::VectorXd out(concentration.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < concentration.size(); ++i) {
    out[i] = gamma(concentration[i], 1.0);
    total += out[i];
  }
  out /= total;
  return out;
}

int RngStream::categorical(const Eigen::VectorXd& weights) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0)
      throw std::domain_error("categorical: negative weight");
    total += weights[i];
  }
  if (!(total > 0.0))
    throw NumericalError("categorical: total weight is zero");
  const double target = uniform() * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

int RngStream::categorical_from_log(const Eigen::VectorXd& log_weights) {
  const double m = log_weights.maxCoeff();
  if (!std::isfinite(m))
    throw NumericalError("categorical_from_log: all weights are zero");
  Eigen::VectorXd w(log_weights.size());
  for (Eigen::Index i = 0; i < log_weights.size(); ++i)
    w[i] = std::exp(log_weights[i] - m);
  return categorical(w);
}

Eigen::VectorXd RngStream::mvn_from_cholesky(const Eigen::VectorXd& mean,
                                             const Eigen::MatrixXd& cov_lower) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
  return mean + cov_lower * z;
}

Eigen::MatrixXd RngStream::wishart(const Eigen::MatrixXd& scale, double dof) {
  const Eigen::Index d = scale.rows();
  if (!(dof > d - 1))
    throw std::domain_error("wishart: dof must exceed dim - 1");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw NumericalError("wishart: scale matrix is not positive definite");
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(chi_squared(dof - i));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = normal();
  }
  const Eigen::MatrixXd la = llt.matrixL() * bartlett;
  return la * la.transpose();
}

RngStream::NormalWishartDraw RngStream::normal_wishart(
    const Eigen::VectorXd& mu0, double kappa, double dof,
    const Eigen::MatrixXd& scale) {
  NormalWishartDraw draw;
  draw.lambda = wishart(scale, dof);
  // mu | Lambda ~ N(mu0, (kappa Lambda)^{-1}); the covariance Cholesky factor
  // is L^{-T} / sqrt(kappa) with Lambda = L L^T.
  Eigen::LLT<Eigen::MatrixXd> llt(draw.lambda);
  if (llt.info() != Eigen::Success)
    throw NumericalError("normal_wishart: sampled precision is not PD");
  Eigen::MatrixXd lower_inv_t =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(mu0.size(), mu0.size()));
  draw.mu = mvn_from_cholesky(mu0, lower_inv_t.transpose() / std::sqrt(kappa));
  return draw;
}

RngStream::NormalInvGammaDraw RngStream::normal_inv_gamma(double mu0,
                                                          double kappa,
                                                          double shape,
                                                          double scale) {
  if (!(kappa > 0.0) || !(shape > 0.0) || !(scale > 0.0))
    throw std::domain_error("normal_inv_gamma: parameters must be positive");
  NormalInvGammaDraw draw;
  draw.sigma2 = scale / gamma(shape, 1.0);
  draw.mu = normal(mu0, std::sqrt(draw.sigma2 / kappa));
  return draw;
}

}  // namespace sanmix
