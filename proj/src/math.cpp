// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/math.hpp"

#include <cmath>
#include <limits>

namespace sanmix::math {

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be positive");
  // Recurrence psi(x) = psi(x+1) - 1/x until the argument reaches the
  // asymptotic region, then the de Moivre expansion in 1/x^2.
  long double acc = 0.0L;
  long double z = x;
  while (z < 6.0L) {
    acc -= 1.0L / z;
    z += 1.0L;
  }
  const long double inv = 1.0L / z;
  const long double inv2 = inv * inv;
  // Bernoulli-number coefficients B_2n / 2n up to the 1/z^14 term.
  const long double series =
      inv2 * (1.0L / 12.0L -
      inv2 * (1.0L / 120.0L -
      inv2 * (1.0L / 252.0L -
      inv2 * (1.0L / 240.0L -
      inv2 * (1.0L / 132.0L -
      inv2 * (691.0L / 32760.0L -
      inv2 * (1.0L / 12.0L)))))));
  acc += std::log(z) - 0.5L * inv - series;
  return static_cast<double>(acc);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: x must be positive");
  return std::lgamma(x);
}

double log_multi_gamma(double a, int d) {
  if (d < 1) throw std::domain_error("log_multi_gamma: d must be >= 1");
  if (!(a > 0.5 * (d - 1)))
    throw std::domain_error("log_multi_gamma: a must exceed (d-1)/2");
  double out = 0.25 * d * (d - 1) * std::log(M_PI);
  for (int i = 1; i <= d; ++i) out += std::lgamma(a + 0.5 * (1 - i));
  return out;
}

CholeskyResult cholesky_logdet(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n)
    throw ShapeError("cholesky_logdet: matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double scale =
          std::max({std::abs(m(i, j)), std::abs(m(j, i)), 1.0});
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale)
        throw ShapeError("cholesky_logdet: matrix is not symmetric");
    }

  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw DecompositionError(
          "cholesky_logdet: matrix is not positive definite at pivot " +
              std::to_string(j),
          static_cast<int>(j));
    const double root = std::sqrt(diag);
    lower(j, j) = root;
    log_det += 2.0 * std::log(root);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= lower(i, k) * lower(j, k);
      lower(i, j) = v / root;
    }
  }
  return {std::move(lower), log_det};
}

double log_mvn_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& precision) {
  const Eigen::Index d = y.size();
  if (mean.size() != d || precision.rows() != d || precision.cols() != d)
    throw ShapeError("log_mvn_density: dimension mismatch");
  const CholeskyResult chol = cholesky_logdet(precision);
  const Eigen::VectorXd r = y - mean;
  const double quad = r.dot(precision * r);
  return 0.5 * (chol.log_det - d * std::log(2.0 * M_PI) - quad);
}

double dirichlet_log_norm(const Eigen::VectorXd& params) {
  if (params.size() == 0)
    throw std::domain_error("dirichlet_log_norm: empty parameter vector");
  double sum = 0.0, acc = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (!(params[i] > 0.0))
      throw std::domain_error("dirichlet_log_norm: parameters must be positive");
    sum += params[i];
    acc -= std::lgamma(params[i]);
  }
  return acc + std::lgamma(sum);
}

WishartNormEntropy wishart_log_norm_entropy(const Eigen::MatrixXd& scale,
                                            double dof) {
  const int d = static_cast<int>(scale.rows());
  if (!(dof > d - 1))
    throw std::domain_error("wishart_log_norm_entropy: dof must exceed dim - 1");
  const CholeskyResult chol = cholesky_logdet(scale);
  const double log_norm = -0.5 * dof * chol.log_det -
                          0.5 * dof * d * std::log(2.0) -
                          log_multi_gamma(0.5 * dof, d);
  double e_log_det = d * std::log(2.0) + chol.log_det;
  for (int i = 1; i <= d; ++i) e_log_det += digamma(0.5 * (dof + 1 - i));
  const double entropy =
      -log_norm - 0.5 * (dof - d - 1) * e_log_det + 0.5 * dof * d;
  return {log_norm, entropy};
}

double wishart_e_log_det(const Eigen::MatrixXd& scale, double dof) {
  const int d = static_cast<int>(scale.rows());
  if (!(dof > d - 1))
    throw std::domain_error("wishart_e_log_det: dof must exceed dim - 1");
  double out = d * std::log(2.0) + cholesky_logdet(scale).log_det;
  for (int i = 1; i <= d; ++i) out += digamma(0.5 * (dof + 1 - i));
  return out;
}

namespace {

// Acklam's rational approximation for the standard normal quantile.
double normal_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  double x = normal_quantile_approx(p);
  // One Halley refinement against erfc brings the error down to ~1e-15.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0)
    return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

void normalize_log_weights(Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m))
    throw NumericalError("normalize_log_weights: all weights are zero");
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = std::exp(v[i] - m);
    s += v[i];
  }
  v /= s;
}

}  // namespace sanmix::math
