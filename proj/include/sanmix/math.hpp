// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>

#include "sanmix/common.hpp"

namespace sanmix::math {

/// Digamma function psi(x) for x > 0.  Upward recurrence below 6, asymptotic
/// expansion above; absolute error stays below 1e-10 on [1e-6, 1e6].
double digamma(double x);

/// log Gamma(x) for x > 0.
double log_gamma(double x);

/// log of the multivariate gamma function Gamma_d(a).
double log_multi_gamma(double a, int d);

struct CholeskyResult {
  Eigen::MatrixXd lower;
  double log_det;  // log determinant of the input matrix
};

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Throws ShapeError if the input is not square/symmetric, and
/// DecompositionError (carrying the failing pivot index) if not PD.
CholeskyResult cholesky_logdet(const Eigen::MatrixXd& m);

/// log N(y | mean, precision^{-1}).
double log_mvn_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& precision);

/// log normalizing constant of a Dirichlet distribution:
/// log Gamma(sum a_i) - sum log Gamma(a_i).
double dirichlet_log_norm(const Eigen::VectorXd& params);

struct WishartNormEntropy {
  double log_norm;  // log B(scale, dof), the density prefactor
  double entropy;
};

/// Wishart density prefactor B(scale, dof) and entropy for dof > dim - 1.
WishartNormEntropy wishart_log_norm_entropy(const Eigen::MatrixXd& scale,
                                            double dof);

/// E[log |Lambda|] under Wishart(scale, dof).
double wishart_e_log_det(const Eigen::MatrixXd& scale, double dof);

/// Standard normal quantile, accurate to ~1e-13 on (0, 1).
double normal_quantile(double p);

/// log(sum exp(v_i)) with max shift.
double log_sum_exp(const Eigen::VectorXd& v);

/// Overwrite v (log weights) with normalized probabilities via max-shifted
/// exponentiation.
void normalize_log_weights(Eigen::VectorXd& v);

}  // namespace sanmix::math
