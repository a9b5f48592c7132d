// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sanmix/math.hpp"
#include "sanmix/rng.hpp"

using namespace sanmix;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

MatrixXd random_pd(int d, RngStream& rng) {
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + d * MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("digamma known values") {
  CHECK(math::digamma(1.0) == doctest::Approx(-kEulerGamma).epsilon(1e-12));
  CHECK(math::digamma(0.5) ==
        doctest::Approx(-kEulerGamma - 2.0 * std::log(2.0)).epsilon(1e-12));
  for (double x : {0.5, 2.0, 10.0})
    CHECK(math::digamma(x + 1.0) - math::digamma(x) ==
          doctest::Approx(1.0 / x).epsilon(1e-12));
  CHECK_THROWS_AS(math::digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(math::digamma(-2.5), std::domain_error);
}

TEST_CASE("digamma recurrence property") {
  RngStream rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(1e-4, 100.0);
    const double lhs = math::digamma(x + 1.0) - math::digamma(x);
    CHECK(std::abs(lhs - 1.0 / x) < 1e-10 * std::max(1.0, 1.0 / x));
  }
  // absolute accuracy across the stated range
  CHECK(std::abs(math::digamma(1e6) -
                 (std::log(1e6) - 0.5e-6 - 1.0 / (12.0 * 1e12))) < 1e-10);
}

TEST_CASE("log gamma") {
  CHECK(math::log_gamma(1.0) == doctest::Approx(0.0));
  CHECK(math::log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-13));
  CHECK(math::log_gamma(0.5) ==
        doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-13));
  CHECK_THROWS_AS(math::log_gamma(0.0), std::domain_error);
}

TEST_CASE("cholesky identity and diagonal") {
  const auto id = math::cholesky_logdet(MatrixXd::Identity(3, 3));
  CHECK(id.log_det == doctest::Approx(0.0));
  CHECK((id.lower - MatrixXd::Identity(3, 3)).norm() == doctest::Approx(0.0));

  MatrixXd diag = MatrixXd::Zero(2, 2);
  diag(0, 0) = 2.0;
  diag(1, 1) = 3.0;
  CHECK(math::cholesky_logdet(diag).log_det ==
        doctest::Approx(std::log(6.0)).epsilon(1e-14));
}

TEST_CASE("cholesky reconstruction on random PD matrices") {
  RngStream rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform() * 10);
    const MatrixXd m = random_pd(d, rng);
    const auto chol = math::cholesky_logdet(m);
    const MatrixXd back = chol.lower * chol.lower.transpose();
    CHECK((back - m).cwiseAbs().maxCoeff() < 1e-10 * m.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("cholesky error reporting") {
  MatrixXd not_pd(2, 2);
  not_pd << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  try {
    math::cholesky_logdet(not_pd);
    FAIL("expected DecompositionError");
  } catch (const DecompositionError& e) {
    CHECK(e.pivot == 1);
  }

  MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(math::cholesky_logdet(asym), ShapeError);
}

TEST_CASE("mvn log density") {
  const VectorXd zero1 = VectorXd::Zero(1);
  const MatrixXd id1 = MatrixXd::Identity(1, 1);
  CHECK(math::log_mvn_density(zero1, zero1, id1) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-14));
  CHECK(math::log_mvn_density(VectorXd::Ones(1), zero1, id1) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI) - 0.5).epsilon(1e-14));

  // correlated 2-d case against a direct determinant + inverse evaluation
  MatrixXd prec(2, 2);
  prec << 2.0, 0.7, 0.7, 1.5;
  VectorXd y(2), mu(2);
  y << 0.3, -1.2;
  mu << -0.5, 0.4;
  const double det = prec(0, 0) * prec(1, 1) - prec(0, 1) * prec(1, 0);
  const VectorXd r = y - mu;
  const double quad = r.dot(prec * r);
  const double oracle = 0.5 * std::log(det) - std::log(2.0 * M_PI) - 0.5 * quad;
  CHECK(math::log_mvn_density(y, mu, prec) ==
        doctest::Approx(oracle).epsilon(1e-13));

  CHECK_THROWS_AS(math::log_mvn_density(y, VectorXd::Zero(3), prec),
                  ShapeError);
}

TEST_CASE("dirichlet log normalizer") {
  CHECK(math::dirichlet_log_norm(VectorXd::Ones(2)) == doctest::Approx(0.0));
  VectorXd p21(2);
  p21 << 2.0, 1.0;
  CHECK(math::dirichlet_log_norm(p21) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // 25 entries at 0.05 against a term-by-term long-double summation
  const VectorXd small = VectorXd::Constant(25, 0.05);
  long double acc = lgammal(25.0L * 0.05L);
  for (int i = 0; i < 25; ++i) acc -= lgammal(0.05L);
  CHECK(math::dirichlet_log_norm(small) ==
        doctest::Approx(static_cast<double>(acc)).epsilon(1e-13));

  VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(math::dirichlet_log_norm(bad), std::domain_error);
}

TEST_CASE("dirichlet kernel integrates to one in dimension 2") {
  const double a = 2.5, b = 1.5;
  VectorXd params(2);
  params << a, b;
  const double log_c = math::dirichlet_log_norm(params);
  // Simpson rule over x in [0, 1]
  const int n = 200000;
  const double hstep = 1.0 / n;
  double integral = 0.0;
  auto f = [&](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
  };
  for (int i = 0; i < n; ++i) {
    const double x0 = i * hstep, x1 = (i + 1) * hstep;
    integral += hstep / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
  }
  CHECK(std::exp(log_c) * integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("wishart normalizer reduces to the gamma law for d = 1") {
  const double dof = 7.0, v = 0.4;
  const auto got =
      math::wishart_log_norm_entropy(MatrixXd::Constant(1, 1, v), dof);
  // Gamma(shape, rate) normalizer and entropy with shape = dof/2,
  // rate = 1/(2v)
  const double shape = 0.5 * dof, rate = 0.5 / v;
  const double log_norm = shape * std::log(rate) - std::lgamma(shape);
  const double entropy = shape - std::log(rate) + std::lgamma(shape) +
                         (1.0 - shape) * math::digamma(shape);
  CHECK(got.log_norm == doctest::Approx(log_norm).epsilon(1e-12));
  CHECK(got.entropy == doctest::Approx(entropy).epsilon(1e-12));
}

TEST_CASE("wishart normalizer matches the product-of-gammas evaluation") {
  const int d = 3;
  const double dof = d + 2.0;
  const MatrixXd scale = MatrixXd::Identity(d, d);
  long double log_gamma_d = 0.25L * d * (d - 1) * std::log((long double)M_PI);
  for (int i = 1; i <= d; ++i)
    log_gamma_d += lgammal(0.5L * (dof + 1 - i));
  const long double oracle =
      -0.5L * dof * d * std::log(2.0L) - log_gamma_d;  // |I| = 1
  CHECK(math::wishart_log_norm_entropy(scale, dof).log_norm ==
        doctest::Approx(static_cast<double>(oracle)).epsilon(1e-12));
}

TEST_CASE("wishart entropy shifts consistently under scaling") {
  RngStream rng(3);
  const MatrixXd w = random_pd(3, rng);
  const double dof = 6.5, c = 2.3;
  const double h0 = math::wishart_log_norm_entropy(w, dof).entropy;
  const double h1 = math::wishart_log_norm_entropy(c * w, dof).entropy;
  // log-determinant shift d*log(c) enters through both B and E[log|Lambda|]
  CHECK(h1 - h0 ==
        doctest::Approx(0.5 * 3 * (3 + 1) * std::log(c)).epsilon(1e-10));
  CHECK(h1 > h0);
}

TEST_CASE("normal quantile") {
  CHECK(math::normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(math::normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-10));
  for (double p : {1e-8, 1e-3, 0.2, 0.7, 0.999, 1.0 - 1e-9}) {
    const double x = math::normal_quantile(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) ==
          doctest::Approx(p).epsilon(1e-9));
  }
  CHECK_THROWS_AS(math::normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(math::normal_quantile(1.0), std::domain_error);
}

TEST_CASE("log sum exp and normalization") {
  VectorXd v(3);
  v << -1000.0, -1001.0, -1002.0;
  const double lse = math::log_sum_exp(v);
  CHECK(lse == doctest::Approx(-1000.0 + std::log(1.0 + std::exp(-1.0) +
                                                  std::exp(-2.0))));
  math::normalize_log_weights(v);
  CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v[0] > v[1]);
}
