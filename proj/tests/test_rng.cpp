// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sanmix/rng.hpp"

using namespace sanmix;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("identical seed and stream reproduce identical sequences") {
  RngStream a(42, 3), b(42, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 4);
  int differ = 0;
  RngStream a2(42, 3);
  for (int i = 0; i < 100; ++i)
    if (a2.next_u64() != c.next_u64()) ++differ;
  CHECK(differ > 90);
}

TEST_CASE("split streams are deterministic and decorrelated") {
  RngStream parent(9);
  RngStream s1 = parent.split(0);
  RngStream s2 = parent.split(0);
  for (int i = 0; i < 10; ++i) CHECK(s1.uniform() == s2.uniform());

  RngStream u = parent.split(1), v = parent.split(2);
  const int n = 20000;
  double su = 0, sv = 0, suv = 0, suu = 0, svv = 0;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform(), y = v.uniform();
    su += x;
    sv += y;
    suv += x * y;
    suu += x * x;
    svv += y * y;
  }
  const double corr = (suv - su * sv / n) /
                      std::sqrt((suu - su * su / n) * (svv - sv * sv / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform stays inside the open interval") {
  RngStream rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.uniform();
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("moment checks at 1e5 draws") {
  const int n = 100000;
  const double root_n = std::sqrt(static_cast<double>(n));

  SUBCASE("normal") {
    RngStream rng(11);
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal();
      s += x;
      ss += x * x;
    }
    CHECK(std::abs(s / n) < 4.0 / root_n);
    CHECK(std::abs(ss / n - 1.0) < 4.0 * std::sqrt(2.0) / root_n);
  }

  SUBCASE("gamma(2, 1)") {
    RngStream rng(12);
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(2.0, 1.0);
      s += x;
      ss += x * x;
    }
    const double mean = s / n;
    CHECK(std::abs(mean - 2.0) < 0.02);
    CHECK(std::abs(ss / n - mean * mean - 2.0) < 4.0 * std::sqrt(20.0) / root_n);
  }

  SUBCASE("gamma with shape below one") {
    RngStream rng(13);
    double s = 0;
    for (int i = 0; i < n; ++i) s += rng.gamma(0.05, 2.0);
    // mean shape/rate = 0.025, sd of the mean = sqrt(shape)/rate/sqrt(n)
    CHECK(std::abs(s / n - 0.025) < 4.0 * std::sqrt(0.05) / 2.0 / root_n);
  }

  SUBCASE("beta(2, 3)") {
    RngStream rng(14);
    double s = 0;
    for (int i = 0; i < n; ++i) s += rng.beta(2.0, 3.0);
    const double sd = std::sqrt(2.0 * 3.0 / (25.0 * 6.0));
    CHECK(std::abs(s / n - 0.4) < 4.0 * sd / root_n);
  }

  SUBCASE("dirichlet(1,1,1)") {
    RngStream rng(15);
    VectorXd mean = VectorXd::Zero(3);
    for (int i = 0; i < n; ++i) mean += rng.dirichlet(VectorXd::Ones(3));
    mean /= n;
    for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k] - 1.0 / 3.0) < 0.005);
  }

  SUBCASE("categorical frequencies") {
    RngStream rng(16);
    VectorXd w(3);
    w << 1.0, 2.0, 7.0;
    VectorXd freq = VectorXd::Zero(3);
    for (int i = 0; i < n; ++i) freq[rng.categorical(w)] += 1.0;
    freq /= n;
    for (int k = 0; k < 3; ++k) {
      const double p = w[k] / w.sum();
      CHECK(std::abs(freq[k] - p) < 4.0 * std::sqrt(p * (1 - p)) / root_n);
    }
  }
}

TEST_CASE("normal-Wishart moments") {
  const int d = 2, n = 20000;
  RngStream rng(21);
  const VectorXd mu0 = VectorXd::Zero(d);
  const MatrixXd scale = MatrixXd::Identity(d, d);
  const double dof = d + 2.0;
  VectorXd mu_mean = VectorXd::Zero(d);
  MatrixXd lambda_mean = MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const auto draw = rng.normal_wishart(mu0, 1.0, dof, scale);
    mu_mean += draw.mu;
    lambda_mean += draw.lambda;
  }
  mu_mean /= n;
  lambda_mean /= n;
  // E[mu] = 0 with Var(mu) marginally a multivariate t; 3 SE with a generous
  // variance bound dof/(dof-2) per coordinate / kappa
  const double se = std::sqrt(dof / (dof - 2.0) / n);
  for (int k = 0; k < d; ++k) CHECK(std::abs(mu_mean[k]) < 3.5 * se);
  // E[Lambda] = dof * scale; Var(Lambda_ii) = 2 dof
  for (int k = 0; k < d; ++k)
    CHECK(std::abs(lambda_mean(k, k) - dof) <
          4.0 * std::sqrt(2.0 * dof / n));
}

TEST_CASE("normal-inverse-gamma moments") {
  const int n = 100000;
  RngStream rng(22);
  double s_sigma = 0, s_mu = 0;
  for (int i = 0; i < n; ++i) {
    const auto draw = rng.normal_inv_gamma(0.0, 0.01, 3.0, 2.0);
    s_sigma += draw.sigma2;
    s_mu += draw.mu;
  }
  // E[sigma2] = 2/(3-1) = 1, Var[sigma2] = 4/(4*1) = 1
  CHECK(std::abs(s_sigma / n - 1.0) < 4.0 / std::sqrt(static_cast<double>(n)));
  // E[mu] = 0, Var[mu] = E[sigma2]/kappa = 100
  CHECK(std::abs(s_mu / n) < 4.0 * 10.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("wishart draws recover the scale") {
  RngStream rng(23);
  MatrixXd scale(2, 2);
  scale << 1.0, 0.3, 0.3, 0.5;
  const double dof = 5.0;
  MatrixXd mean = MatrixXd::Zero(2, 2);
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += rng.wishart(scale, dof);
  mean /= n;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double expect = dof * scale(r, c);
      const double var = dof * (scale(r, c) * scale(r, c) +
                                scale(r, r) * scale(c, c));
      CHECK(std::abs(mean(r, c) - expect) < 4.0 * std::sqrt(var / n));
    }
}

TEST_CASE("invalid parameters raise domain errors") {
  RngStream rng(1);
  CHECK_THROWS_AS(rng.gamma(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(rng.gamma(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(rng.normal_inv_gamma(0, 1, 0, 1), std::domain_error);
  VectorXd w(2);
  w << -1.0, 1.0;
  CHECK_THROWS_AS(rng.categorical(w), std::domain_error);
}
