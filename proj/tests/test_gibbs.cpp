#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "zrp/ensemble.hpp"
#include "zrp/stats.hpp"

using namespace zrp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

static VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}
static VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

TEST_CASE("partition function closed forms") {
  // geometric weights: Z = 1/(1 - e^mu); at mu = ln(1/2) this is 2
  Ensemble geo(RateModel::constant_rate(1, 64));
  CHECK(geo.log_partition(vec1(std::log(0.5))) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Poisson weights: Z = exp(e^mu); at mu = 0 this is e
  Ensemble poi(RateModel::linear(1, 64));
  CHECK(poi.log_partition(vec1(0.0)) == doctest::Approx(1.0).epsilon(1e-12));
  // stability at strongly positive potentials
  CHECK(std::isfinite(geo.log_partition(vec1(5.0))));
}

TEST_CASE("moments against a direct summation oracle") {
  Ensemble geo(RateModel::constant_rate(1, 64));
  double mu = -0.45;
  double z = 0, m1 = 0, m2 = 0, g = 0;
  for (int k = 0; k <= 64; ++k) {
    double w = std::exp(mu * k);
    z += w;
    m1 += k * w;
    m2 += double(k) * k * w;
    g += (k >= 1 ? 1.0 : 0.0) * w;
  }
  CHECK(geo.log_partition(vec1(mu)) == doctest::Approx(std::log(z)).epsilon(1e-13));
  CHECK(geo.density(vec1(mu))(0) == doctest::Approx(m1 / z).epsilon(1e-13));
  CHECK(geo.covariance(vec1(mu))(0, 0) ==
        doctest::Approx(m2 / z - (m1 / z) * (m1 / z)).epsilon(1e-12));
  CHECK(geo.rate_mean(vec1(mu))(0) == doctest::Approx(g / z).epsilon(1e-13));
}

TEST_CASE("geometric family at unit density") {
  Ensemble geo(RateModel::constant_rate(1, 64));
  auto pt = geo.at_density(vec1(1.0));
  CHECK(pt.mu(0) == doctest::Approx(std::log(0.5)).epsilon(1e-10));
  CHECK(pt.gamma(0, 0) == doctest::Approx(2.0).epsilon(1e-10));  // rho(1+rho)
  CHECK(pt.g_mean(0) == doctest::Approx(0.5).epsilon(1e-10));    // rho/(1+rho)
  // lambda = 1/(1+rho)^2
  CHECK(pt.lambda(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("poisson family at density 0.7") {
  Ensemble poi(RateModel::linear(1, 64));
  auto pt = poi.at_density(vec1(0.7));
  CHECK(pt.mu(0) == doctest::Approx(std::log(0.7)).epsilon(1e-11));
  CHECK(pt.gamma(0, 0) == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(pt.g_mean(0) == doctest::Approx(0.7).epsilon(1e-11));
  CHECK(pt.lambda(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fugacity and Einstein identities across families and densities") {
  std::vector<Ensemble> ensembles;
  ensembles.emplace_back(RateModel::linear(2, 64));
  ensembles.emplace_back(RateModel::constant_rate(2, 64));
  ensembles.emplace_back(RateModel::potential_coupled(2, 0.1, 64));
  std::vector<double> h1, h2;
  for (int k = 1; k <= 64; ++k) {
    h1.push_back(0.5 * k);  // sub-linear growth, Poisson-like tail
    h2.push_back(2.0);      // constant rate 2, geometric tail
  }
  ensembles.emplace_back(RateModel::independent({h1, h2}));
  std::vector<VectorXd> rhos = {vec2(0.4, 0.9), vec2(0.7, 0.7), vec2(1.3, 0.5)};
  for (const auto& ens : ensembles) {
    for (const auto& rho : rhos) {
      auto pt = ens.at_density(rho);
      // expected rate equals the fugacity e^mu
      for (int i = 0; i < 2; ++i)
        CHECK(std::fabs(pt.g_mean(i) - std::exp(pt.mu(i))) < 1e-8);
      // shift identity: Cov(g_i, k_j) = delta_ij g~_i
      MatrixXd c = ens.rate_site_cov(pt.mu);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          CHECK(std::fabs(c(i, j) - (i == j ? pt.g_mean(i) : 0.0)) < 1e-8);
      // compressibility is symmetric positive definite
      CHECK((pt.gamma - pt.gamma.transpose()).lpNorm<Eigen::Infinity>() < 1e-9);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(pt.gamma);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      // round trip
      CHECK((ens.density(pt.mu) - rho).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("rate jacobian: chain rule, covariance route, finite differences") {
  Ensemble ens(RateModel::potential_coupled(2, 0.1, 64));
  VectorXd rho = vec2(0.8, 0.6);
  auto pt = ens.at_density(rho);
  MatrixXd via_cov = ens.lambda_cov_route(pt.mu);
  MatrixXd via_fd = ens.lambda_fd(rho);
  CHECK((pt.lambda - via_cov).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK((pt.lambda - via_fd).lpNorm<Eigen::Infinity>() < 1e-6);
  // Einstein relation in matrix form: lambda Gamma = diag(g~)
  MatrixXd lg = pt.lambda * pt.gamma;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::fabs(lg(i, j) - (i == j ? pt.g_mean(i) : 0.0)) < 1e-8);
}

TEST_CASE("coupled species are negatively correlated") {
  Ensemble ens(RateModel::potential_coupled(2, 0.1, 64));
  auto pt = ens.at_density(vec2(0.7, 0.7));
  CHECK(pt.gamma(0, 1) < 0.0);
  CHECK(pt.lambda(0, 1) > 0.0);  // -g~ Gamma_{01} / det > 0
}

TEST_CASE("tail mass estimate and cap guard") {
  // geometric at density 1: P(k > cap) = 2^{-cap}
  Ensemble small(RateModel::constant_rate(1, 20), /*tail_threshold=*/1e-4);
  auto pt = small.at_density(vec1(1.0));
  CHECK(pt.tail_mass == doctest::Approx(std::pow(2.0, -20)).epsilon(0.2));
  // default threshold rejects the same point
  Ensemble strict(RateModel::constant_rate(1, 20));
  CHECK_THROWS_AS((void)strict.at_density(vec1(1.0)), std::runtime_error);
  // a 64-cap at moderate density is comfortably inside the threshold
  Ensemble wide(RateModel::constant_rate(1, 64));
  CHECK(wide.at_density(vec1(1.0)).tail_mass < 1e-10);
}

TEST_CASE("site sampler reproduces single-site moments deterministically") {
  Ensemble ens(RateModel::potential_coupled(2, 0.1, 64));
  auto pt = ens.at_density(vec2(0.7, 0.7));
  SiteSampler sampler(ens, pt.mu);
  Rng rng = Rng::stream(2024, 3);
  RunningStat s0, s1;
  CovStat c01;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const Occupancy& k = sampler.draw(rng);
    s0.push(k[0]);
    s1.push(k[1]);
    c01.push(k[0], k[1]);
  }
  CHECK(std::fabs(s0.mean - 0.7) < 5.0 * s0.stderr_mean());
  CHECK(std::fabs(s1.mean - 0.7) < 5.0 * s1.stderr_mean());
  CHECK(s0.variance() == doctest::Approx(pt.gamma(0, 0)).epsilon(0.05));
  CHECK(c01.covariance() == doctest::Approx(pt.gamma(0, 1)).epsilon(0.25));
  // identical stream, identical draws
  Rng r1 = Rng::stream(77, 0), r2 = Rng::stream(77, 0);
  for (int i = 0; i < 100; ++i)
    CHECK(sampler.draw_index(r1) == sampler.draw_index(r2));
}

TEST_CASE("local expectations over product windows") {
  Ensemble ens(RateModel::linear(1, 32));
  auto pt = ens.at_density(vec1(0.7));
  double one_site = ens.expectation_local(
      pt.mu, [](const std::vector<Occupancy>& w) { return double(w[0][0]); }, 0);
  CHECK(one_site == doctest::Approx(0.7).epsilon(1e-10));
  // independence across sites: E[k(-1) k(0)] = rho^2
  double pair = ens.expectation_local(
      pt.mu,
      [](const std::vector<Occupancy>& w) {
        return double(w[0][0]) * double(w[1][0]);
      },
      1);
  CHECK(pair == doctest::Approx(0.49).epsilon(1e-9));
  // enumeration guard
  Ensemble big(RateModel::potential_coupled(2, 0.1, 64));
  CHECK_THROWS_AS(
      (void)big.expectation_local(
          big.at_density(vec2(0.7, 0.7)).mu,
          [](const std::vector<Occupancy>&) { return 1.0; }, 3),
      std::runtime_error);
}

TEST_CASE("frame search on decoupled families") {
  // constant rates, two species: scalar jacobian exactly on the diagonal
  Ensemble con(RateModel::constant_rate(2, 64));
  auto res = find_frame_density(con, vec2(0.5, 0.5), vec2(1.5, 1.5));
  CHECK(res.satisfied);
  CHECK(std::fabs(res.point.rho(0) - res.point.rho(1)) < 1e-4);
  double lam = 1.0 / ((1.0 + res.point.rho(0)) * (1.0 + res.point.rho(0)));
  CHECK(res.point.lambda(0, 0) == doctest::Approx(lam).epsilon(1e-6));
  CHECK(res.point.lambda(1, 1) == doctest::Approx(lam).epsilon(1e-6));
  CHECK(std::fabs(res.point.lambda(0, 1)) < 1e-9);

  // linear rates: identity jacobian everywhere, any point qualifies
  Ensemble lin(RateModel::linear(2, 64));
  auto res2 = find_frame_density(lin, vec2(0.5, 0.5), vec2(1.2, 1.2));
  CHECK(res2.satisfied);
  CHECK((res2.point.lambda - MatrixXd::Identity(2, 2)).lpNorm<Eigen::Infinity>() <
        1e-8);
}

TEST_CASE("frame search reports honest failure for coupled rates") {
  Ensemble cpl(RateModel::potential_coupled(2, 0.1, 64));
  auto res = find_frame_density(cpl, vec2(0.5, 0.5), vec2(1.0, 1.0));
  CHECK(!res.satisfied);
  CHECK(res.off_diag_max > 1e-4);  // structurally nonzero off-diagonals
  CHECK(res.diag_spread < 1e-5);   // symmetry can still equalize the diagonal
  CHECK(std::fabs(res.point.rho(0) - res.point.rho(1)) < 0.05);
}

TEST_CASE("second derivatives of the expected rate") {
  // linear family: g~(rho) = rho, all second derivatives vanish
  Ensemble lin(RateModel::linear(1, 64));
  auto t = lin.rate_second_derivatives(vec1(0.8));
  CHECK(std::fabs(t[0](0, 0)) < 1e-6);
  // geometric family: g~(rho) = rho/(1+rho), second derivative -2/(1+rho)^3
  Ensemble geo(RateModel::constant_rate(1, 64));
  auto t2 = geo.rate_second_derivatives(vec1(1.0));
  CHECK(t2[0](0, 0) == doctest::Approx(-0.25).epsilon(1e-4));
}
