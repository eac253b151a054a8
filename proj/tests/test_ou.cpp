#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "zrp/ensemble.hpp"
#include "zrp/kernel.hpp"
#include "zrp/operators.hpp"
#include "zrp/ou.hpp"
#include "zrp/rng.hpp"
#include "zrp/stats.hpp"

using namespace zrp;

namespace {

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

OUSpec coupled_spec(double alpha, double c_plus, double c_minus, int sites,
                    int max_mode, double factor = 2.0) {
  RateModel model = RateModel::potential_coupled(2, 0.1, 40);
  Ensemble ens(model);
  DensityPoint pt = ens.at_density(Eigen::Vector2d(0.5, 0.5));
  JumpKernel kernel(alpha, c_plus, c_minus, sites);
  return ou_spec_discrete(pt, kernel, max_mode, false, factor);
}

}  // namespace

TEST_CASE("mode drift and noise obey the calibration identities") {
  OUSpec spec = coupled_spec(0.75, 0.5, 0.5, 64, 8);
  RateModel model = RateModel::potential_coupled(2, 0.1, 40);
  Ensemble ens(model);
  DensityPoint pt = ens.at_density(Eigen::Vector2d(0.5, 0.5));

  CHECK(spec.stable());
  for (int k = 1; k <= spec.max_mode(); ++k) {
    // coupling * Gamma = diag(mean rates), so the calibrated noise is
    // diagonal: the driving channels stay species-independent
    Eigen::MatrixXd r = spec.mode_noise(k);
    CHECK(std::abs(r(0, 1)) <= 1e-9);
    CHECK(std::abs(r(1, 0)) <= 1e-9);
    const double s = -spec.symbols[k - 1].real();
    CHECK(s > 0.0);
    for (int i = 0; i < 2; ++i) CHECK(close(r(i, i), 2.0 * s * pt.g_mean(i), 1e-8));
    // Lyapunov route reproduces the closed-form stationary covariance
    Eigen::MatrixXcd st = stationary_mode_covariance(spec, k);
    CHECK((st - pt.gamma.cast<std::complex<double>>()).cwiseAbs().maxCoeff() <=
          1e-9);
  }

  OUSpec doubled = coupled_spec(0.75, 0.5, 0.5, 64, 3, 4.0);
  Eigen::MatrixXcd st = stationary_mode_covariance(doubled, 2);
  CHECK((st - 2.0 * doubled.gamma.cast<std::complex<double>>())
            .cwiseAbs()
            .maxCoeff() <= 1e-9);

  OUSpec bad = spec;
  bad.symbols.assign(2, std::complex<double>{0.3, 1.0});
  CHECK(!bad.stable());
  CHECK_THROWS(OUProcess{bad});

  // frame correction only rotates: real parts of the symbol tables agree
  JumpKernel asym(1.25, 0.7, 0.3, 64);
  OUSpec plain = ou_spec_discrete(pt, asym, 4, false);
  OUSpec framed = ou_spec_discrete(pt, asym, 4, true);
  for (int k = 1; k <= 4; ++k) {
    CHECK(close(plain.symbols[k - 1].real(), framed.symbols[k - 1].real(), 1e-12));
    CHECK(plain.symbols[k - 1].imag() != framed.symbols[k - 1].imag());
  }
}

TEST_CASE("analytic autocorrelation has the stationary endpoints") {
  OUSpec spec = coupled_spec(0.75, 0.5, 0.5, 64, 8);
  TestFunction h = TestFunction::harmonic(1, 1.0, 0.4);
  h += TestFunction::harmonic(3, -0.6, 0.2);
  TestFunction g = TestFunction::harmonic(3, 0.5, 0.0);

  Eigen::MatrixXd lag0 = ou_autocorrelation(spec, h, h, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(close(lag0(i, j), spec.gamma(i, j) * h.l2_sq(), 1e-12));
  Eigen::MatrixXd cross0 = ou_autocorrelation(spec, h, g, 0.0);
  CHECK(close(cross0(0, 1), spec.gamma(0, 1) * inner_product(h, g), 1e-12));

  Eigen::MatrixXd far = ou_autocorrelation(spec, h, h, 60.0);
  CHECK(far.cwiseAbs().maxCoeff() <= 1e-10);

  // diagonal coupling and diagonal covariance: no cross-species correlation
  RateModel lin = RateModel::linear(2, 40);
  Ensemble ens(lin);
  DensityPoint pt = ens.at_density(Eigen::Vector2d(0.7, 1.2));
  JumpKernel kernel(0.75, 0.5, 0.5, 64);
  OUSpec diag = ou_spec_discrete(pt, kernel, 8, false);
  for (double lag : {0.0, 0.1, 0.5}) {
    Eigen::MatrixXd m = ou_autocorrelation(diag, h, h, lag);
    CHECK(std::abs(m(0, 1)) <= 1e-12);
    CHECK(std::abs(m(1, 0)) <= 1e-12);
  }
}

TEST_CASE("one-step propagator matches the generator to first order") {
  OUSpec spec = coupled_spec(1.25, 0.7, 0.3, 32, 3);
  const double dt = 1e-4;
  // two same-stream runs differ exactly by the deterministic propagation of
  // the initial offset, which isolates exp(dt A) without touching the noise
  OUProcess a(spec), b(spec);
  a.init_zero();
  b.init_zero();
  Eigen::VectorXcd v(2);
  v << std::complex<double>{0.9, -0.4}, std::complex<double>{-0.3, 0.7};
  for (int k = 1; k <= 3; ++k) b.mode(k) = v;
  Rng ra(42), rb(42);
  a.step(dt, ra);
  b.step(dt, rb);
  for (int k = 1; k <= 3; ++k) {
    Eigen::VectorXcd prop_v = b.mode(k) - a.mode(k);
    Eigen::MatrixXcd ad = dt * spec.mode_drift(k);
    Eigen::VectorXcd first = v + ad * v;
    double bound = 0.6 * ad.norm() * ad.norm() * v.norm();
    CHECK((prop_v - first).norm() <= bound);
    CHECK((prop_v - v).norm() > 0.0);
  }
}

TEST_CASE("simulated chain reproduces its analytic stationary law") {
  RateModel lin = RateModel::linear(1, 48);
  Ensemble ens(lin);
  DensityPoint pt = ens.at_density(Eigen::VectorXd::Constant(1, 1.0));
  OUSpec spec;
  spec.coupling = pt.lambda;
  spec.gamma = pt.gamma;
  spec.symbols.resize(4);
  for (int k = 1; k <= 4; ++k)
    spec.symbols[k - 1] = continuum_symbol(0.75, 0.5, 0.5, k);

  TestFunction h = TestFunction::harmonic(1, 1.0, 0.0);
  h += TestFunction::harmonic(3, 0.5, 0.0);
  TestFunction g = TestFunction::harmonic(1, 0.0, 1.0);

  OUProcess proc(spec);
  Rng rng(0xa11ceu);
  proc.init_stationary(rng);
  const double dt = 0.01;
  const int burn = 1000, steps = 100000, lag_steps = 10;

  for (int s = 0; s < burn; ++s) proc.step(dt, rng);

  // batch means absorb the temporal correlation into the stderr estimate
  RunningStat batches;
  RunningStat inside;
  std::vector<double> yh(steps), yg(steps);
  std::vector<std::complex<double>> z1(steps);
  for (int s = 0; s < steps; ++s) {
    proc.step(dt, rng);
    yh[s] = proc.field(h, 0);
    yg[s] = proc.field(g, 0);
    z1[s] = proc.mode(1)(0);
    inside.push(yh[s] * yh[s]);
    if (inside.count == 1000) {
      batches.push(inside.mean);
      inside = RunningStat{};
    }
  }
  const double target = spec.gamma(0, 0) * h.l2_sq();
  CHECK(std::abs(batches.mean - target) <= 4.0 * batches.stderr_mean());
  CHECK(batches.stderr_mean() < 0.05 * target);

  // mode-1 temporal decay rate: fitted against the closed form Re(A_1)
  const double rate = -spec.mode_drift(1)(0, 0).real();
  std::vector<double> lags, corrs;
  for (int m = 1; m <= 4; ++m) {
    std::complex<double> acc{0.0, 0.0};
    int cnt = 0;
    for (int s = 0; s + m * lag_steps < steps; s += 3) {
      acc += z1[s + m * lag_steps] * std::conj(z1[s]);
      ++cnt;
    }
    lags.push_back(m * lag_steps * dt);
    corrs.push_back(std::abs(acc) / cnt);
  }
  const double slope = fit_log_slope(lags, corrs);
  // |corr| ~ exp(-rate * lag) means d log / d log lag varies; fit directly
  double fitted = 0.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
      sx += lags[i];
      sy += std::log(corrs[i]);
      sxx += lags[i] * lags[i];
      sxy += lags[i] * std::log(corrs[i]);
    }
    const double n = static_cast<double>(lags.size());
    fitted = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  CHECK(close(fitted, rate, 0.05));
  CHECK(slope < 0.0);

  // lagged field covariance against the analytic formula
  for (double lag : {0.1, 0.3}) {
    const int off = static_cast<int>(lag / dt + 0.5);
    CovStat cov;
    for (int s = 0; s + off < steps; s += 5) cov.push(yg[s], yh[s + off]);
    const double want = ou_autocorrelation(spec, h, g, lag)(0, 0);
    const double se = std::sqrt(cov.cxx / cov.count) *
                      std::sqrt(cov.cyy / cov.count) /
                      std::sqrt(static_cast<double>(cov.count) / 40.0);
    CHECK(std::abs(cov.covariance() - want) <= 5.0 * se + 0.01 * std::abs(want));
  }

  // properness: the pseudo-second-moment of a mode stays at zero
  std::complex<double> pseudo{0.0, 0.0};
  for (int s = 0; s < steps; s += 7) pseudo += z1[s] * z1[s];
  pseudo /= static_cast<double>((steps + 6) / 7);
  CHECK(std::abs(pseudo) <= 5.0 * spec.gamma(0, 0) / std::sqrt(steps / 7.0 / 15.0));
}

TEST_CASE("stationarity round trip and independent driving channels") {
  OUSpec spec = coupled_spec(1.25, 0.7, 0.3, 64, 8);
  const int replicas = 400;
  TestFunction h = TestFunction::harmonic(2, 0.8, -0.3);

  std::vector<double> start, finish;
  for (int r = 0; r < replicas; ++r) {
    Rng rng = Rng::stream(0xdeuLL, r);
    OUProcess proc(spec);
    proc.init_stationary(rng);
    start.push_back(proc.field(h, 0));
    for (int s = 0; s < 6; ++s) proc.step(0.05, rng);
    finish.push_back(proc.field(h, 0));
  }
  CHECK(ks_two_sample_p(start, finish) >= 0.01);

  // small-step increments, drift removed: injected noise decorrelates across
  // species to sampling accuracy
  const double dt = 1e-3;
  OUProcess proc(spec);
  Rng rng(0xbeefu);
  proc.init_stationary(rng);
  CovStat re_cov, im_cov;
  for (int s = 0; s < 4000; ++s) {
    Eigen::VectorXcd before = proc.mode(1);
    proc.step(dt, rng);
    Eigen::VectorXcd inc =
        proc.mode(1) - before - dt * (spec.mode_drift(1) * before);
    re_cov.push(inc(0).real(), inc(1).real());
    im_cov.push(inc(0).imag(), inc(1).imag());
  }
  const double scale =
      std::sqrt(re_cov.cxx / re_cov.count) * std::sqrt(re_cov.cyy / re_cov.count);
  CHECK(std::abs(re_cov.covariance()) <= 4.0 * scale / std::sqrt(4000.0));
  CHECK(std::abs(im_cov.covariance()) <= 4.0 * scale / std::sqrt(4000.0));
}

TEST_CASE("burgers integrator reduces to the linear chain and stays stationary") {
  RateModel cr = RateModel::constant_rate(1, 48);
  Ensemble ens(cr);
  DensityPoint pt = ens.at_density(Eigen::VectorXd::Constant(1, 0.8));
  const double alpha = 1.5;

  SUBCASE("zero quadratic coefficients give the identical stream") {
    JumpKernel kernel(alpha, 0.6, 0.6, 64);
    OUSpec ospec = ou_spec_continuum(pt, alpha, 0.6, 0.6, 8);
    BurgersSpec bspec;
    bspec.ou = ospec;
    // symmetric kernel: first moment zero, so the quadratic prefactor is 0
    CHECK(std::abs(kernel.untruncated_mean()) <= 1e-12);
    const double half_m = 0.5 * kernel.untruncated_mean();
    auto d2 = ens.rate_second_derivatives(pt.rho);
    bspec.quad = {half_m * d2[0]};

    OUProcess plain(ospec);
    BurgersProcess split(bspec);
    Rng r1(99), r2(99);
    plain.init_stationary(r1);
    split.init_stationary(r2);
    for (int s = 0; s < 5; ++s) {
      plain.step(0.01, r1);
      split.step(0.01, r2);
    }
    for (int k = 1; k <= 8; ++k)
      CHECK((plain.mode(k) - split.mode(k)).norm() == 0.0);
  }

  SUBCASE("nonlinear invariance diagnostic at the critical exponent") {
    JumpKernel kernel(alpha, 0.8, 0.4, 64);
    const int K = 32;
    OUSpec ospec = ou_spec_continuum(pt, alpha, 0.8, 0.4, K);
    BurgersSpec bspec;
    bspec.ou = ospec;
    const double half_m = 0.5 * kernel.untruncated_mean();
    CHECK(half_m > 0.0);
    auto d2 = ens.rate_second_derivatives(pt.rho);
    CHECK(std::abs(d2[0](0, 0)) > 1e-3);
    bspec.quad = {half_m * d2[0]};

    BurgersProcess proc(bspec);
    Rng rng(0x6a7b1u);
    proc.init_stationary(rng);
    const double dt = 1e-4;
    const int steps = 10000;
    RunningStat energy;
    for (int s = 0; s < steps; ++s) {
      proc.step(dt, rng);
      if (s % 25 == 0) {
        double e = 0.0;
        for (int k = 1; k <= K; ++k) e += std::norm(proc.mode(k)(0));
        energy.push(e / K);
      }
    }
    CHECK(close(energy.mean, pt.gamma(0, 0), 0.10));

    TestFunction c0 = TestFunction::harmonic(0, 3.0);
    CHECK(proc.field(c0, 0) == 0.0);
  }

  SUBCASE("blow-up guard") {
    OUSpec ospec = ou_spec_continuum(pt, alpha, 0.8, 0.4, 8);
    BurgersSpec bspec;
    bspec.ou = ospec;
    bspec.quad = {Eigen::MatrixXd::Constant(1, 1, 5e4)};
    BurgersProcess proc(bspec);
    Rng rng(7);
    proc.init_stationary(rng);
    bool blew = false;
    try {
      for (int s = 0; s < 200; ++s) proc.step(0.01, rng);
    } catch (const std::runtime_error&) {
      blew = true;
    }
    CHECK(blew);
  }
}
