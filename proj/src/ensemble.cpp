#include "zrp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace zrp {

Ensemble::Ensemble(RateModel model, double tail_threshold)
    : model_(std::move(model)), tail_threshold_(tail_threshold) {
  if (!model_.has_potential())
    throw std::invalid_argument("Ensemble: model must define a potential");
  states_ = model_.enumerate_site_states();
  const int n = model_.species();
  const int m = static_cast<int>(states_.size());
  counts_.resize(m, n);
  neg_potential_.resize(m);
  rates_.resize(m, n);
  for (int s = 0; s < m; ++s) {
    for (int i = 0; i < n; ++i) counts_(s, i) = states_[s][i];
    neg_potential_(s) = -model_.potential(states_[s]);
    for (int i = 0; i < n; ++i) rates_(s, i) = model_.rate(states_[s], i);
  }
}

double Ensemble::log_partition(const Eigen::VectorXd& mu) const {
  Eigen::VectorXd e = neg_potential_ + counts_ * mu;
  double m = e.maxCoeff();
  return m + std::log((e.array() - m).exp().sum());
}

std::vector<double> Ensemble::site_probabilities(const Eigen::VectorXd& mu) const {
  Eigen::VectorXd e = neg_potential_ + counts_ * mu;
  double lz = log_partition(mu);
  std::vector<double> p(states_.size());
  for (std::size_t s = 0; s < p.size(); ++s) p[s] = std::exp(e(s) - lz);
  return p;
}

Eigen::VectorXd Ensemble::density(const Eigen::VectorXd& mu) const {
  auto p = site_probabilities(mu);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(species());
  for (std::size_t s = 0; s < p.size(); ++s)
    r += p[s] * counts_.row(s).transpose();
  return r;
}

Eigen::MatrixXd Ensemble::covariance(const Eigen::VectorXd& mu) const {
  auto p = site_probabilities(mu);
  const int n = species();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd sec = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < p.size(); ++s) {
    Eigen::VectorXd k = counts_.row(s).transpose();
    mean += p[s] * k;
    sec += p[s] * k * k.transpose();
  }
  return sec - mean * mean.transpose();
}

Eigen::VectorXd Ensemble::rate_mean(const Eigen::VectorXd& mu) const {
  auto p = site_probabilities(mu);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(species());
  for (std::size_t s = 0; s < p.size(); ++s)
    g += p[s] * rates_.row(s).transpose();
  return g;
}

Eigen::MatrixXd Ensemble::rate_site_cov(const Eigen::VectorXd& mu) const {
  auto p = site_probabilities(mu);
  const int n = species();
  Eigen::VectorXd mk = Eigen::VectorXd::Zero(n), mg = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd gk = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < p.size(); ++s) {
    Eigen::VectorXd k = counts_.row(s).transpose();
    Eigen::VectorXd g = rates_.row(s).transpose();
    mk += p[s] * k;
    mg += p[s] * g;
    gk += p[s] * g * k.transpose();
  }
  return gk - mg * mk.transpose();
}

double Ensemble::tail_mass(const Eigen::VectorXd& mu) const {
  if (model_.family() == RateFamily::Custom) return 0.0;
  const Ensemble ext(model_.extended(12), tail_threshold_);
  double lz = log_partition(mu);
  double lz_ext = ext.log_partition(mu);
  return 1.0 - std::exp(lz - lz_ext);
}

DensityPoint Ensemble::at_mu(const Eigen::VectorXd& mu) const {
  DensityPoint pt;
  pt.mu = mu;
  pt.rho = density(mu);
  pt.g_mean = rate_mean(mu);
  pt.gamma = covariance(mu);
  pt.log_z = log_partition(mu);
  pt.tail_mass = tail_mass(mu);
  // fugacity chain rule: d(expected rate)_i/d rho_j = g~_i (Gamma^{-1})_{ij}
  pt.lambda = pt.g_mean.asDiagonal() * pt.gamma.inverse();
  if (pt.tail_mass > tail_threshold_)
    throw std::runtime_error(
        "Ensemble: occupancy cap discards too much mass at this density");
  return pt;
}

DensityPoint Ensemble::at_density(const Eigen::VectorXd& rho) const {
  const int n = species();
  if (rho.size() != n) throw std::invalid_argument("at_density: bad dimension");
  for (int i = 0; i < n; ++i)
    if (rho(i) <= 0.0 || rho(i) >= model_.cap() / 2.0)
      throw std::invalid_argument("at_density: density outside usable range");
  Eigen::VectorXd mu(n);
  for (int i = 0; i < n; ++i) mu(i) = std::log(std::max(rho(i), 1e-6));
  double res = (density(mu) - rho).lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 100; ++it) {
    if (res < 1e-12) return at_mu(mu);
    Eigen::VectorXd f = density(mu) - rho;
    Eigen::MatrixXd jac = covariance(mu);  // dR/dmu
    Eigen::VectorXd step = jac.ldlt().solve(f);
    double damp = 1.0;
    for (int half = 0; half < 40; ++half) {
      Eigen::VectorXd trial = mu - damp * step;
      double r2 = (density(trial) - rho).lpNorm<Eigen::Infinity>();
      if (r2 < res) {
        mu = trial;
        res = r2;
        break;
      }
      damp *= 0.5;
    }
  }
  if (res < 1e-10) return at_mu(mu);
  throw std::runtime_error("at_density: Newton iteration failed to converge");
}

Eigen::MatrixXd Ensemble::lambda_fd(const Eigen::VectorXd& rho, double step) const {
  const int n = species();
  Eigen::MatrixXd out(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd hi = rho, lo = rho;
    hi(j) += step;
    lo(j) -= step;
    Eigen::VectorXd ghi = at_density(hi).g_mean;
    Eigen::VectorXd glo = at_density(lo).g_mean;
    out.col(j) = (ghi - glo) / (2.0 * step);
  }
  return out;
}

Eigen::MatrixXd Ensemble::lambda_cov_route(const Eigen::VectorXd& mu) const {
  return rate_site_cov(mu) * covariance(mu).inverse();
}

std::vector<Eigen::MatrixXd> Ensemble::rate_second_derivatives(
    const Eigen::VectorXd& rho, double step) const {
  const int n = species();
  std::vector<Eigen::MatrixXd> out(n, Eigen::MatrixXd::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd hi = rho, lo = rho;
    hi(k) += step;
    lo(k) -= step;
    Eigen::MatrixXd lhi = at_density(hi).lambda;
    Eigen::MatrixXd llo = at_density(lo).lambda;
    Eigen::MatrixXd d = (lhi - llo) / (2.0 * step);  // d lambda_{ij} / d rho_k
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[i](j, k) = d(i, j);
  }
  // symmetrize: mixed partials commute up to finite-difference noise
  for (int i = 0; i < n; ++i)
    out[i] = 0.5 * (out[i] + out[i].transpose()).eval();
  return out;
}

double Ensemble::expectation_local(
    const Eigen::VectorXd& mu,
    const std::function<double(const std::vector<Occupancy>&)>& f, int radius,
    std::size_t guard) const {
  const int m = 2 * radius + 1;
  const std::size_t S = states_.size();
  double combos = std::pow(static_cast<double>(S), m);
  if (combos > static_cast<double>(guard))
    throw std::runtime_error("expectation_local: window enumeration too large");
  auto p = site_probabilities(mu);
  std::vector<int> idx(m, 0);
  std::vector<Occupancy> window(m);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (int s = 0; s < m; ++s) w *= p[idx[s]];
    if (w > 0.0) {
      for (int s = 0; s < m; ++s) window[s] = states_[idx[s]];
      acc += w * f(window);
    }
    int s = m - 1;
    while (s >= 0 && idx[s] == static_cast<int>(S) - 1) {
      idx[s] = 0;
      --s;
    }
    if (s < 0) break;
    ++idx[s];
  }
  return acc;
}

SiteSampler::SiteSampler(const Ensemble& ensemble, const Eigen::VectorXd& mu)
    : states_(&ensemble.site_states()),
      alias_(ensemble.site_probabilities(mu)) {}

namespace {

struct FrameObjective {
  const Ensemble* ens;
  double operator()(const Eigen::VectorXd& rho) const {
    Eigen::MatrixXd l;
    try {
      l = ens->at_density(rho).lambda;
    } catch (const std::exception&) {
      return 1e100;  // outside the solvable region
    }
    const int n = l.rows();
    double J = 0.0;
    double dbar = l.trace() / n;
    for (int i = 0; i < n; ++i) {
      J += (l(i, i) - dbar) * (l(i, i) - dbar);
      for (int j = 0; j < n; ++j)
        if (i != j) J += l(i, j) * l(i, j);
    }
    return J;
  }
};

// Minimal Nelder-Mead for the low-dimensional frame search.
Eigen::VectorXd nelder_mead(const FrameObjective& f, Eigen::VectorXd x0,
                            double scale, int iters) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1](i) += scale;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);
  for (int it = 0; it < iters; ++it) {
    std::vector<int> ord(n + 1);
    for (int i = 0; i <= n; ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (int i = 0; i <= n; ++i) {
      xs2.push_back(xs[ord[i]]);
      fs2.push_back(fs[ord[i]]);
    }
    xs = xs2;
    fs = fs2;
    if (fs[n] - fs[0] < 1e-24) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[i];
    centroid /= n;
    Eigen::VectorXd xr = centroid + (centroid - xs[n]);
    double fr = f(xr);
    if (fr < fs[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[n]);
      double fe = f(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (xs[n] - centroid);
      double fc = f(xc);
      if (fc < fs[n]) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fs[i] < fs[best]) best = i;
  return xs[best];
}

}  // namespace

FrameSearchResult find_frame_density(const Ensemble& ensemble,
                                     const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi, double tol) {
  const int n = ensemble.species();
  FrameObjective obj{&ensemble};
  // coarse grid scan
  const int G = 7;
  Eigen::VectorXd best = 0.5 * (lo + hi);
  double best_J = obj(best);
  std::vector<int> idx(n, 0);
  while (true) {
    Eigen::VectorXd rho(n);
    for (int i = 0; i < n; ++i)
      rho(i) = lo(i) + (hi(i) - lo(i)) * idx[i] / (G - 1.0);
    double J = obj(rho);
    if (J < best_J) {
      best_J = J;
      best = rho;
    }
    int i = n - 1;
    while (i >= 0 && idx[i] == G - 1) {
      idx[i] = 0;
      --i;
    }
    if (i < 0) break;
    ++idx[i];
  }
  double scale = 0.1 * (hi - lo).maxCoeff();
  best = nelder_mead(obj, best, scale, 400);
  for (int i = 0; i < n; ++i) best(i) = std::clamp(best(i), lo(i), hi(i));

  FrameSearchResult out;
  out.point = ensemble.at_density(best);
  const Eigen::MatrixXd& l = out.point.lambda;
  double dmin = 1e300, dmax = -1e300;
  for (int i = 0; i < n; ++i) {
    dmin = std::min(dmin, l(i, i));
    dmax = std::max(dmax, l(i, i));
    for (int j = 0; j < n; ++j)
      if (i != j) out.off_diag_max = std::max(out.off_diag_max, std::fabs(l(i, j)));
  }
  out.diag_spread = n > 1 ? dmax - dmin : 0.0;
  out.satisfied = out.off_diag_max < tol && out.diag_spread < tol;
  return out;
}

}  // namespace zrp
