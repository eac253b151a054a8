#include "zrp/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace zrp {

double single_site_mean(const Ensemble& ensemble, const Eigen::VectorXd& mu,
                        const std::function<double(const int*)>& f) {
  const auto& states = ensemble.site_states();
  const auto probs = ensemble.site_probabilities(mu);
  double out = 0.0;
  for (std::size_t s = 0; s < states.size(); ++s)
    out += probs[s] * f(states[s].data());
  return out;
}

Eigen::VectorXd single_site_gradient(const Ensemble& ensemble,
                                     const Eigen::VectorXd& rho,
                                     const std::function<double(const int*)>& f,
                                     double step) {
  const int n = ensemble.species();
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd hi = rho, lo = rho;
    hi(j) += step;
    lo(j) -= step;
    double fhi = single_site_mean(ensemble, ensemble.at_density(hi).mu, f);
    double flo = single_site_mean(ensemble, ensemble.at_density(lo).mu, f);
    out(j) = (fhi - flo) / (2.0 * step);
  }
  return out;
}

Eigen::MatrixXd single_site_hessian(const Ensemble& ensemble,
                                    const Eigen::VectorXd& rho,
                                    const std::function<double(const int*)>& f,
                                    double step) {
  const int n = ensemble.species();
  auto mean_at = [&](const Eigen::VectorXd& r) {
    return single_site_mean(ensemble, ensemble.at_density(r).mu, f);
  };
  const double f0 = mean_at(rho);
  Eigen::MatrixXd out(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd hi = rho, lo = rho;
    hi(j) += step;
    lo(j) -= step;
    out(j, j) = (mean_at(hi) - 2.0 * f0 + mean_at(lo)) / (step * step);
  }
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      Eigen::VectorXd pp = rho, pm = rho, mp = rho, mm = rho;
      pp(j) += step;
      pp(k) += step;
      pm(j) += step;
      pm(k) -= step;
      mp(j) -= step;
      mp(k) += step;
      mm(j) -= step;
      mm(k) -= step;
      double d = (mean_at(pp) - mean_at(pm) - mean_at(mp) + mean_at(mm)) /
                 (4.0 * step * step);
      out(j, k) = d;
      out(k, j) = d;
    }
  }
  return out;
}

BlockTotalLaw block_total_law(const Ensemble& ensemble,
                              const Eigen::VectorXd& mu, int sites,
                              std::size_t guard) {
  const int n = ensemble.species();
  const int cap = ensemble.model().cap();
  BlockTotalLaw law;
  law.sites = sites;
  law.species = n;
  law.extent = sites * cap + 1;
  std::size_t size = 1;
  for (int i = 0; i < n; ++i) {
    if (size > guard / static_cast<std::size_t>(law.extent))
      throw std::runtime_error("block_total_law: totals grid exceeds guard");
    size *= static_cast<std::size_t>(law.extent);
  }
  law.p.assign(size, 0.0);
  law.p[0] = 1.0;
  if (sites == 0) return law;

  // Flat-index offsets of the single-site states; adding one never carries
  // between axes because per-axis coordinates stay below extent by
  // construction (at most sites*cap after all convolutions).
  const auto& states = ensemble.site_states();
  const auto probs = ensemble.site_probabilities(mu);
  std::vector<std::size_t> offsets(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    std::size_t off = 0;
    for (int i = 0; i < n; ++i)
      off = off * law.extent + static_cast<std::size_t>(states[s][i]);
    offsets[s] = off;
  }

  std::vector<double> next(size);
  for (int m = 0; m < sites; ++m) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t src = 0; src < size; ++src) {
      const double w = law.p[src];
      if (w == 0.0) continue;
      for (std::size_t s = 0; s < states.size(); ++s)
        next[src + offsets[s]] += w * probs[s];
    }
    law.p.swap(next);
  }
  return law;
}

namespace {

// Odometer over the support [0, sites*cap]^species of a totals law.
bool advance_totals(std::vector<long>& k, int top) {
  for (int i = static_cast<int>(k.size()) - 1; i >= 0; --i) {
    if (k[i] < top) {
      ++k[i];
      std::fill(k.begin() + i + 1, k.end(), 0L);
      return true;
    }
  }
  return false;
}

}  // namespace

EquivalenceCheck equivalence_of_ensembles_check(
    const Ensemble& ensemble, const DensityPoint& point,
    const std::function<double(const int*)>& f, int ell, std::size_t guard) {
  if (ell < 1) throw std::invalid_argument("equivalence check needs ell >= 1");
  const int n = ensemble.species();
  const int m = 2 * ell + 1;

  EquivalenceCheck out;
  out.ell = ell;
  out.f_mean = single_site_mean(ensemble, point.mu, f);
  out.f_gradient = single_site_gradient(ensemble, point.rho, f);
  out.f_hessian = single_site_hessian(ensemble, point.rho, f);

  const auto& states = ensemble.site_states();
  const auto probs = ensemble.site_probabilities(point.mu);
  double l5 = 0.0;
  for (std::size_t s = 0; s < states.size(); ++s)
    l5 += probs[s] * std::pow(std::abs(f(states[s].data()) - out.f_mean), 5.0);
  out.f_l5_sq = std::pow(l5, 0.4);
  out.first_reference = out.f_l5_sq / (static_cast<double>(ell) * ell);
  out.second_reference = out.f_l5_sq / (static_cast<double>(ell) * ell * ell);

  const BlockTotalLaw law_m = block_total_law(ensemble, point.mu, m, guard);
  const BlockTotalLaw law_rest = block_total_law(ensemble, point.mu, m - 1, guard);
  const int rest_top = law_rest.extent - 1;

  // E[f(eta(0)) | totals K] via P(eta(0) = k0, rest sums to K - k0).
  std::vector<double> fvals(states.size());
  for (std::size_t s = 0; s < states.size(); ++s)
    fvals[s] = f(states[s].data());

  double first4 = 0.0, second4 = 0.0;
  std::vector<long> K(n, 0L), rest(n, 0L);
  const int top = law_m.extent - 1;
  do {
    const double w = law_m.p[law_m.index(K)];
    if (w == 0.0) continue;
    double num = 0.0;
    for (std::size_t s = 0; s < states.size(); ++s) {
      bool ok = true;
      for (int i = 0; i < n; ++i) {
        rest[i] = K[i] - states[s][i];
        if (rest[i] < 0 || rest[i] > rest_top) {
          ok = false;
          break;
        }
      }
      if (ok) num += probs[s] * fvals[s] * law_rest.p[law_rest.index(rest)];
    }
    const double cond = num / w - out.f_mean;

    double lin = 0.0, quad = 0.0;
    for (int j = 0; j < n; ++j) {
      const double bj = static_cast<double>(K[j]) / m - point.rho(j);
      lin += out.f_gradient(j) * bj;
      for (int k = 0; k < n; ++k) {
        const double bk = static_cast<double>(K[k]) / m - point.rho(k);
        quad += out.f_hessian(j, k) * (bj * bk - point.gamma(j, k) / m);
      }
    }
    const double x1 = cond - lin;
    const double x2 = x1 - 0.5 * quad;
    first4 += w * x1 * x1 * x1 * x1;
    second4 += w * x2 * x2 * x2 * x2;
  } while (advance_totals(K, top));

  out.first_norm_sq = std::sqrt(first4);
  out.second_norm_sq = std::sqrt(second4);
  return out;
}

void block_moment_table(const Ensemble& ensemble, const DensityPoint& point,
                        int ell, Eigen::VectorXd* fourth,
                        Eigen::MatrixXd* pair_fourth) {
  const int n = ensemble.species();
  const int m = 2 * ell + 1;
  const BlockTotalLaw law = block_total_law(ensemble, point.mu, m);
  Eigen::VectorXd f4 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p4 = Eigen::MatrixXd::Zero(n, n);
  std::vector<long> K(n, 0L);
  const int top = law.extent - 1;
  do {
    const double w = law.p[law.index(K)];
    if (w == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      const double bj = static_cast<double>(K[j]) / m - point.rho(j);
      f4(j) += w * bj * bj * bj * bj;
      for (int k = 0; k < n; ++k) {
        const double bk = static_cast<double>(K[k]) / m - point.rho(k);
        const double d = bj * bk - point.gamma(j, k) / m;
        p4(j, k) += w * d * d * d * d;
      }
    }
  } while (advance_totals(K, top));
  if (fourth) *fourth = f4;
  if (pair_fourth) *pair_fourth = p4;
}

namespace {

void compositions_rec(int sites, long total, int cap, std::vector<int>& scratch,
                      std::vector<std::vector<int>>& out) {
  const int x = static_cast<int>(scratch.size());
  if (x == sites - 1) {
    if (total <= cap) {
      scratch.push_back(static_cast<int>(total));
      out.push_back(scratch);
      scratch.pop_back();
    }
    return;
  }
  const long lo = std::max(0L, total - static_cast<long>(cap) * (sites - 1 - x));
  const long hi = std::min(static_cast<long>(cap), total);
  for (long k = lo; k <= hi; ++k) {
    scratch.push_back(static_cast<int>(k));
    compositions_rec(sites, total - k, cap, scratch, out);
    scratch.pop_back();
  }
}

std::vector<std::vector<int>> compositions(int sites, long total, int cap) {
  std::vector<std::vector<int>> out;
  std::vector<int> scratch;
  compositions_rec(sites, total, cap, scratch, out);
  return out;
}

}  // namespace

std::vector<std::vector<int>> enumerate_block_states(
    int sites, int species, const std::vector<long>& totals, int cap,
    std::size_t max_states) {
  std::vector<std::vector<std::vector<int>>> per_species(species);
  std::size_t count = 1;
  for (int i = 0; i < species; ++i) {
    per_species[i] = compositions(sites, totals[i], cap);
    if (per_species[i].empty())
      throw std::runtime_error("enumerate_block_states: empty composition set");
    if (count > max_states / per_species[i].size() + 1)
      throw std::runtime_error("enumerate_block_states: state space too large");
    count *= per_species[i].size();
  }
  if (count > max_states)
    throw std::runtime_error("enumerate_block_states: state space too large");

  std::vector<std::vector<int>> out;
  out.reserve(count);
  std::vector<std::size_t> pick(species, 0);
  while (true) {
    std::vector<int> eta(static_cast<std::size_t>(sites) * species);
    for (int x = 0; x < sites; ++x)
      for (int i = 0; i < species; ++i)
        eta[static_cast<std::size_t>(x) * species + i] = per_species[i][pick[i]][x];
    out.push_back(std::move(eta));
    int i = species - 1;
    while (i >= 0 && ++pick[i] == per_species[i].size()) {
      pick[i] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

double spectral_gap(const RateModel& model, double alpha, double c_plus,
                    double c_minus, int ell, const std::vector<long>& totals,
                    std::size_t max_states) {
  if (!model.has_potential())
    throw std::invalid_argument(
        "spectral_gap needs a potential-based rate family");
  const int n = model.species();
  const int sites = 2 * ell + 1;
  if (static_cast<int>(totals.size()) != n)
    throw std::invalid_argument("spectral_gap: totals size mismatch");

  const auto states = enumerate_block_states(sites, n, totals, model.cap(),
                                             max_states);
  const int S = static_cast<int>(states.size());
  if (S < 2)
    throw std::runtime_error("spectral_gap: fewer than two canonical states");

  std::map<std::vector<int>, int> index;
  for (int a = 0; a < S; ++a) index.emplace(states[a], a);

  // Conditioned product weights pi propto exp(-sum_x V); the fugacity factor
  // is constant on fixed totals and drops out.
  Eigen::VectorXd logw(S);
  for (int a = 0; a < S; ++a) {
    double v = 0.0;
    for (int x = 0; x < sites; ++x)
      v += model.potential(states[a].data() + static_cast<std::size_t>(x) * n);
    logw(a) = -v;
  }
  logw.array() -= logw.maxCoeff();
  Eigen::VectorXd pi = logw.array().exp();
  pi /= pi.sum();

  // Unaccelerated symmetric weights on the open box: plain distances, no
  // truncation, no wrap.
  std::vector<double> s_of(sites);
  for (int d = 1; d < sites; ++d)
    s_of[d] = 0.5 * (c_plus + c_minus) / std::pow(static_cast<double>(d), 1.0 + alpha);

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(S, S);
  std::vector<int> dest;
  for (int a = 0; a < S; ++a) {
    double row = 0.0;
    for (int x = 0; x < sites; ++x) {
      const int* site = states[a].data() + static_cast<std::size_t>(x) * n;
      for (int i = 0; i < n; ++i) {
        if (site[i] == 0) continue;
        const double gi = model.rate(site, i);
        if (gi == 0.0) continue;
        for (int y = 0; y < sites; ++y) {
          if (y == x) continue;
          if (states[a][static_cast<std::size_t>(y) * n + i] >= model.cap())
            continue;
          dest = states[a];
          --dest[static_cast<std::size_t>(x) * n + i];
          ++dest[static_cast<std::size_t>(y) * n + i];
          const double w = gi * s_of[std::abs(y - x)];
          Q(a, index.at(dest)) += w;
          row += w;
        }
      }
    }
    Q(a, a) = -row;
  }

  // Similarity transform by sqrt(pi) makes the reversible generator
  // symmetric; symmetrize to clean roundoff and eigensolve.
  Eigen::VectorXd sq = pi.array().sqrt();
  Eigen::MatrixXd Sym(S, S);
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b) Sym(a, b) = Q(a, b) * sq(a) / sq(b);
  Sym = 0.5 * (Sym + Sym.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Sym);
  const auto& ev = solver.eigenvalues();  // ascending; top is ~0
  const double gap = -ev(S - 2);
  if (!(gap > 0.0))
    throw std::runtime_error("spectral_gap: generator is not ergodic");
  return 1.0 / gap;
}

}  // namespace zrp
