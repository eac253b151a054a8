#include "zrp/exact_chain.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace zrp {
namespace {

// all ways to place `total` particles on `sites` sites
void compositions(long total, int sites, std::vector<int>& prefix,
                  std::vector<std::vector<int>>& out, int cap) {
  if (sites == 1) {
    if (total <= cap) {
      prefix.push_back(static_cast<int>(total));
      out.push_back(prefix);
      prefix.pop_back();
    }
    return;
  }
  for (long k = 0; k <= std::min<long>(total, cap); ++k) {
    prefix.push_back(static_cast<int>(k));
    compositions(total - k, sites - 1, prefix, out, cap);
    prefix.pop_back();
  }
}

}  // namespace

ExactChain::ExactChain(const ChainSpec& spec) : spec_(spec) {
  const int N = spec.sites;
  const int n = spec.model.species();
  if (static_cast<int>(spec.totals.size()) != n)
    throw std::invalid_argument("ExactChain: totals size != species");
  if (!spec.model.has_potential())
    throw std::invalid_argument("ExactChain: model needs a potential");

  // cartesian product of per-species particle placements
  std::vector<std::vector<std::vector<int>>> per_species(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> prefix;
    compositions(spec.totals[i], N, prefix, per_species[i], spec.model.cap());
    if (per_species[i].empty())
      throw std::invalid_argument("ExactChain: no states (cap too low?)");
  }
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    std::vector<int> counts(static_cast<std::size_t>(N) * n);
    for (int x = 0; x < N; ++x)
      for (int i = 0; i < n; ++i)
        counts[static_cast<std::size_t>(x) * n + i] = per_species[i][pick[i]][x];
    states_.push_back(std::move(counts));
    if (states_.size() > spec.state_guard)
      throw std::runtime_error("ExactChain: state space exceeds guard");
    int d = n - 1;
    while (d >= 0 && ++pick[d] == per_species[d].size()) pick[d--] = 0;
    if (d < 0) break;
  }
  for (std::size_t a = 0; a < states_.size(); ++a)
    index_[states_[a]] = static_cast<int>(a);

  // jump weights: truncated one-sided table on the ring, untruncated
  // symmetrized power law on the open block
  double scale = spec.accelerate ? std::pow(N, spec.alpha) : 1.0;
  JumpKernel ring(spec.alpha, spec.c_plus, spec.c_minus, N);

  auto weight = [&](long z) {
    if (spec.periodic) return ring.p(z);
    return 0.5 * (spec.c_plus + spec.c_minus) *
           std::pow(static_cast<double>(z < 0 ? -z : z), -1.0 - spec.alpha);
  };

  const int S = state_count();
  q_ = Eigen::MatrixXd::Zero(S, S);
  std::vector<int> scratch;
  for (int a = 0; a < S; ++a) {
    const std::vector<int>& st = states_[a];
    for (int x = 0; x < N; ++x) {
      const int* site = st.data() + static_cast<std::size_t>(x) * n;
      for (int i = 0; i < n; ++i) {
        if (site[i] == 0) continue;
        double g = spec.model.rate(site, i);
        if (g == 0.0) continue;
        long zlo = spec.periodic ? -ring.radius() : -(N - 1);
        long zhi = spec.periodic ? ring.radius() : (N - 1);
        for (long z = zlo; z <= zhi; ++z) {
          if (z == 0) continue;
          long yl = x + z;
          if (spec.periodic)
            yl = ((yl % N) + N) % N;
          else if (yl < 0 || yl >= N)
            continue;
          int y = static_cast<int>(yl);
          std::size_t ty = static_cast<std::size_t>(y) * n + i;
          if (st[ty] >= spec.model.cap()) continue;  // arrival dropped
          scratch = st;
          scratch[static_cast<std::size_t>(x) * n + i] -= 1;
          scratch[ty] += 1;
          auto it = index_.find(scratch);
          if (it == index_.end())
            throw std::logic_error("ExactChain: target state missing");
          double r = scale * weight(z) * g;
          q_(a, it->second) += r;
          q_(a, a) -= r;
        }
      }
    }
  }

  // canonical Gibbs law on the shell
  Eigen::VectorXd logw(S);
  for (int a = 0; a < S; ++a) {
    double lw = 0.0;
    for (int x = 0; x < N; ++x)
      lw -= spec.model.potential(states_[a].data() +
                                 static_cast<std::size_t>(x) * n);
    logw(a) = lw;
  }
  double m = logw.maxCoeff();
  pi_ = (logw.array() - m).exp();
  pi_ /= pi_.sum();
}

int ExactChain::index_of(const std::vector<int>& counts) const {
  auto it = index_.find(counts);
  if (it == index_.end())
    throw std::invalid_argument("ExactChain: state not on the shell");
  return it->second;
}

Eigen::VectorXd ExactChain::stationary_numeric() const {
  // smallest-singular-vector of Q^T: the left null vector
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      q_.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd v = svd.matrixV().col(q_.rows() - 1);
  if (v.sum() < 0) v = -v;
  if (v.minCoeff() < -1e-9 * v.maxCoeff())
    throw std::runtime_error("stationary_numeric: negative entries");
  return v / v.sum();
}

double ExactChain::global_balance_residual() const {
  double num = (pi_.transpose() * q_).cwiseAbs().maxCoeff();
  double den = q_.diagonal().cwiseAbs().maxCoeff();
  return num / den;
}

double ExactChain::detailed_balance_residual() const {
  double worst = 0.0, flux = 0.0;
  for (int a = 0; a < q_.rows(); ++a)
    for (int b = a + 1; b < q_.cols(); ++b) {
      double fab = pi_(a) * q_(a, b), fba = pi_(b) * q_(b, a);
      worst = std::max(worst, std::fabs(fab - fba));
      flux = std::max({flux, std::fabs(fab), std::fabs(fba)});
    }
  return flux > 0 ? worst / flux : 0.0;
}

Eigen::VectorXd ExactChain::law_from(int start, double t) const {
  Eigen::MatrixXd pt = (t * q_).exp();
  return pt.row(start).transpose();
}

double ExactChain::spectral_gap() const {
  if (detailed_balance_residual() > 1e-8)
    throw std::runtime_error("spectral_gap: chain is not reversible");
  // symmetrize: D^{ 1/2} Q D^{-1/2} with D = diag(pi)
  Eigen::ArrayXd rt = pi_.array().sqrt();
  Eigen::MatrixXd s = q_;
  for (int a = 0; a < s.rows(); ++a)
    for (int b = 0; b < s.cols(); ++b) s(a, b) *= rt(a) / rt(b);
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const auto& ev = es.eigenvalues();  // ascending, top one ~ 0
  return -ev(ev.size() - 2);
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

}  // namespace zrp
