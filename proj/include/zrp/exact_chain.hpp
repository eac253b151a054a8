#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "zrp/kernel.hpp"
#include "zrp/rate_model.hpp"

namespace zrp {

// Description of a finite occupancy chain with conserved per-species totals.
// periodic = true reproduces the simulator exactly: one-sided weights p(z)
// truncated at floor(sites/2), displacements mod sites, optional sites^alpha
// acceleration, arrivals beyond the cap dropped.  periodic = false is the
// localized block: symmetrized untruncated weights |z|^{-1-alpha}, jumps only
// between sites inside [0, sites), no acceleration unless requested.
struct ChainSpec {
  RateModel model = RateModel::linear(1);
  int sites = 2;
  std::vector<long> totals;
  double alpha = 1.0;
  double c_plus = 0.5;
  double c_minus = 0.5;
  bool periodic = true;
  bool accelerate = true;
  std::size_t state_guard = 20000;
};

// Dense generator of the chain over the full canonical shell, exact canonical
// stationary law, and matrix-exponential marginals.  Tractable for a few
// thousand states; used as the ground-truth oracle for the simulator.
class ExactChain {
 public:
  explicit ExactChain(const ChainSpec& spec);

  int state_count() const { return static_cast<int>(states_.size()); }
  // site-major occupancy vectors, length sites * species
  const std::vector<std::vector<int>>& states() const { return states_; }
  int index_of(const std::vector<int>& counts) const;

  const Eigen::MatrixXd& generator() const { return q_; }

  // canonical Gibbs law prod_x exp(-V(eta(x))) normalized on the shell
  const Eigen::VectorXd& stationary() const { return pi_; }
  // left null vector of the generator, found numerically; independent of the
  // Gibbs formula
  Eigen::VectorXd stationary_numeric() const;

  // ||pi^T Q||_inf relative to the largest exit rate
  double global_balance_residual() const;
  // max |pi_a Q_ab - pi_b Q_ba| relative to the largest flux (zero only for
  // reversible chains, i.e. symmetrized kernels)
  double detailed_balance_residual() const;

  // marginal law at time t started from the pure state `start`
  Eigen::VectorXd law_from(int start, double t) const;

  // second eigenvalue magnitude of the symmetrized generator; meaningful for
  // reversible chains (checks detailed balance first)
  double spectral_gap() const;

 private:
  ChainSpec spec_;
  std::vector<std::vector<int>> states_;
  std::map<std::vector<int>, int> index_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd pi_;
};

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace zrp
