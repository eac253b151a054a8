#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "zrp/alias_table.hpp"
#include "zrp/rate_model.hpp"
#include "zrp/rng.hpp"

namespace zrp {

// Fully resolved single-site equilibrium data at one density.
struct DensityPoint {
  Eigen::VectorXd rho;     // mean occupancy per species
  Eigen::VectorXd mu;      // chemical potentials
  Eigen::VectorXd g_mean;  // expected jump rates
  Eigen::MatrixXd gamma;   // static single-site covariance, symmetric PD
  Eigen::MatrixXd lambda;  // d(expected rate)_i / d rho_j
  double log_z = 0.0;
  double tail_mass = 0.0;  // estimated probability mass beyond the cap
};

// Product-measure family on a single site:
//   P(k) = exp(-V(k) + mu.k) / Z(mu)
// over the capped occupancy space.  All moments are exact sums over the
// enumerated states.
class Ensemble {
 public:
  explicit Ensemble(RateModel model, double tail_threshold = 1e-10);

  const RateModel& model() const { return model_; }
  int species() const { return model_.species(); }
  const std::vector<Occupancy>& site_states() const { return states_; }

  double log_partition(const Eigen::VectorXd& mu) const;
  std::vector<double> site_probabilities(const Eigen::VectorXd& mu) const;

  Eigen::VectorXd density(const Eigen::VectorXd& mu) const;
  Eigen::MatrixXd covariance(const Eigen::VectorXd& mu) const;
  Eigen::VectorXd rate_mean(const Eigen::VectorXd& mu) const;
  // Cov(g_i(k), k_j); equals diag(rate_mean) up to cap truncation by the
  // single-site shift identity.
  Eigen::MatrixXd rate_site_cov(const Eigen::VectorXd& mu) const;

  // Probability mass the cap discards, estimated against a raised cap.
  double tail_mass(const Eigen::VectorXd& mu) const;
  double tail_threshold() const { return tail_threshold_; }

  DensityPoint at_mu(const Eigen::VectorXd& mu) const;
  // Newton inversion of the density map with the exact covariance Jacobian;
  // terminates at sup-norm residual < 1e-12, throws after 100 iterations.
  DensityPoint at_density(const Eigen::VectorXd& rho) const;

  // d(expected rate)/d(rho) by central differences with re-inversion.
  Eigen::MatrixXd lambda_fd(const Eigen::VectorXd& rho, double step = 1e-4) const;
  // lambda via the covariance chain rule Cov(g, k) Gamma^{-1}; independent of
  // the fugacity identity used for DensityPoint::lambda.
  Eigen::MatrixXd lambda_cov_route(const Eigen::VectorXd& mu) const;
  // tensor T[i](j,k) = d^2 (expected rate)_i / d rho_j d rho_k
  std::vector<Eigen::MatrixXd> rate_second_derivatives(
      const Eigen::VectorXd& rho, double step = 1e-4) const;

  // E[f] under the product measure on a window of 2*radius+1 sites; f sees
  // the window as site-major occupancies.  Throws if the enumeration exceeds
  // the guard.
  double expectation_local(
      const Eigen::VectorXd& mu,
      const std::function<double(const std::vector<Occupancy>&)>& f, int radius,
      std::size_t guard = 10000000) const;

 private:
  RateModel model_;
  double tail_threshold_;
  std::vector<Occupancy> states_;
  Eigen::MatrixXd counts_;        // #states x n
  Eigen::VectorXd neg_potential_; // -V(k)
  Eigen::MatrixXd rates_;         // #states x n, g_i(k)
};

// O(1) i.i.d. site sampler at fixed chemical potential.
class SiteSampler {
 public:
  SiteSampler(const Ensemble& ensemble, const Eigen::VectorXd& mu);
  int draw_index(Rng& rng) const { return alias_.sample(rng); }
  const Occupancy& draw(Rng& rng) const { return (*states_)[draw_index(rng)]; }

 private:
  const std::vector<Occupancy>* states_;
  AliasTable alias_;
};

struct FrameSearchResult {
  DensityPoint point;
  double off_diag_max = 0.0;
  double diag_spread = 0.0;
  bool satisfied = false;  // both indicators below tolerance
};

// Search the density box for a point where the rate Jacobian is scalar
// (vanishing off-diagonals, equal diagonals).  Coarse grid scan followed by
// Nelder-Mead refinement; reports the best point found either way, since for
// genuinely coupled rates the off-diagonals need not vanish anywhere.
FrameSearchResult find_frame_density(const Ensemble& ensemble,
                                     const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi,
                                     double tol = 1e-8);

}  // namespace zrp
