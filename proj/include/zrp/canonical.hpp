#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "zrp/ensemble.hpp"
#include "zrp/rate_model.hpp"

namespace zrp {

// Grand-canonical mean of a single-site observable and its density
// derivatives, the latter by central differences with the chemical potential
// re-solved at every probe density.
double single_site_mean(const Ensemble& ensemble, const Eigen::VectorXd& mu,
                        const std::function<double(const int*)>& f);
Eigen::VectorXd single_site_gradient(const Ensemble& ensemble,
                                     const Eigen::VectorXd& rho,
                                     const std::function<double(const int*)>& f,
                                     double step = 1e-4);
Eigen::MatrixXd single_site_hessian(const Ensemble& ensemble,
                                    const Eigen::VectorXd& rho,
                                    const std::function<double(const int*)>& f,
                                    double step = 1e-4);

// Joint law of the per-species particle totals over m i.i.d. sites, by
// repeated convolution of the single-site law.  Entry index is
// sum_i K_i * stride(i) with stride(n-1) = 1 and extent m*cap+1 per species.
struct BlockTotalLaw {
  int sites = 0;
  int species = 0;
  int extent = 0;  // per-species axis length, sites*cap + 1
  std::vector<double> p;

  std::size_t index(const std::vector<long>& totals) const {
    std::size_t idx = 0;
    for (int i = 0; i < species; ++i)
      idx = idx * extent + static_cast<std::size_t>(totals[i]);
    return idx;
  }
};

BlockTotalLaw block_total_law(const Ensemble& ensemble,
                              const Eigen::VectorXd& mu, int sites,
                              std::size_t guard = 20000000);

// Exact single-box comparison of the canonical conditional expectation with
// its linear and quadratic grand-canonical projections:
//
//   first  = || E[f - f_mean | block totals] - sum_j grad_j bar-eta^{j,(ell)} ||^2_{L4}
//   second = || same - (1/2) sum_{j,k} hess_jk { bar^j bar^k - Gamma_jk/(2ell+1) } ||^2_{L4}
//
// with bar-eta^{j,(ell)} = K_j/(2ell+1) - rho_j.  The references carry the
// expected ell^{-2} and ell^{-3} scalings times the squared L5 norm of the
// centred observable.  The quadratic comparison keeps the Taylor 1/2 and is
// the displayed second-order projection whenever the gradient vanishes.
struct EquivalenceCheck {
  int ell = 0;
  double f_mean = 0.0;
  Eigen::VectorXd f_gradient;
  Eigen::MatrixXd f_hessian;
  double first_norm_sq = 0.0;
  double second_norm_sq = 0.0;
  double f_l5_sq = 0.0;
  double first_reference = 0.0;   // ell^{-2} * f_l5_sq
  double second_reference = 0.0;  // ell^{-3} * f_l5_sq
};

EquivalenceCheck equivalence_of_ensembles_check(
    const Ensemble& ensemble, const DensityPoint& point,
    const std::function<double(const int*)>& f, int ell,
    std::size_t guard = 20000000);

// Exact fourth moments of the centred block averages under the product
// measure: fourth[j] = E[(bar-eta^{j,(ell)})^4] and
// pair_fourth(j,k) = E[(bar^j bar^k - Gamma_jk/(2ell+1))^4].
void block_moment_table(const Ensemble& ensemble, const DensityPoint& point,
                        int ell, Eigen::VectorXd* fourth,
                        Eigen::MatrixXd* pair_fourth);

// W(k, ell): reciprocal of the spectral gap of the negative symmetrized
// zero range generator on the open box of 2 ell + 1 sites with fixed
// per-species totals.  Jump weights are the untruncated symmetric kernel
// s(z) = (c_plus + c_minus) / (2 |z|^{1+alpha}) between every pair of box
// sites; rates are unaccelerated.  The conditioned product measure is
// reversible, so the gap comes from a dense symmetric eigensolve of the
// similarity-transformed generator.  Requires a potential-based rate family.
double spectral_gap(const RateModel& model, double alpha, double c_plus,
                    double c_minus, int ell, const std::vector<long>& totals,
                    std::size_t max_states = 20000);

// All site-major occupancy arrays on `sites` sites with the given per-species
// totals, entries capped per site; throws past max_states.
std::vector<std::vector<int>> enumerate_block_states(
    int sites, int species, const std::vector<long>& totals, int cap,
    std::size_t max_states = 20000);

}  // namespace zrp
