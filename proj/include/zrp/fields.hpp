#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "zrp/configuration.hpp"
#include "zrp/kernel.hpp"
#include "zrp/kmc.hpp"
#include "zrp/operators.hpp"
#include "zrp/rate_model.hpp"
#include "zrp/test_function.hpp"

namespace zrp {

// Moving observation frame.  Test functions are evaluated at u - delta(t)
// with delta(t) = lambda * m_N * t / N; m_N is the kernel's frame constant,
// so the frame is static whenever that constant vanishes.
struct FieldFrame {
  double speed = 0.0;  // d delta / dt

  double delta(double t) const { return speed * t; }
  bool moving() const { return speed != 0.0; }

  static FieldFrame fixed() { return {}; }
  static FieldFrame drifting(const JumpKernel& kernel, double lambda) {
    return {lambda * kernel.frame_constant() / kernel.lattice()};
  }
};

// (1/sqrt N) sum_x (eta^i(x) - rho) H(x/N - delta)
double fluctuation_field(const Configuration& eta, int species, double rho,
                         const TestFunction& h, double delta = 0.0);

// Windowed mean over the 2 ell + 1 sites centred at x, with torus wrap.
double block_average(const Configuration& eta, int species, int x, int ell);
double centered_block_average(const Configuration& eta, int species, int x,
                              int ell, double rho);

// Fourier multiplier picked up by the symmetric block average:
//   sum_x bar-eta^{(ell)}(x) e^{2 pi i k x / N}
//     = block_kernel_factor(N, ell, k) * sum_x bar-eta(x) e^{2 pi i k x / N}.
double block_kernel_factor(int N, int ell, int k);

// Expected pathwise quadratic-variation rate of the species field under the
// product measure at rate mean g_mean:
//   g_mean * N^{alpha-1} * sum_x sum_z p(z) (H((x+z)/N) - H(x/N))^2.
double expected_qv_rate(const JumpKernel& kernel, const TestFunction& h,
                        double g_mean);

// Running Fourier modes, k = 0..K, of the centred occupation numbers
//   D^j_k = sum_x (eta^j(x) - rho_j) e^{2 pi i k x / N}
// and of arbitrary per-site channel functions
//   F^c_k = sum_x f_c(eta(x)) e^{2 pi i k x / N}.
// Channel sums are stored uncentred; the channel mean enters only through the
// k = 0 accessor.  A jump costs O(K) per changed occupation plus O(cK) per
// changed site for the channels.  refresh() recomputes everything from the
// configuration and records the largest discrepancy seen, bounding the
// accumulated floating-point drift of the incremental updates.
class ModeTracker {
 public:
  using SiteFunction = std::function<double(const int*)>;

  ModeTracker(int lattice, int species, int max_mode, Eigen::VectorXd rho,
              std::vector<SiteFunction> channels, Eigen::VectorXd channel_mean);

  void init(const Configuration& eta);
  void apply_jump(int x, int y, int species, const Configuration& after);
  double refresh(const Configuration& eta);

  int lattice() const { return n_sites_; }
  int species() const { return n_species_; }
  int channel_count() const { return static_cast<int>(channels_.size()); }
  int max_mode() const { return max_mode_; }
  double max_drift() const { return drift_; }

  // centred occupation mode; exact for k = 0 since jumps conserve species
  std::complex<double> occupation_mode(int j, int k) const {
    return d_[j * (max_mode_ + 1) + k];
  }
  // channel mode, centred at k = 0 by the supplied channel mean
  std::complex<double> channel_mode(int c, int k) const {
    std::complex<double> v = f_[c * (max_mode_ + 1) + k];
    if (k == 0) v -= static_cast<double>(n_sites_) * channel_mean_[c];
    return v;
  }
  // e^{2 pi i k x / N}, k = 0..K
  const std::complex<double>* unit_roots(int x) const {
    return roots_.data() + static_cast<std::size_t>(x) * (max_mode_ + 1);
  }

 private:
  void recompute(const Configuration& eta, std::vector<std::complex<double>>& d,
                 std::vector<std::complex<double>>& f,
                 std::vector<double>& cache) const;

  int n_sites_, n_species_, max_mode_;
  Eigen::VectorXd rho_, channel_mean_;
  std::vector<SiteFunction> channels_;
  std::vector<std::complex<double>> roots_;  // x-major, K+1 per site
  std::vector<std::complex<double>> d_;      // species-major
  std::vector<std::complex<double>> f_;      // channel-major
  std::vector<double> cache_;                // site-major channel values
  double drift_ = 0.0;
};

// Grid snapshots of the field and the pieces of its drift/martingale split.
struct DecompositionPath {
  std::vector<double> y;      // field value
  std::vector<double> a;      // local-residual drift integral
  std::vector<double> b;      // linear drift integral
  std::vector<double> drift;  // directly accumulated total drift integral
  std::vector<double> qv;     // running sum of squared field jumps
};

struct DecompositionSettings {
  TestFunction h;
  Eigen::VectorXd rho;     // centring densities
  Eigen::VectorXd g_mean;  // expected jump rates at rho
  Eigen::MatrixXd lambda;  // rate jacobian d g_mean_i / d rho_j
  FieldFrame frame;
  bool refresh_at_grid = true;
};

// Observer computing, exactly between events, the Dynkin split of the
// fluctuation field Y^i_t(H_t):
//
//   A^i_t = int_0^t (1/sqrt N) sum_x tau_x V^i(eta_s) (U_N H_s)(x/N) ds,
//     with V^i = g_i - g_mean_i - sum_j lambda_ij (eta^j(0) - rho_j)
//     and U_N the accelerated truncated jump operator,
//   B^i_t = the remaining drift, linear in the occupations (including the
//     frame derivative term when the frame moves),
//   M^i_t = Y_t - Y_0 - A_t - B_t,  a martingale,
//
// plus the pathwise quadratic variation sum (Delta Y)^2 and an independently
// accumulated total drift for an exact A + B closure cross-check.  Working in
// mode space makes every interval integral closed-form; with a moving frame
// the per-interval phase integral uses the sinc form, which is stable for
// arbitrarily small intervals.
class DecompositionObserver : public Observer {
 public:
  DecompositionObserver(const RateModel& model, const JumpKernel& kernel,
                        DecompositionSettings settings);

  void begin(double t, const Configuration& eta) override;
  void on_interval(double t0, double t1, const Configuration& eta) override;
  void on_jump(double t, int x, int y, long z, int species,
               const Configuration& after) override;
  void at_grid(long index, double t, const Configuration& eta) override;

  int species_count() const { return n_species_; }
  const std::vector<double>& grid_times() const { return times_; }
  const DecompositionPath& path(int i) const { return paths_[i]; }

  double initial_field(int i) const { return y0_[i]; }
  double field(int i, double t) const;  // assembled from current modes
  double a_term(int i) const { return a_[i]; }
  double b_term(int i) const { return b_[i]; }
  double drift_integral(int i) const { return drift_[i]; }
  double quadratic_variation(int i) const { return qv_[i]; }
  double jump_sum(int i) const { return jump_sum_[i]; }
  double frame_drift(int i) const { return frame_drift_[i]; }
  double martingale(int i, double t) const {
    return field(i, t) - y0_[i] - a_[i] - b_[i];
  }
  double max_jump() const { return max_jump_; }
  double tracker_drift() const { return tracker_.max_drift(); }

 private:
  void integrate(double t0, double t1);

  int n_sites_, n_species_, max_mode_;
  DecompositionSettings s_;
  ModeTracker tracker_;
  double inv_sqrt_n_;
  std::vector<std::complex<double>> psi_;     // truncated jump symbol per mode
  std::vector<std::complex<double>> c2_;      // 2 c_k / sqrt N  (c2_[0] = c_0 / sqrt N)
  std::vector<std::complex<double>> c2psi_;   // c2_k psi_k
  std::vector<double> theta_;                 // 2 pi k * frame speed
  std::vector<double> h_table_;               // H(x/N), static-frame jump fast path
  std::vector<double> a_, b_, drift_, frame_drift_, qv_, jump_sum_, y0_;
  double max_jump_ = 0.0;
  std::vector<double> times_;
  std::vector<DecompositionPath> paths_;
};

struct BgSettings {
  TestFunction h;
  Eigen::VectorXd rho;
  std::vector<ModeTracker::SiteFunction> f;  // local single-site channels
  Eigen::VectorXd f_mean;                    // channel means at rho
  Eigen::MatrixXd f_gradient;                // d f_mean_c / d rho_j
  std::vector<int> ells;                     // block half-widths, tracked together
  FieldFrame frame;
  bool refresh_at_grid = true;
};

// First-order block-replacement residual, accumulated exactly between events
// for several block radii at once:
//
//   I^{c,ell}_t = int_0^t sum_x [ tau_x f_c(eta_s) - f_mean_c
//                   - sum_j grad_cj bar-eta^{j,(ell)}_s(x) ] H_s(x/N) ds.
//
// sup_square_raw reports the largest I^2 over grid times seen so far;
// sup_square_field divides the integrand by sqrt N first (the fluctuation-
// field normalization) and sup_square_density by N (the empirical-density
// pairing, under which the optimal-radius residual decays in N).
class BgObserver : public Observer {
 public:
  BgObserver(const JumpKernel& kernel, BgSettings settings);

  void begin(double t, const Configuration& eta) override;
  void on_interval(double t0, double t1, const Configuration& eta) override;
  void on_jump(double t, int x, int y, long z, int species,
               const Configuration& after) override;
  void at_grid(long index, double t, const Configuration& eta) override;

  int channel_count() const { return static_cast<int>(s_.f.size()); }
  int radius_count() const { return static_cast<int>(s_.ells.size()); }
  const std::vector<double>& grid_times() const { return times_; }

  double residual(int c, int ell_index) const {
    return integral_[c * radius_count() + ell_index];
  }
  double sup_square_raw(int c, int ell_index) const {
    return sup_sq_[c * radius_count() + ell_index];
  }
  double sup_square_field(int c, int ell_index) const {
    return sup_square_raw(c, ell_index) / n_sites_;
  }
  double sup_square_density(int c, int ell_index) const {
    return sup_square_raw(c, ell_index) /
           (static_cast<double>(n_sites_) * n_sites_);
  }
  const std::vector<double>& path(int c, int ell_index) const {
    return paths_[c * radius_count() + ell_index];
  }
  double tracker_drift() const { return tracker_.max_drift(); }

 private:
  void integrate(double t0, double t1);

  int n_sites_, max_mode_;
  BgSettings s_;
  ModeTracker tracker_;
  std::vector<double> kfac_;  // radius-major block kernel factors per mode
  std::vector<std::complex<double>> c2_;
  std::vector<double> theta_;
  std::vector<double> integral_, sup_sq_;
  std::vector<double> times_;
  std::vector<std::vector<double>> paths_;
};

struct SecondOrderBgSettings {
  TestFunction h;
  Eigen::VectorXd rho;
  std::vector<ModeTracker::SiteFunction> f;  // channels; mean and gradient at
  Eigen::VectorXd f_mean;                    // rho must both vanish for the
  std::vector<Eigen::MatrixXd> d2;           // expansion to apply (mean is
  Eigen::MatrixXd gamma;                     // still subtracted for safety)
  int ell = 1;
  FieldFrame frame;
  bool refresh_at_grid = true;
};

// Second-order residual at a single block radius:
//
//   I^{c}_t = int_0^t sum_x [ tau_x f_c - f_mean_c - q^c(x) ] H_s(x/N) ds,
//   q^c(x)  = (1/2) sum_{j,k} d2[c](j,k)
//               { bar-eta^{j,(ell)}(x) bar-eta^{k,(ell)}(x) - Gamma_jk/(2ell+1) }.
//
// The quadratic field's Fourier modes are maintained incrementally: a jump
// changes the block averages on 2(2 ell + 1) sites, so the update costs
// O(ell (n + K)) per channel.
class SecondOrderBgObserver : public Observer {
 public:
  SecondOrderBgObserver(const JumpKernel& kernel, SecondOrderBgSettings settings);

  void begin(double t, const Configuration& eta) override;
  void on_interval(double t0, double t1, const Configuration& eta) override;
  void on_jump(double t, int x, int y, long z, int species,
               const Configuration& after) override;
  void at_grid(long index, double t, const Configuration& eta) override;

  int channel_count() const { return static_cast<int>(s_.f.size()); }
  const std::vector<double>& grid_times() const { return times_; }
  double residual(int c) const { return integral_[c]; }
  double sup_square_raw(int c) const { return sup_sq_[c]; }
  double sup_square_field(int c) const { return sup_sq_[c] / n_sites_; }
  double sup_square_density(int c) const {
    return sup_sq_[c] / (static_cast<double>(n_sites_) * n_sites_);
  }
  const std::vector<double>& path(int c) const { return paths_[c]; }
  double tracker_drift() const { return tracker_.max_drift(); }
  double quad_drift() const { return quad_drift_; }

 private:
  void integrate(double t0, double t1);
  void shift_site(int site, int species, int delta);
  void rebuild_quadratic(const Configuration& eta);
  std::complex<double> residual_mode(int c, int k) const;

  int n_sites_, n_species_, max_mode_;
  SecondOrderBgSettings s_;
  ModeTracker tracker_;
  double window_;                          // 2 ell + 1
  std::vector<int> block_counts_;          // species-major running block sums
  std::vector<std::complex<double>> qhat_; // channel-major quadratic modes
  std::vector<std::complex<double>> c2_;
  std::vector<double> theta_;
  std::vector<double> integral_, sup_sq_;
  std::vector<double> times_;
  std::vector<std::vector<double>> paths_;
  double quad_drift_ = 0.0;
};

struct EnergySettings {
  TestFunction h;
  Eigen::VectorXd rho;
  std::vector<Eigen::MatrixXd> d2;  // per species i: d^2 g_mean_i / d rho^2
  std::vector<int> widths;          // block half-widths w, one per window scale
  FieldFrame frame;
};

// Quadratic (Burgers-drift) functional per species i and window half-width w:
//
//   E^{i,w}_t = sum_{j,k} d2[i](j,k)
//                 int_0^t sum_x bar-eta^{j,(w)}_s(x) bar-eta^{k,(w)}_s(x)
//                         H'(x/N - delta(s)) ds,
//
// integrated with the trapezoid rule on the observation grid -- the one
// estimator here that is grid-discretized rather than event-exact; the grid
// bias is common to all window scales, which is what the Cauchy differences
// compare.  All windows are evaluated on the same trajectory.
class EnergyObserver : public Observer {
 public:
  EnergyObserver(const JumpKernel& kernel, EnergySettings settings);

  void begin(double t, const Configuration& eta) override;
  void at_grid(long index, double t, const Configuration& eta) override;

  int species_count() const { return n_species_; }
  int width_count() const { return static_cast<int>(s_.widths.size()); }
  const std::vector<double>& grid_times() const { return times_; }

  double integral(int i, int w_index) const {
    return integral_[i * width_count() + w_index];
  }
  // largest (E^{i,w}_t - E^{i,w'}_t)^2 over grid times for the adjacent
  // window pair (w_index, w_index + 1)
  double sup_pair_diff_sq(int i, int pair_index) const {
    return sup_pair_[i * (width_count() - 1) + pair_index];
  }
  const std::vector<double>& path(int i, int w_index) const {
    return paths_[i * width_count() + w_index];
  }

 private:
  void evaluate(const Configuration& eta, double t, std::vector<double>& out);
  void advance(double t, const Configuration& eta);

  int n_sites_, n_species_;
  EnergySettings s_;
  TestFunction h_prime_;
  std::vector<double> hp_table_;  // H'(x/N), reused while the frame is static
  std::vector<double> integral_, sup_pair_, f_prev_, f_now_;
  std::vector<long> prefix_;  // scratch, species-major circular prefix sums
  double t_prev_ = 0.0;
  std::vector<double> times_;
  std::vector<std::vector<double>> paths_;
};

}  // namespace zrp
