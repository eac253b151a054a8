#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "zrp/ensemble.hpp"
#include "zrp/kernel.hpp"
#include "zrp/rng.hpp"
#include "zrp/test_function.hpp"

namespace zrp {

// Limiting fluctuation process, simulated mode by mode.  Modes are measured
// against e^{+2 pi i k u}, matching the lattice mode sums, so a real field
// pairs as Y(H) = sum_{k>=1} 2 Re(c_k Z_k); mode 0 is pinned to zero
// (conserved total mass on the torus).  Per mode the state solves
//   dZ_k = psi_k * coupling * Z_k dt + noise,
// with psi_k the generator symbol and coupling the rate Jacobian at the
// reference density.  The noise amplitude is calibrated so the stationary
// mode covariance is (noise_factor/2) * Gamma: the fugacity identity
// coupling * Gamma = diag(mean rates) makes
//   A_k Gamma + Gamma A_k^H = 2 Re(psi_k) diag(mean rates),
// so noise_factor = 2 is exactly the fluctuation-dissipation calibration
// (stationary covariance Gamma) and noise_factor = 4 doubles it (the literal
// noise-coefficient reading, kept behind this flag for comparison runs).
struct OUSpec {
  Eigen::MatrixXd coupling;  // n x n rate Jacobian (diagonal in the frame case)
  Eigen::MatrixXd gamma;     // stationary single-site covariance
  std::vector<std::complex<double>> symbols;  // symbols[k-1] = psi_k, k = 1..K
  double noise_factor = 2.0;

  int species() const { return static_cast<int>(coupling.rows()); }
  int max_mode() const { return static_cast<int>(symbols.size()); }

  Eigen::MatrixXcd mode_drift(int k) const;  // psi_k * coupling
  // exact stationary-increment calibration: (factor/2) * |2 Re psi_k| * sym(coupling*Gamma)
  Eigen::MatrixXd mode_noise(int k) const;
  bool stable() const;  // Re(eigenvalues of mode_drift) < 0 for every mode
};

// Symbol tables: the lattice-matched truncated symbol (with the frame
// correction when frame_adjusted) or the continuum limit symbol.
OUSpec ou_spec_discrete(const DensityPoint& point, const JumpKernel& kernel,
                        int max_mode, bool frame_adjusted,
                        double noise_factor = 2.0);
OUSpec ou_spec_continuum(const DensityPoint& point, double alpha,
                         double c_plus, double c_minus, int max_mode,
                         double noise_factor = 2.0);

// Solves A S + S A^H + R = 0 for mode k by a dense Kronecker system;
// independent verification target for the closed-form (factor/2) * Gamma.
Eigen::MatrixXcd stationary_mode_covariance(const OUSpec& spec, int k);

// E[Y^i_{t+lag}(H) Y^j_t(G)] at stationarity:
//   sum_{k>=1} 2 Re( H_k conj(G_k) [exp(lag * A_k) Gamma_stat]_{ij} ),
// returned as the full species matrix.  H and G should be mean-zero (mode 0
// carries no dynamics).
Eigen::MatrixXd ou_autocorrelation(const OUSpec& spec, const TestFunction& h,
                                   const TestFunction& g, double lag);

// Exact per-mode exponential integrator: propagator exp(dt A_k), additive
// proper complex Gaussian with covariance (factor/2)(Gamma - E Gamma E^H).
class OUProcess {
 public:
  explicit OUProcess(OUSpec spec);

  const OUSpec& spec() const { return spec_; }
  int species() const { return spec_.species(); }
  int max_mode() const { return spec_.max_mode(); }

  void init_zero();
  void init_stationary(Rng& rng);
  void step(double dt, Rng& rng);

  const Eigen::VectorXcd& mode(int k) const { return z_[k - 1]; }
  Eigen::VectorXcd& mode(int k) { return z_[k - 1]; }
  double field(const TestFunction& h, int i) const;

 private:
  struct ModeOp {
    Eigen::MatrixXcd prop;
    Eigen::MatrixXcd noise_sqrt;
  };
  void build_ops(double dt);
  Eigen::VectorXcd draw_proper(int n, Rng& rng) const;

  OUSpec spec_;
  Eigen::MatrixXd gamma_stat_;       // (factor/2) * Gamma
  Eigen::MatrixXd gamma_stat_sqrt_;  // real Cholesky factor
  std::vector<Eigen::VectorXcd> z_;
  std::vector<ModeOp> ops_;
  double ops_dt_ = -1.0;

  friend class BurgersProcess;
};

// Quadratic extension: per-species coefficient matrices quad[i](j,k)
// multiplying grad(Y^j Y^k); products are evaluated on a physical grid wide
// enough that retained modes are alias-free (the 2/3 rule; grid 0 means 4K).
struct BurgersSpec {
  OUSpec ou;
  std::vector<Eigen::MatrixXd> quad;
  int grid = 0;
  double blowup_factor = 10.0;
};

// Strang splitting: exact OU half-steps around an explicit Euler update with
// the dealiased nonlinearity.  With all quadratic coefficients zero the step
// reduces to a single exact OU step, consuming the identical rng draws.
class BurgersProcess {
 public:
  explicit BurgersProcess(BurgersSpec spec);

  const BurgersSpec& spec() const { return spec_; }
  OUProcess& linear_part() { return ou_; }
  const OUProcess& linear_part() const { return ou_; }

  void init_zero() { ou_.init_zero(); }
  void init_stationary(Rng& rng) { ou_.init_stationary(rng); }
  // throws std::runtime_error on norm growth beyond blowup_factor times the
  // stationary scale
  void step(double dt, Rng& rng);

  const Eigen::VectorXcd& mode(int k) const { return ou_.mode(k); }
  double field(const TestFunction& h, int i) const { return ou_.field(h, i); }

 private:
  void add_nonlinearity(double dt);

  BurgersSpec spec_;
  OUProcess ou_;
  bool pure_linear_ = false;
  int grid_ = 0;
  double stationary_scale_sq_ = 0.0;
  std::vector<std::complex<double>> roots_;  // e^{2 pi i k g / M}
  // scratch
  Eigen::MatrixXd values_;   // species x grid
  Eigen::MatrixXd product_;  // species x grid
};

}  // namespace zrp
