#include "zrp/ou.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "zrp/operators.hpp"

namespace zrp {

Eigen::MatrixXcd OUSpec::mode_drift(int k) const {
  if (k < 1 || k > max_mode()) throw std::out_of_range("mode_drift");
  return symbols[k - 1] * coupling.cast<std::complex<double>>();
}

Eigen::MatrixXd OUSpec::mode_noise(int k) const {
  if (k < 1 || k > max_mode()) throw std::out_of_range("mode_noise");
  Eigen::MatrixXd cg = coupling * gamma;
  Eigen::MatrixXd sym = 0.5 * (cg + cg.transpose());
  return -noise_factor * symbols[k - 1].real() * sym;
}

bool OUSpec::stable() const {
  for (int k = 1; k <= max_mode(); ++k) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(mode_drift(k), false);
    for (int i = 0; i < species(); ++i)
      if (es.eigenvalues()(i).real() >= 0.0) return false;
  }
  return true;
}

OUSpec ou_spec_discrete(const DensityPoint& point, const JumpKernel& kernel,
                        int max_mode, bool frame_adjusted,
                        double noise_factor) {
  OUSpec spec;
  spec.coupling = point.lambda;
  spec.gamma = point.gamma;
  spec.noise_factor = noise_factor;
  spec.symbols.resize(max_mode);
  for (int k = 1; k <= max_mode; ++k)
    spec.symbols[k - 1] = frame_adjusted ? discrete_drift_symbol(kernel, k)
                                         : discrete_symbol(kernel, k);
  return spec;
}

OUSpec ou_spec_continuum(const DensityPoint& point, double alpha,
                         double c_plus, double c_minus, int max_mode,
                         double noise_factor) {
  OUSpec spec;
  spec.coupling = point.lambda;
  spec.gamma = point.gamma;
  spec.noise_factor = noise_factor;
  spec.symbols.resize(max_mode);
  for (int k = 1; k <= max_mode; ++k)
    spec.symbols[k - 1] = continuum_symbol(alpha, c_plus, c_minus, k);
  return spec;
}

Eigen::MatrixXcd stationary_mode_covariance(const OUSpec& spec, int k) {
  const int n = spec.species();
  const Eigen::MatrixXcd a = spec.mode_drift(k);
  const Eigen::MatrixXcd r = spec.mode_noise(k).cast<std::complex<double>>();
  // vec(A S + S A^H) = (I (x) A + conj(A) (x) I) vec(S)
  Eigen::MatrixXcd sys = Eigen::MatrixXcd::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        sys(j * n + i, j * n + l) += a(i, l);
        sys(j * n + i, l * n + i) += std::conj(a(j, l));
      }
  Eigen::VectorXcd rhs(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rhs(j * n + i) = -r(i, j);
  Eigen::VectorXcd s = sys.fullPivLu().solve(rhs);
  Eigen::MatrixXcd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = s(j * n + i);
  return out;
}

Eigen::MatrixXd ou_autocorrelation(const OUSpec& spec, const TestFunction& h,
                                   const TestFunction& g, double lag) {
  const int n = spec.species();
  const Eigen::MatrixXcd gamma_stat =
      (0.5 * spec.noise_factor * spec.gamma).cast<std::complex<double>>();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  const int K = std::min({spec.max_mode(), h.degree(), g.degree()});
  for (int k = 1; k <= K; ++k) {
    const std::complex<double> w = h.coeff(k) * std::conj(g.coeff(k));
    if (w == std::complex<double>{}) continue;
    Eigen::MatrixXcd m = (lag * spec.mode_drift(k)).exp() * gamma_stat;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += 2.0 * (w * m(i, j)).real();
  }
  return out;
}

OUProcess::OUProcess(OUSpec spec) : spec_(std::move(spec)) {
  if (spec_.coupling.rows() != spec_.coupling.cols() ||
      spec_.gamma.rows() != spec_.coupling.rows() ||
      spec_.gamma.cols() != spec_.coupling.rows())
    throw std::invalid_argument("ou: coupling/gamma shape mismatch");
  if (!spec_.stable()) throw std::invalid_argument("ou: unstable drift spectrum");
  gamma_stat_ = 0.5 * spec_.noise_factor * spec_.gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(gamma_stat_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ou: stationary covariance not positive definite");
  gamma_stat_sqrt_ = llt.matrixL();
  z_.assign(spec_.max_mode(), Eigen::VectorXcd::Zero(spec_.species()));
}

void OUProcess::init_zero() {
  for (auto& z : z_) z.setZero();
}

Eigen::VectorXcd OUProcess::draw_proper(int n, Rng& rng) const {
  Eigen::VectorXcd w(n);
  const double inv = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    w(i) = std::complex<double>(re * inv, im * inv);
  }
  return w;
}

void OUProcess::init_stationary(Rng& rng) {
  for (int k = 1; k <= max_mode(); ++k)
    z_[k - 1] = gamma_stat_sqrt_.cast<std::complex<double>>() *
                draw_proper(species(), rng);
}

void OUProcess::build_ops(double dt) {
  ops_.resize(spec_.max_mode());
  const Eigen::MatrixXcd gs = gamma_stat_.cast<std::complex<double>>();
  for (int k = 1; k <= spec_.max_mode(); ++k) {
    ModeOp& op = ops_[k - 1];
    op.prop = (dt * spec_.mode_drift(k)).exp();
    // exact additive covariance over one step from stationarity:
    //   S_dt = S_inf - E S_inf E^H
    Eigen::MatrixXcd cov = gs - op.prop * gs * op.prop.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    op.noise_sqrt = es.eigenvectors() *
                    ev.cwiseSqrt().asDiagonal().toDenseMatrix()
                        .cast<std::complex<double>>() *
                    es.eigenvectors().adjoint();
  }
  ops_dt_ = dt;
}

void OUProcess::step(double dt, Rng& rng) {
  if (dt != ops_dt_) build_ops(dt);
  for (int k = 1; k <= max_mode(); ++k) {
    const ModeOp& op = ops_[k - 1];
    z_[k - 1] = op.prop * z_[k - 1] + op.noise_sqrt * draw_proper(species(), rng);
  }
}

double OUProcess::field(const TestFunction& h, int i) const {
  double acc = 0.0;
  const int K = std::min(max_mode(), h.degree());
  for (int k = 1; k <= K; ++k)
    acc += 2.0 * (h.coeff(k) * z_[k - 1](i)).real();
  return acc;
}

BurgersProcess::BurgersProcess(BurgersSpec spec)
    : spec_(std::move(spec)), ou_(spec_.ou) {
  const int n = ou_.species();
  pure_linear_ = true;
  for (const auto& q : spec_.quad) {
    if (q.rows() != n || q.cols() != n)
      throw std::invalid_argument("burgers: quadratic coefficient shape");
    if (q.cwiseAbs().maxCoeff() != 0.0) pure_linear_ = false;
  }
  if (!spec_.quad.empty() && static_cast<int>(spec_.quad.size()) != n)
    throw std::invalid_argument("burgers: one coefficient matrix per species");
  if (spec_.quad.empty()) pure_linear_ = true;

  const int K = ou_.max_mode();
  grid_ = spec_.grid > 0 ? spec_.grid : 4 * K;
  if (grid_ < 3 * K + 1)
    throw std::invalid_argument("burgers: grid too small to dealias");
  roots_.resize(static_cast<std::size_t>(grid_) * (K + 1));
  for (int g = 0; g < grid_; ++g)
    for (int k = 0; k <= K; ++k)
      roots_[static_cast<std::size_t>(g) * (K + 1) + k] =
          std::polar(1.0, kTwoPi * ((static_cast<long>(k) * g) % grid_) / grid_);
  values_.resize(n, grid_);
  product_.resize(n, grid_);
  stationary_scale_sq_ =
      K * (0.5 * spec_.ou.noise_factor * spec_.ou.gamma).trace();
}

void BurgersProcess::add_nonlinearity(double dt) {
  const int n = ou_.species();
  const int K = ou_.max_mode();
  // real field values on the dealiasing grid
  for (int g = 0; g < grid_; ++g) {
    const std::complex<double>* row = roots_.data() + static_cast<std::size_t>(g) * (K + 1);
    for (int i = 0; i < n; ++i) {
      double v = 0.0;
      for (int k = 1; k <= K; ++k) v += 2.0 * (ou_.mode(k)(i) * row[k]).real();
      values_(i, g) = v;
    }
  }
  for (int g = 0; g < grid_; ++g)
    for (int i = 0; i < n; ++i) {
      double q = 0.0;
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l)
          q += spec_.quad[i](j, l) * values_(j, g) * values_(l, g);
      product_(i, g) = q;
    }
  // retained product modes are exact: products of modes <= K live below
  // grid - K, so no aliasing reaches |k| <= K
  for (int k = 1; k <= K; ++k) {
    const std::complex<double> grad{0.0, kTwoPi * k};
    for (int i = 0; i < n; ++i) {
      std::complex<double> acc{0.0, 0.0};
      for (int g = 0; g < grid_; ++g)
        acc += product_(i, g) *
               std::conj(roots_[static_cast<std::size_t>(g) * (K + 1) + k]);
      ou_.mode(k)(i) += dt * grad * acc / static_cast<double>(grid_);
    }
  }
}

void BurgersProcess::step(double dt, Rng& rng) {
  if (pure_linear_) {
    ou_.step(dt, rng);
    return;
  }
  ou_.step(0.5 * dt, rng);
  add_nonlinearity(dt);
  ou_.step(0.5 * dt, rng);

  double norm_sq = 0.0;
  for (int k = 1; k <= ou_.max_mode(); ++k) norm_sq += ou_.mode(k).squaredNorm();
  if (norm_sq > spec_.blowup_factor * spec_.blowup_factor * stationary_scale_sq_)
    throw std::runtime_error("burgers: blow-up past the stationary scale");
}

}  // namespace zrp
