#include "zrp/operators.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_zeta.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace zrp {
namespace {

// GSL's default error handler aborts; we check status codes ourselves.
[[maybe_unused]] const gsl_error_handler_t* g_handler_off =
    (gsl_set_error_handler_off(), nullptr);

double trampoline(double x, void* p) {
  return (*static_cast<const std::function<double(double)>*>(p))(x);
}

void check_status(int status, double abserr, double result, const char* what) {
  if (status == GSL_SUCCESS) return;
  // Roundoff-limited results are fine as long as the error estimate is small.
  if (status == GSL_EROUND && abserr <= 1e-7 * (1.0 + std::fabs(result)))
    return;
  std::ostringstream os;
  os << what << ": " << gsl_strerror(status) << " (abserr=" << abserr << ")";
  throw std::runtime_error(os.str());
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b) {
  constexpr size_t kLimit = 512;
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(kLimit);
  gsl_function gf{&trampoline, const_cast<void*>(static_cast<const void*>(&f))};
  double result = 0.0, abserr = 0.0;
  int status = gsl_integration_qags(&gf, a, b, 1e-12, 1e-11, kLimit, w,
                                    &result, &abserr);
  gsl_integration_workspace_free(w);
  check_status(status, abserr, result, "qags");
  return result;
}

// int_a^inf f(v) cos/sin(omega v) dv for monotonically decaying f.
double oscillatory_tail(const std::function<double(double)>& f, double a,
                        double omega, bool cosine) {
  constexpr size_t kLimit = 512;
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(kLimit);
  gsl_integration_workspace* wc = gsl_integration_workspace_alloc(kLimit);
  gsl_integration_qawo_table* t = gsl_integration_qawo_table_alloc(
      omega, 1.0, cosine ? GSL_INTEG_COSINE : GSL_INTEG_SINE, 48);
  gsl_function gf{&trampoline, const_cast<void*>(static_cast<const void*>(&f))};
  double result = 0.0, abserr = 0.0;
  int status =
      gsl_integration_qawf(&gf, a, 1e-12, kLimit, w, wc, t, &result, &abserr);
  gsl_integration_qawo_table_free(t);
  gsl_integration_workspace_free(wc);
  gsl_integration_workspace_free(w);
  check_status(status, abserr, result, "qawf");
  return result;
}

// cos(x) - 1 and sin(x) - x with full relative accuracy near zero.
double cos_m1(double x) {
  if (std::fabs(x) < 1e-4) {
    double x2 = x * x;
    return -0.5 * x2 * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0));
  }
  return std::cos(x) - 1.0;
}

double sin_m_x(double x) {
  if (std::fabs(x) < 1e-4) {
    double x2 = x * x;
    return -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
  }
  return std::sin(x) - x;
}

// Re and Im of int_0^inf (e^{i omega v} - 1 - i theta_alpha(v) omega v-term)
// v^{-1-alpha} dv for omega = 2 pi k > 0, split at v = 1 with oscillatory
// tails.  The real part needs no compensator.
double side_integral_re(double alpha, double omega) {
  std::function<double(double)> f = [alpha, omega](double v) {
    double x = omega * v;
    if (x < 1e-4) {
      double x2 = x * x;
      return -0.5 * omega * omega * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0)) *
             std::pow(v, 1.0 - alpha);
    }
    return (std::cos(x) - 1.0) * std::pow(v, -1.0 - alpha);
  };
  std::function<double(double)> tail = [alpha](double v) {
    return std::pow(v, -1.0 - alpha);
  };
  return integrate_adaptive(f, 0.0, 1.0) +
         oscillatory_tail(tail, 1.0, omega, true) - 1.0 / alpha;
}

double side_integral_im(double alpha, double omega) {
  std::function<double(double)> tail = [alpha](double v) {
    return std::pow(v, -1.0 - alpha);
  };
  double t = oscillatory_tail(tail, 1.0, omega, false);
  if (alpha < 1.0) {
    std::function<double(double)> f = [alpha, omega](double v) {
      double x = omega * v;
      if (x < 1e-4) {
        double x2 = x * x;
        return omega * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)) *
               std::pow(v, -alpha);
      }
      return std::sin(x) * std::pow(v, -1.0 - alpha);
    };
    return integrate_adaptive(f, 0.0, 1.0) + t;
  }
  // alpha >= 1: compensated by omega v on |v| <= 1 (and everywhere if
  // alpha > 1, contributing the closed-form tail -omega/(alpha-1)).
  std::function<double(double)> f = [alpha, omega](double v) {
    double x = omega * v;
    if (x < 1e-4) {
      double x2 = x * x;
      return -omega * omega * omega / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0)) *
             std::pow(v, 2.0 - alpha);
    }
    return sin_m_x(x) * std::pow(v, -1.0 - alpha);
  };
  double near = integrate_adaptive(f, 0.0, 1.0);
  if (alpha > 1.0) return near + t - omega / (alpha - 1.0);
  return near + t;
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("stability index must lie in (0, 2)");
}

}  // namespace

std::complex<double> continuum_symbol(double alpha, double c_plus,
                                      double c_minus, int k) {
  require_alpha(alpha);
  if (k == 0) return {0.0, 0.0};
  int ka = k < 0 ? -k : k;
  double omega = kTwoPi * ka;
  std::complex<double> i_plus{side_integral_re(alpha, omega),
                              side_integral_im(alpha, omega)};
  std::complex<double> psi = c_plus * i_plus + c_minus * std::conj(i_plus);
  return k < 0 ? std::conj(psi) : psi;
}

double symmetric_symbol(double alpha, double c_plus, double c_minus, int k) {
  require_alpha(alpha);
  if (k == 0) return 0.0;
  int ka = k < 0 ? -k : k;
  return -(c_plus + c_minus) * side_integral_re(alpha, kTwoPi * ka);
}

double apply_continuum(const TestFunction& h, double u, double alpha,
                       double c_plus, double c_minus, bool adjoint) {
  require_alpha(alpha);
  double cp = adjoint ? c_minus : c_plus;
  double cm = adjoint ? c_plus : c_minus;
  int K = h.degree();
  bool compensated = alpha >= 1.0;

  // Mode amplitudes at the evaluation point: H(u+v) - H(u) - theta(v) H'(u)
  // = sum_k 2 Re[A_k ((e^{i w_k v} - 1) - i w_k theta(v))], A_k = c_k e^{i w_k u}.
  std::vector<std::complex<double>> amp(K + 1);
  for (int k = 1; k <= K; ++k)
    amp[k] = h.coeff(k) * std::polar(1.0, kTwoPi * k * u);

  // plus_side selects H(u+v); the minus side conjugates the mode bracket.
  auto near_integrand = [&](double v, bool plus_side) {
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) {
      double w = kTwoPi * k;
      double x = w * v;
      double re, im;
      if (x < 1e-4) {
        double x2 = x * x;
        re = -0.5 * w * w * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0)) *
             std::pow(v, 1.0 - alpha);
        if (compensated)
          im = -w * w * w / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0)) *
               std::pow(v, 2.0 - alpha);
        else
          im = w * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)) * std::pow(v, -alpha);
      } else {
        double pw = std::pow(v, -1.0 - alpha);
        re = (std::cos(x) - 1.0) * pw;
        im = (compensated ? sin_m_x(x) : std::sin(x)) * pw;
      }
      std::complex<double> bracket{re, plus_side ? im : -im};
      acc += 2.0 * (amp[k] * bracket).real();
    }
    return acc;
  };

  std::function<double(double)> near_p = [&](double v) {
    return near_integrand(v, true);
  };
  std::function<double(double)> near_m = [&](double v) {
    return near_integrand(v, false);
  };

  // Far field |v| > 1 resummed over periods: contributions at u +/- w with
  // weight zeta(1+alpha, 1+w), w in [0,1).
  double hu = h(u);
  std::function<double(double)> far_p = [&](double w) {
    return (h(u + w) - hu) * gsl_sf_hzeta(1.0 + alpha, 1.0 + w);
  };
  std::function<double(double)> far_m = [&](double w) {
    return (h(u - w) - hu) * gsl_sf_hzeta(1.0 + alpha, 1.0 + w);
  };

  double comp_tail = 0.0;
  if (alpha > 1.0) comp_tail = h.derivative(u) / (alpha - 1.0);

  double plus = integrate_adaptive(near_p, 0.0, 1.0) +
                integrate_adaptive(far_p, 0.0, 1.0) - comp_tail;
  double minus = integrate_adaptive(near_m, 0.0, 1.0) +
                 integrate_adaptive(far_m, 0.0, 1.0) + comp_tail;
  return cp * plus + cm * minus;
}

double dirichlet_form_quadrature(const TestFunction& h, double alpha,
                                 double c_plus, double c_minus) {
  require_alpha(alpha);
  int K = h.degree();
  int M = 4 * K + 9;  // trapezoid on the torus, exact for degree <= 2K
  std::vector<double> hv(M);
  for (int i = 0; i < M; ++i) hv[i] = h(static_cast<double>(i) / M);

  double d2 = h.derived().l2_sq();
  auto sq_increment = [&](double v) {  // int (H(u+v) - H(u))^2 du, even in v
    double acc = 0.0;
    for (int i = 0; i < M; ++i) {
      double d = h(static_cast<double>(i) / M + v) - hv[i];
      acc += d * d;
    }
    return acc / M;
  };

  std::function<double(double)> near = [&](double v) {
    if (v < 1e-6) return d2 * std::pow(v, 1.0 - alpha);
    return sq_increment(v) * std::pow(v, -1.0 - alpha);
  };
  std::function<double(double)> far = [&](double w) {
    return sq_increment(w) * gsl_sf_hzeta(1.0 + alpha, 1.0 + w);
  };
  return 0.25 * (c_plus + c_minus) * 2.0 *
         (integrate_adaptive(near, 0.0, 1.0) +
          integrate_adaptive(far, 0.0, 1.0));
}

double dirichlet_form_spectral(const TestFunction& h, double alpha,
                               double c_plus, double c_minus) {
  require_alpha(alpha);
  double acc = 0.0;
  for (int k = 1; k <= h.degree(); ++k)
    acc += 2.0 * symmetric_symbol(alpha, c_plus, c_minus, k) *
           std::norm(h.coeff(k));
  return acc;
}

std::complex<double> discrete_symbol(const JumpKernel& kernel, int k) {
  int N = kernel.lattice();
  double theta = kTwoPi * k / N;
  double re = 0.0, im = 0.0;
  for (long z = kernel.radius(); z >= 1; --z) {
    double pp = kernel.p(z), pm = kernel.p(-z);
    re += (pp + pm) * cos_m1(theta * z);
    im += (pp - pm) * std::sin(theta * z);
  }
  double scale = std::pow(N, kernel.alpha());
  return {scale * re, scale * im};
}

std::complex<double> discrete_drift_symbol(const JumpKernel& kernel, int k) {
  double drift = kTwoPi * k * kernel.frame_constant() / kernel.lattice();
  return discrete_symbol(kernel, k) - std::complex<double>{0.0, drift};
}

double discrete_dirichlet_symbol(const JumpKernel& kernel, int k) {
  int N = kernel.lattice();
  double theta = kTwoPi * k / N;
  double acc = 0.0;
  for (long z = kernel.radius(); z >= 1; --z)
    acc += (kernel.p(z) + kernel.p(-z)) * (-cos_m1(theta * z));
  return std::pow(N, kernel.alpha()) * acc;
}

std::vector<double> apply_discrete(const JumpKernel& kernel,
                                   const TestFunction& h,
                                   bool with_frame_term) {
  int N = kernel.lattice();
  int R = kernel.radius();
  std::vector<double> hv(N);
  for (int x = 0; x < N; ++x) hv[x] = h(static_cast<double>(x) / N);
  double scale = std::pow(N, kernel.alpha());
  double frame = with_frame_term ? kernel.frame_constant() / N : 0.0;

  std::vector<double> out(N);
  for (int x = 0; x < N; ++x) {
    double acc = 0.0;
    for (int z = R; z >= 1; --z) {
      acc += kernel.p(z) * (hv[(x + z) % N] - hv[x]);
      acc += kernel.p(-z) * (hv[(x - z % N + N) % N] - hv[x]);
    }
    out[x] = scale * acc;
    if (frame != 0.0) out[x] -= frame * h.derivative(static_cast<double>(x) / N);
  }
  return out;
}

std::vector<double> apply_discrete_full(const JumpKernel& kernel,
                                        const TestFunction& h,
                                        bool with_frame_term) {
  int N = kernel.lattice();
  double alpha = kernel.alpha();
  std::vector<double> hv(N);
  for (int x = 0; x < N; ++x) hv[x] = h(static_cast<double>(x) / N);

  // Sum over every z >= 1 wraps onto residues r = z mod N with weight
  // N^{-1-alpha} zeta(1+alpha, r/N); overall acceleration N^alpha leaves 1/N.
  std::vector<double> wrap(N + 1);
  for (int r = 1; r <= N; ++r)
    wrap[r] = gsl_sf_hzeta(1.0 + alpha, static_cast<double>(r) / N) / N;
  double frame = with_frame_term ? kernel.frame_constant() / N : 0.0;

  std::vector<double> out(N);
  for (int x = 0; x < N; ++x) {
    double acc = 0.0;
    for (int r = N; r >= 1; --r) {
      double dplus = hv[(x + r) % N] - hv[x];
      double dminus = hv[(x - r % N + N) % N] - hv[x];
      acc += wrap[r] * (kernel.c_plus() * dplus + kernel.c_minus() * dminus);
    }
    out[x] = acc;
    if (frame != 0.0) out[x] -= frame * h.derivative(static_cast<double>(x) / N);
  }
  return out;
}

double dirichlet_form_discrete(const JumpKernel& kernel,
                               const TestFunction& h) {
  int N = kernel.lattice();
  int R = kernel.radius();
  std::vector<double> hv(N);
  for (int x = 0; x < N; ++x) hv[x] = h(static_cast<double>(x) / N);

  double acc = 0.0;
  for (int x = 0; x < N; ++x) {
    for (int z = R; z >= 1; --z) {
      double dp = hv[(x + z) % N] - hv[x];
      double dm = hv[(x - z % N + N) % N] - hv[x];
      acc += kernel.s_sym(z) * (dp * dp + dm * dm);
    }
  }
  return 0.5 * std::pow(N, kernel.alpha() - 1.0) * acc;
}

double averaging_factor(double alpha, long n) {
  require_alpha(alpha);
  if (alpha < 1.0) return 1.0;
  if (alpha == 1.0) return std::log(static_cast<double>(n));
  return std::pow(static_cast<double>(n), alpha - 1.0);
}

double block_factor(double alpha, long ell) {
  require_alpha(alpha);
  if (alpha < 1.0) return 1.0;
  double lg = std::log(static_cast<double>(ell));
  if (alpha == 1.0) return lg * lg;
  return std::pow(static_cast<double>(ell), alpha - 1.0);
}

}  // namespace zrp
