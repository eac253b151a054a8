#pragma once

#include <complex>
#include <vector>

#include "zrp/kernel.hpp"
#include "zrp/test_function.hpp"

namespace zrp {

// Nonlocal generator with one-sided-stable jump density
//   rho(v) = c_plus v^{-1-alpha} (v > 0),  c_minus |v|^{-1-alpha} (v < 0),
//     L H(u) = int rho(v) [H(u+v) - H(u) - theta_alpha(v) H'(u)] dv,
// theta_alpha the usual compensator (0 / v 1{|v|<=1} / v).  The adjoint swaps
// c_plus and c_minus.
//
// Two independent evaluation routes are kept on purpose: a Fourier-multiplier
// route (oscillatory quadrature in v per mode) and a direct real-space route
// (quadrature in v of the evaluated increment, periodic far field resummed
// with Hurwitz zeta).  Tests require them to agree.

// Multiplier of L on e^{2 pi i k u}; psi(-k) = conj(psi(k)), psi(0) = 0.
std::complex<double> continuum_symbol(double alpha, double c_plus,
                                      double c_minus, int k);

// Multiplier s_k > 0 of the symmetrized part: s_k = -Re psi(k), equal to
// (c_plus + c_minus) int_0^inf (1 - cos(2 pi k v)) v^{-1-alpha} dv.
double symmetric_symbol(double alpha, double c_plus, double c_minus, int k);

// L H(u) by direct quadrature (set adjoint to swap the side weights).
double apply_continuum(const TestFunction& h, double u, double alpha,
                       double c_plus, double c_minus, bool adjoint = false);

// <H, (-S) H> = (c_plus+c_minus)/4 iint (H(u+v)-H(u))^2 |v|^{-1-alpha} dv du.
// _quadrature integrates in real space; _spectral sums s_k |H_k|^2.
double dirichlet_form_quadrature(const TestFunction& h, double alpha,
                                 double c_plus, double c_minus);
double dirichlet_form_spectral(const TestFunction& h, double alpha,
                               double c_plus, double c_minus);

// ---- discrete operators on the N-site torus, H sampled at x/N ----

// Multiplier of the accelerated truncated jump operator
//   U_N H(x/N) = N^alpha sum_{1<=|z|<=R} p(z) [H((x+z)/N) - H(x/N)]
// on e^{2 pi i k x / N}.
std::complex<double> discrete_symbol(const JumpKernel& kernel, int k);

// Same with the frame-derivative correction -(m_N / N) H':
std::complex<double> discrete_drift_symbol(const JumpKernel& kernel, int k);

// Multiplier of the symmetrized truncated operator,
//   s^{(N)}_k = N^alpha sum_{1<=z<=R} (p(z)+p(-z)) (1 - cos(2 pi k z / N)).
double discrete_dirichlet_symbol(const JumpKernel& kernel, int k);

// U_N H (optionally minus the frame term) evaluated at every lattice point by
// direct summation over displacements.
std::vector<double> apply_discrete(const JumpKernel& kernel,
                                   const TestFunction& h, bool with_frame_term);

// Same operator but with the displacement sum over the whole integer lattice
// (periodic wrap resummed via Hurwitz zeta) and the untruncated frame
// constant; this is the discretization that converges to apply_continuum.
std::vector<double> apply_discrete_full(const JumpKernel& kernel,
                                        const TestFunction& h,
                                        bool with_frame_term);

// (N^{alpha-1}/2) sum_x sum_{1<=|z|<=R} s(z) (H((x+z)/N) - H(x/N))^2,
// the exact quadratic form of the symmetrized truncated dynamics.
double dirichlet_form_discrete(const JumpKernel& kernel,
                               const TestFunction& h);

// Growth factors entering the replacement/averaging error bounds:
// per-site average of |U_N H| grows like averaging_factor(alpha, N), and the
// block-average substitution error like block_factor(alpha, ell).
double averaging_factor(double alpha, long n);
double block_factor(double alpha, long ell);

}  // namespace zrp
