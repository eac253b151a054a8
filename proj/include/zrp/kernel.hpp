#pragma once

#include <vector>

namespace zrp {

// Riemann zeta(s) for s > 1 via a partial sum plus an Euler-Maclaurin tail;
// absolute error below 1e-12 for s >= 1.05.
double zeta_tail_sum(double s);

// Compensator used by the principal-value form of the nonlocal generator:
// 0 for stability index < 1, v*1{|v|<=1} at 1, v above 1.
double theta_compensator(double alpha, double v);

// One-sided power-law jump distribution on the discrete torus of N sites:
//   p(z) = c_plus  * z^{-1-alpha}   for z > 0,
//   p(z) = c_minus * |z|^{-1-alpha} for z < 0,  p(0) = 0,
// truncated at radius R = floor(N/2).  Displacements act modulo N; the rate
// table itself is not image-wrapped, so a mass deficit of order R^{-alpha}
// relative to the untruncated distribution remains and is reported.
class JumpKernel {
 public:
  JumpKernel(double alpha, double c_plus, double c_minus, int N);

  double alpha() const { return alpha_; }
  double c_plus() const { return c_plus_; }
  double c_minus() const { return c_minus_; }
  int lattice() const { return N_; }
  int radius() const { return R_; }

  double p(long z) const;      // truncated one-sided weights
  double s_sym(long z) const;  // symmetrized: (p(z) + p(-z)) / 2

  double mass() const { return mass_; }  // sum of p over 1 <= |z| <= R
  double mean() const { return mean_; }  // sum of z p(z) over the same range

  double untruncated_mass() const;  // (c+ + c-) zeta(1 + alpha)
  double untruncated_mean() const;  // (c+ - c-) zeta(alpha); requires alpha > 1
  double mass_deficit() const { return untruncated_mass() - mass_; }

  // Frame centering constant:
  //   0                          for alpha < 1,
  //   N * sum_{1<=|x|<=N} x p(x) for alpha = 1 (untruncated weights),
  //   N^alpha * untruncated mean for alpha > 1.
  double frame_constant() const;

  // Probabilities for the displacement alias table; index i in [0, R) maps to
  // z = i+1, index i in [R, 2R) maps to z = -(i-R+1).
  std::vector<double> displacement_probs() const;
  long displacement_from_index(int idx) const {
    return idx < R_ ? idx + 1 : -(idx - R_ + 1);
  }

 private:
  double alpha_, c_plus_, c_minus_;
  int N_, R_;
  double mass_, mean_;
};

}  // namespace zrp
