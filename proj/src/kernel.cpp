#include "zrp/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace zrp {

double zeta_tail_sum(double s) {
  if (s <= 1.0) throw std::invalid_argument("zeta_tail_sum: need s > 1");
  const int M = 64;
  double sum = 0.0;
  for (int n = M; n >= 1; --n) sum += std::pow(static_cast<double>(n), -s);
  // Euler-Maclaurin tail from a = M+1:
  //   sum_{n>=a} n^-s = a^{1-s}/(s-1) + a^-s/2 + s a^{-s-1}/12
  //                     - s(s+1)(s+2) a^{-s-3}/720 + O(a^{-s-5})
  const double a = M + 1;
  double tail = std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s) +
                s * std::pow(a, -s - 1.0) / 12.0 -
                s * (s + 1.0) * (s + 2.0) * std::pow(a, -s - 3.0) / 720.0;
  return sum + tail;
}

double theta_compensator(double alpha, double v) {
  if (alpha < 1.0) return 0.0;
  if (alpha == 1.0) return std::fabs(v) <= 1.0 ? v : 0.0;
  return v;
}

JumpKernel::JumpKernel(double alpha, double c_plus, double c_minus, int N)
    : alpha_(alpha), c_plus_(c_plus), c_minus_(c_minus), N_(N), R_(N / 2) {
  if (alpha <= 0.0 || alpha >= 2.0)
    throw std::invalid_argument("JumpKernel: stability index must be in (0,2)");
  if (c_plus < 0.0 || c_minus < 0.0 || c_plus + c_minus <= 0.0)
    throw std::invalid_argument("JumpKernel: weights must be >= 0 and not both 0");
  if (N < 2) throw std::invalid_argument("JumpKernel: need at least 2 sites");
  // ascending-magnitude summation keeps the truncated moments accurate
  double m = 0.0, mu = 0.0;
  for (long z = R_; z >= 1; --z) {
    double w = std::pow(static_cast<double>(z), -1.0 - alpha_);
    m += (c_plus_ + c_minus_) * w;
    mu += (c_plus_ - c_minus_) * w * static_cast<double>(z);
  }
  mass_ = m;
  mean_ = mu;
}

double JumpKernel::p(long z) const {
  if (z == 0 || z > R_ || z < -R_) return 0.0;
  double w = std::pow(static_cast<double>(z > 0 ? z : -z), -1.0 - alpha_);
  return (z > 0 ? c_plus_ : c_minus_) * w;
}

double JumpKernel::s_sym(long z) const {
  if (z == 0 || z > R_ || z < -R_) return 0.0;
  double w = std::pow(static_cast<double>(z > 0 ? z : -z), -1.0 - alpha_);
  return 0.5 * (c_plus_ + c_minus_) * w;
}

double JumpKernel::untruncated_mass() const {
  return (c_plus_ + c_minus_) * zeta_tail_sum(1.0 + alpha_);
}

double JumpKernel::untruncated_mean() const {
  if (alpha_ <= 1.0)
    throw std::logic_error("untruncated_mean: first moment diverges for alpha <= 1");
  return (c_plus_ - c_minus_) * zeta_tail_sum(alpha_);
}

double JumpKernel::frame_constant() const {
  if (alpha_ < 1.0) return 0.0;
  if (alpha_ == 1.0) {
    // N * sum_{1<=|x|<=N} x p(x) = N (c+ - c-) H_N with untruncated weights
    double h = 0.0;
    for (long x = N_; x >= 1; --x) h += 1.0 / static_cast<double>(x);
    return static_cast<double>(N_) * (c_plus_ - c_minus_) * h;
  }
  return std::pow(static_cast<double>(N_), alpha_) * untruncated_mean();
}

std::vector<double> JumpKernel::displacement_probs() const {
  std::vector<double> probs(2 * R_);
  for (int i = 0; i < 2 * R_; ++i) probs[i] = p(displacement_from_index(i)) / mass_;
  return probs;
}

}  // namespace zrp
