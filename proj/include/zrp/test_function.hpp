#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace zrp {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Real trigonometric polynomial on the unit torus,
//   H(u) = c_0 + 2 Re sum_{k=1}^{K} c_k e^{2 pi i k u},
// i.e. Fourier coefficients c_{-k} = conj(c_k).  Closed under shifts and
// differentiation, so moving-frame evaluations are exact phase rotations.
class TestFunction {
 public:
  explicit TestFunction(int degree = 0) : c_(degree + 1, {0.0, 0.0}) {
    if (degree < 0) throw std::invalid_argument("TestFunction: degree < 0");
  }

  // a cos(2 pi k u) + b sin(2 pi k u)
  static TestFunction harmonic(int k, double cos_amp, double sin_amp = 0.0) {
    TestFunction h(k);
    if (k == 0)
      h.c_[0] = {cos_amp, 0.0};
    else
      h.c_[k] = {0.5 * cos_amp, -0.5 * sin_amp};
    return h;
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }

  std::complex<double> coeff(int k) const {
    int a = k < 0 ? -k : k;
    if (a > degree()) return {0.0, 0.0};
    return k < 0 ? std::conj(c_[a]) : c_[a];
  }

  void set_coeff(int k, std::complex<double> v) {
    if (k < 0 || k > degree()) throw std::out_of_range("set_coeff");
    if (k == 0 && v.imag() != 0.0)
      throw std::invalid_argument("set_coeff: mean must be real");
    c_[k] = v;
  }

  double operator()(double u) const {
    std::complex<double> w = std::polar(1.0, kTwoPi * u);
    std::complex<double> pw = w;
    double acc = c_[0].real();
    for (int k = 1; k <= degree(); ++k) {
      acc += 2.0 * (c_[k] * pw).real();
      pw *= w;
    }
    return acc;
  }

  double derivative(double u, int order = 1) const {
    return derived(order)(u);
  }

  TestFunction derived(int order = 1) const {
    TestFunction d(degree());
    for (int k = 1; k <= degree(); ++k) {
      std::complex<double> f{0.0, kTwoPi * k};
      std::complex<double> v = c_[k];
      for (int o = 0; o < order; ++o) v *= f;
      d.c_[k] = v;
    }
    return d;
  }

  // H(u - delta)
  TestFunction shifted(double delta) const {
    TestFunction s(degree());
    s.c_[0] = c_[0];
    for (int k = 1; k <= degree(); ++k)
      s.c_[k] = c_[k] * std::polar(1.0, -kTwoPi * k * delta);
    return s;
  }

  double mean() const { return c_[0].real(); }

  // integral of H^2 over the torus
  double l2_sq() const {
    double acc = c_[0].real() * c_[0].real();
    for (int k = 1; k <= degree(); ++k) acc += 2.0 * std::norm(c_[k]);
    return acc;
  }

  double sup_norm(int grid = 8192) const {
    double m = 0.0;
    for (int i = 0; i < grid; ++i)
      m = std::max(m, std::fabs((*this)(static_cast<double>(i) / grid)));
    return m;
  }

  TestFunction& operator+=(const TestFunction& o) {
    if (o.degree() > degree()) c_.resize(o.degree() + 1, {0.0, 0.0});
    for (int k = 0; k <= o.degree(); ++k) c_[k] += o.c_[k];
    return *this;
  }

  TestFunction scaled(double a) const {
    TestFunction s = *this;
    for (auto& v : s.c_) v *= a;
    return s;
  }

 private:
  std::vector<std::complex<double>> c_;
};

// integral of H G over the torus
inline double inner_product(const TestFunction& h, const TestFunction& g) {
  double acc = h.mean() * g.mean();
  int K = std::min(h.degree(), g.degree());
  for (int k = 1; k <= K; ++k)
    acc += 2.0 * (h.coeff(k) * std::conj(g.coeff(k))).real();
  return acc;
}

}  // namespace zrp
