#include "zrp/stats.hpp"

#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <stdexcept>

namespace zrp {

double chi_square_tail(double stat, int dof) {
  if (dof <= 0) throw std::invalid_argument("chi_square_tail: dof must be positive");
  if (stat <= 0.0) return 1.0;
  return gsl_cdf_chisq_Q(stat, static_cast<double>(dof));
}

// P(K > x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)
static double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1) ? term : -term;
    if (term < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample_p: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    double diff = std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
    if (diff > d) d = diff;
  }
  double ne = std::sqrt(na * nb / (na + nb));
  // Marsaglia-style small-sample correction improves the asymptotic series
  double x = (ne + 0.12 + 0.11 / ne) * d;
  return kolmogorov_tail(x);
}

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_log_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]);
    double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace zrp
