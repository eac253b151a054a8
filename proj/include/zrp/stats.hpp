#pragma once

#include <cstdint>
#include <cmath>
#include <limits>
#include <vector>

namespace zrp {

// Welford accumulator with Chan's parallel merge.  Merging in a fixed order
// keeps multi-threaded reductions deterministic.
struct RunningStat {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void push(double x) {
    ++count;
    double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
    if (x < min) min = x;
    if (x > max) max = x;
  }

  void merge(const RunningStat& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    double d = o.mean - mean;
    std::uint64_t nc = count + o.count;
    mean += d * static_cast<double>(o.count) / static_cast<double>(nc);
    m2 += o.m2 + d * d * static_cast<double>(count) *
                     static_cast<double>(o.count) / static_cast<double>(nc);
    count = nc;
    if (o.min < min) min = o.min;
    if (o.max > max) max = o.max;
  }

  double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
  double stderr_mean() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

// Bivariate accumulator for covariances/correlations across replicas.
struct CovStat {
  std::uint64_t count = 0;
  double mx = 0.0, my = 0.0;
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;

  void push(double x, double y) {
    ++count;
    double dx = x - mx;
    double dy = y - my;
    mx += dx / static_cast<double>(count);
    my += dy / static_cast<double>(count);
    cxx += dx * (x - mx);
    cyy += dy * (y - my);
    cxy += dx * (y - my);
  }

  void merge(const CovStat& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    std::uint64_t nc = count + o.count;
    double dx = o.mx - mx;
    double dy = o.my - my;
    double w = static_cast<double>(count) * static_cast<double>(o.count) /
               static_cast<double>(nc);
    cxx += o.cxx + dx * dx * w;
    cyy += o.cyy + dy * dy * w;
    cxy += o.cxy + dx * dy * w;
    mx += dx * static_cast<double>(o.count) / static_cast<double>(nc);
    my += dy * static_cast<double>(o.count) / static_cast<double>(nc);
    count = nc;
  }

  double covariance() const {
    return count > 1 ? cxy / static_cast<double>(count - 1) : 0.0;
  }
  double correlation() const {
    if (count < 2 || cxx <= 0.0 || cyy <= 0.0) return 0.0;
    return cxy / std::sqrt(cxx * cyy);
  }
};

// Upper-tail p-value of the chi-square distribution.
double chi_square_tail(double stat, int dof);

// Two-sample Kolmogorov-Smirnov p-value (asymptotic Kolmogorov series).
double ks_two_sample_p(std::vector<double> a, std::vector<double> b);

// Least-squares slope of log(y) against log(x).
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace zrp
