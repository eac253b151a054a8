#include "zrp/rate_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace zrp {

static std::vector<double> log_factorial_table(int cap) {
  std::vector<double> t(cap + 2, 0.0);
  for (int k = 1; k < static_cast<int>(t.size()); ++k)
    t[k] = t[k - 1] + std::log(static_cast<double>(k));
  return t;
}

RateModel RateModel::linear(int n, int cap) {
  RateModel m;
  m.n_ = n;
  m.cap_ = cap;
  m.family_ = RateFamily::Linear;
  m.log_fact_ = log_factorial_table(cap);
  return m;
}

RateModel RateModel::constant_rate(int n, int cap) {
  RateModel m;
  m.n_ = n;
  m.cap_ = cap;
  m.family_ = RateFamily::ConstantRate;
  return m;
}

RateModel RateModel::potential_coupled(int n, double coupling, int cap) {
  if (coupling < 0.0)
    throw std::invalid_argument("potential_coupled: coupling must be >= 0");
  RateModel m;
  m.n_ = n;
  m.cap_ = cap;
  m.family_ = RateFamily::PotentialCoupled;
  m.coupling_ = coupling;
  m.log_fact_ = log_factorial_table(cap);
  m.exp_coupling_.resize(static_cast<std::size_t>(n) * cap + 1);
  for (std::size_t s = 0; s < m.exp_coupling_.size(); ++s)
    m.exp_coupling_[s] = std::exp(coupling * static_cast<double>(s));
  return m;
}

RateModel RateModel::independent(std::vector<std::vector<double>> h) {
  if (h.empty()) throw std::invalid_argument("independent: no species");
  RateModel m;
  m.n_ = static_cast<int>(h.size());
  m.cap_ = static_cast<int>(h[0].size());
  m.family_ = RateFamily::Independent;
  for (auto& hi : h) {
    if (static_cast<int>(hi.size()) != m.cap_)
      throw std::invalid_argument("independent: ragged rate table");
    for (double v : hi)
      if (v <= 0.0)
        throw std::invalid_argument("independent: rates must be positive");
  }
  m.h_ = std::move(h);
  m.cum_log_h_.resize(m.n_);
  for (int i = 0; i < m.n_; ++i) {
    m.cum_log_h_[i].assign(m.cap_ + 1, 0.0);
    for (int k = 1; k <= m.cap_; ++k)
      m.cum_log_h_[i][k] = m.cum_log_h_[i][k - 1] + std::log(m.h_[i][k - 1]);
  }
  return m;
}

RateModel RateModel::custom(int n, int cap,
                            std::function<double(const int*, int)> g) {
  RateModel m;
  m.n_ = n;
  m.cap_ = cap;
  m.family_ = RateFamily::Custom;
  m.custom_rate_ = std::move(g);
  return m;
}

std::string RateModel::family_name() const {
  switch (family_) {
    case RateFamily::Independent: return "independent";
    case RateFamily::ConstantRate: return "constant";
    case RateFamily::Linear: return "linear";
    case RateFamily::PotentialCoupled: return "coupled";
    case RateFamily::Custom: return "custom";
  }
  return "?";
}

double RateModel::potential(const int* k) const {
  switch (family_) {
    case RateFamily::ConstantRate:
      return 0.0;
    case RateFamily::Linear: {
      double v = 0.0;
      for (int i = 0; i < n_; ++i) v += log_fact_[k[i]];
      return v;
    }
    case RateFamily::Independent: {
      double v = 0.0;
      for (int i = 0; i < n_; ++i) v += cum_log_h_[i][k[i]];
      return v;
    }
    case RateFamily::PotentialCoupled: {
      double v = 0.0;
      for (int i = 0; i < n_; ++i) v += log_fact_[k[i]];
      long pairs = 0;
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j)
          pairs += static_cast<long>(k[i]) * k[j];
      return v + coupling_ * static_cast<double>(pairs);
    }
    case RateFamily::Custom:
      throw std::logic_error("custom model has no potential");
  }
  return 0.0;
}

double RateModel::rate(const int* k, int i) const {
  if (k[i] <= 0) return 0.0;
  switch (family_) {
    case RateFamily::ConstantRate:
      return 1.0;
    case RateFamily::Linear:
      return static_cast<double>(k[i]);
    case RateFamily::Independent:
      return h_[i][k[i] - 1];
    case RateFamily::PotentialCoupled: {
      long others = 0;
      for (int j = 0; j < n_; ++j) others += k[j];
      others -= k[i];
      return static_cast<double>(k[i]) * exp_coupling_[others];
    }
    case RateFamily::Custom:
      return custom_rate_(k, i);
  }
  return 0.0;
}

std::vector<Occupancy> RateModel::enumerate_site_states() const {
  std::vector<Occupancy> out;
  std::size_t count = 1;
  for (int i = 0; i < n_; ++i) count *= static_cast<std::size_t>(cap_ + 1);
  out.reserve(count);
  Occupancy k(n_, 0);
  while (true) {
    out.push_back(k);
    int i = n_ - 1;
    while (i >= 0 && k[i] == cap_) {
      k[i] = 0;
      --i;
    }
    if (i < 0) break;
    ++k[i];
  }
  return out;
}

RateModel RateModel::extended(int extra) const {
  switch (family_) {
    case RateFamily::Linear:
      return linear(n_, cap_ + extra);
    case RateFamily::ConstantRate:
      return constant_rate(n_, cap_ + extra);
    case RateFamily::PotentialCoupled:
      return potential_coupled(n_, coupling_, cap_ + extra);
    case RateFamily::Independent: {
      auto h = h_;
      for (auto& hi : h) hi.resize(cap_ + extra, hi.back());
      return independent(std::move(h));
    }
    case RateFamily::Custom:
      return *this;
  }
  return *this;
}

double RateModel::min_positive_rate() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& k : enumerate_site_states())
    for (int i = 0; i < n_; ++i)
      if (k[i] >= 1) lo = std::min(lo, rate(k, i));
  return lo;
}

double RateModel::min_rate_increment() const {
  double lo = std::numeric_limits<double>::infinity();
  for (auto k : enumerate_site_states()) {
    for (int i = 0; i < n_; ++i) {
      if (k[i] + 1 > cap_) continue;
      double g0 = rate(k, i);
      ++k[i];
      double g1 = rate(k, i);
      --k[i];
      lo = std::min(lo, g1 - g0);
    }
  }
  return lo;
}

double RateModel::potential_growth_bound() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& k : enumerate_site_states()) {
    long norm = 0;
    for (int v : k) norm += v;
    if (norm == 0) continue;
    lo = std::min(lo, potential(k) / static_cast<double>(norm));
  }
  return lo;
}

CompatibilityReport check_compatibility(const RateModel& model, double rel_tol) {
  CompatibilityReport rep;
  const int n = model.species();
  for (auto k : model.enumerate_site_states()) {
    for (int i = 0; i < n; ++i) {
      if (k[i] == 0) continue;
      for (int j = i + 1; j < n; ++j) {
        if (k[j] == 0) continue;
        double gi = model.rate(k, i);
        double gj = model.rate(k, j);
        --k[i];
        double gj_after_i = model.rate(k, j);
        ++k[i];
        --k[j];
        double gi_after_j = model.rate(k, i);
        ++k[j];
        double lhs = gi * gj_after_i;
        double rhs = gj * gi_after_j;
        double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
        if (std::fabs(lhs - rhs) > rel_tol * scale) {
          rep.ok = false;
          rep.i = i;
          rep.j = j;
          rep.k = k;
          rep.lhs = lhs;
          rep.rhs = rhs;
          return rep;
        }
      }
    }
  }
  return rep;
}

}  // namespace zrp
