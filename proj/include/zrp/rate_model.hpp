#pragma once

#include <functional>
#include <string>
#include <vector>

namespace zrp {

// Per-site occupancy vector: counts[i] particles of species i.
using Occupancy = std::vector<int>;

enum class RateFamily {
  Independent,       // g_i(k) = h_i(k_i)
  ConstantRate,      // g_i(k) = 1{k_i >= 1}
  Linear,            // g_i(k) = k_i
  PotentialCoupled,  // g_i(k) = k_i * exp(coupling * sum_{j != i} k_j)
  Custom,            // rates supplied directly (may violate compatibility)
};

// Interaction model on a single site.  Rates for the built-in families derive
// from a potential V via g_i(k) = exp(V(k) - V(k - e_i)), which guarantees the
// cross-species compatibility identity
//   g_i(k) g_j(k - e_i) = g_j(k) g_i(k - e_j).
// Occupancies are capped at `cap` per species per site; the cap bounds state
// enumeration and the simulator rejects jumps that would exceed it.
class RateModel {
 public:
  static RateModel linear(int n, int cap = 64);
  static RateModel constant_rate(int n, int cap = 64);
  static RateModel potential_coupled(int n, double coupling, int cap = 64);
  // h[i][k-1] is the jump rate of species i at occupancy k, k = 1..cap.
  static RateModel independent(std::vector<std::vector<double>> h);
  // Arbitrary rate table for compatibility testing; g(k, i) must vanish when
  // k_i = 0.
  static RateModel custom(int n, int cap,
                          std::function<double(const int*, int)> g);

  int species() const { return n_; }
  int cap() const { return cap_; }
  RateFamily family() const { return family_; }
  double coupling() const { return coupling_; }
  std::string family_name() const;

  // V(k); defined for the potential-based families.
  double potential(const int* k) const;
  double potential(const Occupancy& k) const { return potential(k.data()); }

  // g_i(k); zero when k_i = 0.
  double rate(const int* k, int i) const;
  double rate(const Occupancy& k, int i) const { return rate(k.data(), i); }

  bool has_potential() const { return family_ != RateFamily::Custom; }

  // Smallest positive rate over the capped range (per species minimum over
  // occupancies with k_i >= 1).
  double min_positive_rate() const;
  // inf over the capped range of g_i(k + e_i) - g_i(k); a positive value is a
  // sufficient condition for the uniform spectral-gap bound.
  double min_rate_increment() const;
  // inf of V(k)/|k|_1 over the capped range (k != 0): linear lower bound on
  // the potential growth.
  double potential_growth_bound() const;

  // Enumerate all occupancies with entries in [0, cap].
  std::vector<Occupancy> enumerate_site_states() const;

  // Same family with the cap raised by `extra`; used to estimate how much
  // probability mass the cap discards.  Independent tables are padded with
  // their final entry.
  RateModel extended(int extra) const;

 private:
  RateModel() = default;

  int n_ = 1;
  int cap_ = 64;
  RateFamily family_ = RateFamily::Linear;
  double coupling_ = 0.0;
  std::vector<std::vector<double>> h_;         // Independent rates
  std::vector<std::vector<double>> cum_log_h_; // prefix sums of log h
  std::vector<double> log_fact_;               // log k!
  std::vector<double> exp_coupling_;           // exp(coupling * s), s = 0..n*cap
  std::function<double(const int*, int)> custom_rate_;
};

struct CompatibilityReport {
  bool ok = true;
  int i = -1, j = -1;
  Occupancy k;
  double lhs = 0.0, rhs = 0.0;
};

// Check g_i(k) g_j(k - e_i) = g_j(k) g_i(k - e_j) for all i < j over the
// capped state space; returns the first violation beyond relative tolerance.
CompatibilityReport check_compatibility(const RateModel& model,
                                        double rel_tol = 1e-12);

}  // namespace zrp
