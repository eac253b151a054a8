#pragma once

#include <stdexcept>
#include <vector>

#include "zrp/rng.hpp"

namespace zrp {

// Vose alias table: O(n) construction, O(1) sampling from a fixed discrete
// distribution.  Weights need not be normalized.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights) {
    const int n = static_cast<int>(weights.size());
    if (n == 0) throw std::invalid_argument("AliasTable: empty weights");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("AliasTable: negative weight");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("AliasTable: zero total weight");
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<int> small, large;
    for (int i = 0; i < n; ++i) {
      scaled[i] = weights[i] * n / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      int s = small.back();
      small.pop_back();
      int l = large.back();
      large.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    for (int i : large) prob_[i] = 1.0;
    for (int i : small) prob_[i] = 1.0;  // residual rounding
  }

  int size() const { return static_cast<int>(prob_.size()); }

  int sample(Rng& rng) const {
    const int n = size();
    double u = rng.uniform() * n;
    int i = static_cast<int>(u);
    if (i >= n) i = n - 1;
    double frac = u - i;
    return frac < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
};

}  // namespace zrp
