#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace zrp {

// Fenwick tree over non-negative activities with O(log n) update and
// O(log n) sampling by cumulative weight.  Raw values are kept alongside the
// tree so the structure can be rebuilt exactly to flush accumulated
// floating-point drift.
class ActivityTree {
 public:
  explicit ActivityTree(int n) : n_(n), tree_(n + 1, 0.0), raw_(n, 0.0) {
    top_ = 1;
    while (top_ * 2 <= n_) top_ *= 2;
  }

  int size() const { return n_; }

  double value(int i) const { return raw_[i]; }

  void set(int i, double v) { add(i, v - raw_[i]); }

  void add(int i, double d) {
    raw_[i] += d;
    for (int j = i + 1; j <= n_; j += j & (-j)) tree_[j] += d;
  }

  // sum of raw_[0..i)
  double prefix(int i) const {
    double s = 0.0;
    for (int j = i; j > 0; j -= j & (-j)) s += tree_[j];
    return s;
  }

  double total() const { return prefix(n_); }

  // Smallest index i with prefix(i+1) > target.  target must lie in
  // [0, total()); zero-weight slots are skipped defensively.
  int find(double target) const {
    int pos = 0;
    for (int k = top_; k > 0; k >>= 1) {
      int nxt = pos + k;
      if (nxt <= n_ && tree_[nxt] <= target) {
        pos = nxt;
        target -= tree_[nxt];
      }
    }
    if (pos >= n_) pos = n_ - 1;
    while (pos < n_ - 1 && raw_[pos] <= 0.0) ++pos;
    return pos;
  }

  // Recompute internal nodes from raw values; returns |total before - after|.
  double rebuild() {
    double before = total();
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (int i = 0; i < n_; ++i) {
      double v = raw_[i];
      for (int j = i + 1; j <= n_; j += j & (-j)) tree_[j] += v;
    }
    return std::fabs(before - total());
  }

 private:
  int n_;
  int top_;
  std::vector<double> tree_;
  std::vector<double> raw_;
};

}  // namespace zrp
