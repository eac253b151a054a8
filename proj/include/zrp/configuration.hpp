#pragma once

#include <stdexcept>
#include <vector>

namespace zrp {

// Occupancy field on the periodic lattice; counts stored site-major, with
// per-species totals maintained as the conserved quantities.
class Configuration {
 public:
  Configuration(int sites, int species)
      : sites_(sites),
        species_(species),
        counts_(static_cast<std::size_t>(sites) * species, 0),
        totals_(species, 0) {
    if (sites < 2 || species < 1)
      throw std::invalid_argument("Configuration: need >= 2 sites, >= 1 species");
  }

  int sites() const { return sites_; }
  int species() const { return species_; }

  int at(int x, int i) const { return counts_[idx(x, i)]; }
  const int* site(int x) const { return counts_.data() + idx(x, 0); }
  const std::vector<int>& raw() const { return counts_; }

  long total(int i) const { return totals_[i]; }
  long total_particles() const {
    long s = 0;
    for (long t : totals_) s += t;
    return s;
  }

  void set(int x, int i, int v) {
    if (v < 0) throw std::invalid_argument("negative occupancy");
    totals_[i] += v - counts_[idx(x, i)];
    counts_[idx(x, i)] = v;
  }

  // move one particle of species i from x to y; totals are untouched
  void move(int x, int y, int i) {
    int& src = counts_[idx(x, i)];
    if (src <= 0) throw std::logic_error("Configuration::move from empty site");
    --src;
    ++counts_[idx(y, i)];
  }

  bool operator==(const Configuration& o) const {
    return counts_ == o.counts_;
  }

 private:
  std::size_t idx(int x, int i) const {
    return static_cast<std::size_t>(x) * species_ + i;
  }

  int sites_, species_;
  std::vector<int> counts_;
  std::vector<long> totals_;
};

}  // namespace zrp
