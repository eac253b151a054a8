#include "zrp/kmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace zrp {

KmcEngine::KmcEngine(const RateModel& model, const JumpKernel& kernel,
                     Configuration init)
    : model_(model),
      kernel_(kernel),
      eta_(std::move(init)),
      activity_(static_cast<std::size_t>(eta_.sites()) * eta_.species()),
      displacement_(kernel.displacement_probs()),
      rate_scale_(std::pow(kernel.lattice(), kernel.alpha()) * kernel.mass()) {
  if (eta_.sites() != kernel_.lattice())
    throw std::invalid_argument("KmcEngine: kernel lattice != configuration");
  if (eta_.species() != model_.species())
    throw std::invalid_argument("KmcEngine: species mismatch");
  for (int x = 0; x < eta_.sites(); ++x) {
    for (int i = 0; i < eta_.species(); ++i) {
      if (eta_.at(x, i) > model_.cap())
        throw std::invalid_argument("KmcEngine: initial occupancy above cap");
    }
    refresh_site(x);
  }
}

void KmcEngine::refresh_site(int x) {
  int n = eta_.species();
  const int* k = eta_.site(x);
  for (int i = 0; i < n; ++i)
    activity_.set(static_cast<std::size_t>(x) * n + i, model_.rate(k, i));
}

void KmcEngine::run(double horizon, double grid_dt, Rng& rng,
                    const std::vector<Observer*>& observers) {
  if (horizon < t_) throw std::invalid_argument("KmcEngine: horizon in past");
  const int N = eta_.sites();
  const int n = eta_.species();
  constexpr long kRefreshEvery = 1L << 20;

  for (Observer* o : observers) o->begin(t_, eta_);

  long grid_index =
      grid_dt > 0.0 ? static_cast<long>(std::floor(t_ / grid_dt + 1e-12)) : 0;
  auto next_grid_time = [&]() {
    return grid_dt > 0.0 ? (grid_index + 1) * grid_dt
                         : std::numeric_limits<double>::infinity();
  };

  while (t_ < horizon) {
    double total = activity_.total();
    double t_next;
    if (total > 0.0)
      t_next = t_ + rng.exponential(rate_scale_ * total);
    else
      t_next = std::numeric_limits<double>::infinity();

    // emit grid points (state is constant until t_next)
    double stop = std::min(t_next, horizon);
    while (next_grid_time() <= stop + 1e-12 * std::max(1.0, stop) &&
           next_grid_time() <= horizon * (1.0 + 1e-12)) {
      double tg = std::min(next_grid_time(), horizon);
      for (Observer* o : observers) o->on_interval(t_, tg, eta_);
      ++grid_index;
      for (Observer* o : observers) o->at_grid(grid_index, tg, eta_);
      t_ = tg;
    }
    if (t_next > horizon) {
      if (t_ < horizon) {
        for (Observer* o : observers) o->on_interval(t_, horizon, eta_);
        t_ = horizon;
      }
      break;
    }
    if (t_next > t_)
      for (Observer* o : observers) o->on_interval(t_, t_next, eta_);
    t_ = t_next;

    // pick (site, species) proportional to activity, then a displacement
    std::size_t leaf = activity_.find(rng.uniform() * total);
    int x = static_cast<int>(leaf / n);
    int i = static_cast<int>(leaf % n);
    long z = kernel_.displacement_from_index(displacement_.sample(rng));
    int y = static_cast<int>(((x + z) % N + N) % N);

    ++stats_.events;
    if (eta_.at(y, i) >= model_.cap()) {
      ++stats_.rejected;  // arrival refused, clock still advanced
    } else {
      eta_.move(x, y, i);
      refresh_site(x);
      refresh_site(y);
      for (Observer* o : observers) o->on_jump(t_, x, y, z, i, eta_);
    }

    if (stats_.events % kRefreshEvery == 0) {
      double drift = activity_.rebuild();
      stats_.max_rate_drift = std::max(stats_.max_rate_drift, drift);
    }
  }
  stats_.final_time = t_;
}

}  // namespace zrp
