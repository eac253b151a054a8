#pragma once

#include <vector>

#include "zrp/alias_table.hpp"
#include "zrp/configuration.hpp"
#include "zrp/fenwick.hpp"
#include "zrp/kernel.hpp"
#include "zrp/rate_model.hpp"
#include "zrp/rng.hpp"

namespace zrp {

// Event-stream consumer for the jump process.  Callbacks fire in simulation
// order: on_interval covers a maximal span on which the state is constant,
// at_grid fires at every multiple of the grid step inside the run, on_jump
// fires after the state update.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void begin(double /*t*/, const Configuration&) {}
  // state was constant on [t0, t1)
  virtual void on_interval(double /*t0*/, double /*t1*/, const Configuration&) {}
  // one particle of species moved x -> y = x + z mod N; `after` is the
  // post-jump state
  virtual void on_jump(double /*t*/, int /*x*/, int /*y*/, long /*z*/,
                       int /*species*/, const Configuration& /*after*/) {}
  virtual void at_grid(long /*index*/, double /*t*/, const Configuration&) {}
};

struct RunStats {
  long events = 0;
  long rejected = 0;  // arrivals refused by the occupancy cap
  double final_time = 0.0;
  double max_rate_drift = 0.0;  // largest correction seen on activity refresh
};

// Continuous-time kinetic Monte Carlo for the accelerated zero range process
// with long-range jumps.  Site/species activities g_i(eta(x)) live in a
// Fenwick tree (O(log Nn) event selection and update); displacements come
// from an alias table over the truncated kernel; every event advances time by
// an exponential with rate N^alpha * kernel mass * total activity.
class KmcEngine {
 public:
  KmcEngine(const RateModel& model, const JumpKernel& kernel,
            Configuration init);

  const Configuration& configuration() const { return eta_; }
  double time() const { return t_; }
  const RunStats& stats() const { return stats_; }
  double total_activity() const { return activity_.total(); }
  double event_rate() const { return rate_scale_ * activity_.total(); }

  // Advance to `horizon`.  With grid_dt > 0 at_grid fires at every multiple
  // of grid_dt in (start, horizon]; grid indices count from the engine's
  // creation time.  Observers must outlive the call.
  void run(double horizon, double grid_dt, Rng& rng,
           const std::vector<Observer*>& observers = {});

 private:
  void refresh_site(int x);

  RateModel model_;
  JumpKernel kernel_;
  Configuration eta_;
  ActivityTree activity_;
  AliasTable displacement_;
  double rate_scale_;
  double t_ = 0.0;
  RunStats stats_;
};

}  // namespace zrp
