#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zrp/kernel.hpp"
#include "zrp/rate_model.hpp"
#include "zrp/test_function.hpp"

namespace zrp {

// One harmonic of a test function: k, cosine and sine amplitudes.
struct ModeAmp {
  int k = 0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

TestFunction build_test_function(const std::vector<ModeAmp>& modes);

// Per-subcommand parameter block.  Parsing is strict per command: only the
// keys that command understands are accepted.
struct EstimatorParams {
  std::vector<ModeAmp> h, g;
  std::vector<int> radii, totals;
  std::vector<double> values, epsilons, lags;
  std::optional<int> ell, max_mode, steps;
  std::optional<double> dt, noise_factor, z_max;
  std::optional<std::string> channel, symbols, axis, estimator;
  std::optional<bool> fit_slope, frame_adjusted;
};

// Parsed, validated run configuration.  Unknown keys anywhere in the input
// are rejected; the canonical re-serialization (sorted keys, parsed values)
// is what gets hashed into the manifests, so formatting of the input file
// does not affect the config hash.
struct RunConfig {
  // model
  std::string family = "linear";
  int species = 1;
  int cap = 64;
  double coupling = 0.0;
  std::vector<std::vector<double>> rate_table;    // independent: per species, k = 1..cap
  std::vector<std::vector<double>> custom_rates;  // custom: flat (cap+1)^n per species

  // kernel + lattice
  double alpha = 1.0;
  double c_plus = 0.5;
  double c_minus = 0.5;
  int sites = 64;

  // target density, or a box to search for a scalar-Jacobian point
  bool frame_solve = false;
  std::vector<double> density;
  std::vector<double> frame_lo, frame_hi;

  // simulation
  double horizon = 0.5;
  int replicas = 100;
  std::uint64_t seed = 1;
  double grid_dt = 0.0;  // 0 = horizon / 64

  std::string out_dir = "out";
  std::map<std::string, EstimatorParams> estimators;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);

  nlohmann::json canonical_json() const;
  std::uint64_t config_hash() const;

  RateModel build_model() const;
  JumpKernel build_kernel() const;
  double effective_grid_dt() const { return grid_dt > 0.0 ? grid_dt : horizon / 64.0; }
  const EstimatorParams* params(const std::string& command) const;

  // flat index into a custom rate table: species 0 most significant
  std::size_t state_index(const int* k) const;
};

}  // namespace zrp
