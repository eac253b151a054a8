#include "zrp/run_config.hpp"

#include "zrp/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace zrp {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      bad("unknown key '" + item.key() + "' in " + where);
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where + " must be an integer");
  return j.get<int>();
}

std::vector<double> num_list(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(num(v, where + " entry"));
  return out;
}

std::vector<int> int_list(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + " must be an array");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(integer(v, where + " entry"));
  return out;
}

std::vector<ModeAmp> mode_list(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + " must be an array of [k, cos, sin] triples");
  std::vector<ModeAmp> out;
  for (const auto& v : j) {
    if (!v.is_array() || v.size() < 2 || v.size() > 3)
      bad(where + " entries must be [k, cos] or [k, cos, sin]");
    ModeAmp m;
    m.k = integer(v[0], where + " mode index");
    m.cos_amp = num(v[1], where + " cosine amplitude");
    if (v.size() == 3) m.sin_amp = num(v[2], where + " sine amplitude");
    if (m.k < 0) bad(where + " mode index must be >= 0");
    if (m.k == 0 && m.sin_amp != 0.0) bad(where + " mode 0 has no sine part");
    out.push_back(m);
  }
  return out;
}

json modes_to_json(const std::vector<ModeAmp>& modes) {
  json a = json::array();
  for (const auto& m : modes) a.push_back({m.k, m.cos_amp, m.sin_amp});
  return a;
}

EstimatorParams parse_params(const std::string& command, const json& j) {
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"validate", {"z_max"}},
      {"sample", {}},
      {"simulate", {"h"}},
      {"decompose", {"h"}},
      {"qv", {"h", "g"}},
      {"bg1", {"h", "ell"}},
      {"bg2", {"h", "ell"}},
      {"energy", {"h", "epsilons"}},
      {"gap", {"radii", "totals", "fit_slope"}},
      {"ou", {"h", "g", "max_mode", "steps", "dt", "noise_factor", "symbols",
              "frame_adjusted", "lags"}},
      {"burgers", {"h", "max_mode", "steps", "dt", "noise_factor", "symbols"}},
      {"sweep", {"axis", "values", "estimator", "h", "ell", "epsilons",
                 "fit_slope"}},
      {"compare", {"z_max", "channel"}},
  };
  auto it = allowed.find(command);
  if (it == allowed.end()) bad("unknown estimator block '" + command + "'");
  check_keys(j, "estimators." + command, it->second);

  EstimatorParams p;
  const std::string where = "estimators." + command + ".";
  if (j.contains("h")) p.h = mode_list(j["h"], where + "h");
  if (j.contains("g")) p.g = mode_list(j["g"], where + "g");
  if (j.contains("radii")) p.radii = int_list(j["radii"], where + "radii");
  if (j.contains("totals")) p.totals = int_list(j["totals"], where + "totals");
  if (j.contains("values")) p.values = num_list(j["values"], where + "values");
  if (j.contains("epsilons")) p.epsilons = num_list(j["epsilons"], where + "epsilons");
  if (j.contains("lags")) p.lags = num_list(j["lags"], where + "lags");
  if (j.contains("ell")) p.ell = integer(j["ell"], where + "ell");
  if (j.contains("max_mode")) p.max_mode = integer(j["max_mode"], where + "max_mode");
  if (j.contains("steps")) p.steps = integer(j["steps"], where + "steps");
  if (j.contains("dt")) p.dt = num(j["dt"], where + "dt");
  if (j.contains("noise_factor")) p.noise_factor = num(j["noise_factor"], where + "noise_factor");
  if (j.contains("z_max")) p.z_max = num(j["z_max"], where + "z_max");
  if (j.contains("channel")) p.channel = j["channel"].get<std::string>();
  if (j.contains("symbols")) p.symbols = j["symbols"].get<std::string>();
  if (j.contains("axis")) p.axis = j["axis"].get<std::string>();
  if (j.contains("estimator")) p.estimator = j["estimator"].get<std::string>();
  if (j.contains("fit_slope")) {
    if (!j["fit_slope"].is_boolean()) bad(where + "fit_slope must be a boolean");
    p.fit_slope = j["fit_slope"].get<bool>();
  }
  if (j.contains("frame_adjusted")) {
    if (!j["frame_adjusted"].is_boolean()) bad(where + "frame_adjusted must be a boolean");
    p.frame_adjusted = j["frame_adjusted"].get<bool>();
  }
  return p;
}

json params_to_json(const EstimatorParams& p) {
  json j = json::object();
  if (!p.h.empty()) j["h"] = modes_to_json(p.h);
  if (!p.g.empty()) j["g"] = modes_to_json(p.g);
  if (!p.radii.empty()) j["radii"] = p.radii;
  if (!p.totals.empty()) j["totals"] = p.totals;
  if (!p.values.empty()) j["values"] = p.values;
  if (!p.epsilons.empty()) j["epsilons"] = p.epsilons;
  if (!p.lags.empty()) j["lags"] = p.lags;
  if (p.ell) j["ell"] = *p.ell;
  if (p.max_mode) j["max_mode"] = *p.max_mode;
  if (p.steps) j["steps"] = *p.steps;
  if (p.dt) j["dt"] = *p.dt;
  if (p.noise_factor) j["noise_factor"] = *p.noise_factor;
  if (p.z_max) j["z_max"] = *p.z_max;
  if (p.channel) j["channel"] = *p.channel;
  if (p.symbols) j["symbols"] = *p.symbols;
  if (p.axis) j["axis"] = *p.axis;
  if (p.estimator) j["estimator"] = *p.estimator;
  if (p.fit_slope) j["fit_slope"] = *p.fit_slope;
  if (p.frame_adjusted) j["frame_adjusted"] = *p.frame_adjusted;
  return j;
}

std::vector<std::vector<double>> table(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) bad(where + " must be a non-empty array of arrays");
  std::vector<std::vector<double>> out;
  for (const auto& row : j) out.push_back(num_list(row, where + " row"));
  return out;
}

}  // namespace

TestFunction build_test_function(const std::vector<ModeAmp>& modes) {
  if (modes.empty()) bad("empty mode list for a test function");
  int deg = 0;
  for (const auto& m : modes) deg = std::max(deg, m.k);
  TestFunction h(deg);
  for (const auto& m : modes) {
    TestFunction part = TestFunction::harmonic(m.k, m.cos_amp, m.sin_amp);
    h += part;
  }
  return h;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j, "top level",
             {"model", "kernel", "lattice", "density", "sim", "output", "estimators"});

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"family", "species", "cap", "coupling", "rate_table", "rates"});
    if (m.contains("family")) c.family = m["family"].get<std::string>();
    static const std::set<std::string> families = {
        "linear", "constant_rate", "potential_coupled", "independent", "custom"};
    if (!families.count(c.family)) bad("unknown model.family '" + c.family + "'");
    if (m.contains("species")) c.species = integer(m["species"], "model.species");
    if (m.contains("cap")) c.cap = integer(m["cap"], "model.cap");
    if (m.contains("coupling")) {
      if (c.family != "potential_coupled") bad("model.coupling only applies to potential_coupled");
      c.coupling = num(m["coupling"], "model.coupling");
    }
    if (m.contains("rate_table")) {
      if (c.family != "independent") bad("model.rate_table only applies to independent");
      c.rate_table = table(m["rate_table"], "model.rate_table");
    }
    if (m.contains("rates")) {
      if (c.family != "custom") bad("model.rates only applies to custom");
      c.custom_rates = table(m["rates"], "model.rates");
    }
    if (c.family == "independent") {
      if (c.rate_table.empty()) bad("independent family requires model.rate_table");
      if (m.contains("species") && c.species != static_cast<int>(c.rate_table.size()))
        bad("model.species disagrees with rate_table row count");
      c.species = static_cast<int>(c.rate_table.size());
      std::size_t len = c.rate_table[0].size();
      for (const auto& row : c.rate_table)
        if (row.size() != len) bad("model.rate_table rows must have equal length");
      if (m.contains("cap") && c.cap != static_cast<int>(len))
        bad("model.cap disagrees with rate_table row length");
      c.cap = static_cast<int>(len);
    }
    if (c.family == "custom") {
      if (c.custom_rates.empty()) bad("custom family requires model.rates");
      if (!m.contains("species") || !m.contains("cap"))
        bad("custom family requires explicit model.species and model.cap");
      if (static_cast<int>(c.custom_rates.size()) != c.species)
        bad("model.rates needs one table per species");
      std::size_t states = 1;
      for (int i = 0; i < c.species; ++i) states *= static_cast<std::size_t>(c.cap + 1);
      for (const auto& row : c.custom_rates)
        if (row.size() != states)
          bad("model.rates tables must have (cap+1)^species entries");
    }
    if (c.species < 1) bad("model.species must be >= 1");
    if (c.cap < 1) bad("model.cap must be >= 1");
  }

  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    check_keys(k, "kernel", {"alpha", "c_plus", "c_minus"});
    if (k.contains("alpha")) c.alpha = num(k["alpha"], "kernel.alpha");
    if (k.contains("c_plus")) c.c_plus = num(k["c_plus"], "kernel.c_plus");
    if (k.contains("c_minus")) c.c_minus = num(k["c_minus"], "kernel.c_minus");
    if (c.alpha <= 0.0) bad("kernel.alpha must be positive");
    if (c.c_plus < 0.0 || c.c_minus < 0.0 || c.c_plus + c.c_minus <= 0.0)
      bad("kernel weights must be nonnegative with a positive sum");
  }

  if (j.contains("lattice")) {
    const json& l = j["lattice"];
    check_keys(l, "lattice", {"sites"});
    if (l.contains("sites")) c.sites = integer(l["sites"], "lattice.sites");
    if (c.sites < 2) bad("lattice.sites must be >= 2");
  }

  if (j.contains("density")) {
    const json& d = j["density"];
    check_keys(d, "density", {"values", "frame_solve"});
    if (d.contains("values") == d.contains("frame_solve"))
      bad("density needs exactly one of 'values' or 'frame_solve'");
    if (d.contains("values")) {
      c.density = num_list(d["values"], "density.values");
      if (static_cast<int>(c.density.size()) != c.species)
        bad("density.values length must equal model.species");
      for (double r : c.density)
        if (!(r > 0.0) || !(r < c.cap)) bad("density entries must lie in (0, cap)");
    } else {
      const json& f = d["frame_solve"];
      check_keys(f, "density.frame_solve", {"lo", "hi"});
      c.frame_solve = true;
      c.frame_lo = f.contains("lo") ? num_list(f["lo"], "density.frame_solve.lo")
                                    : std::vector<double>(c.species, 0.05);
      c.frame_hi = f.contains("hi") ? num_list(f["hi"], "density.frame_solve.hi")
                                    : std::vector<double>(c.species, 2.0);
      if (static_cast<int>(c.frame_lo.size()) != c.species ||
          static_cast<int>(c.frame_hi.size()) != c.species)
        bad("density.frame_solve box must have one bound per species");
      for (int i = 0; i < c.species; ++i)
        if (!(c.frame_lo[i] > 0.0) || !(c.frame_hi[i] > c.frame_lo[i]))
          bad("density.frame_solve box must satisfy 0 < lo < hi");
    }
  } else {
    c.density.assign(c.species, 0.5);
  }
  if (!c.frame_solve && c.density.empty()) c.density.assign(c.species, 0.5);

  if (j.contains("sim")) {
    const json& s = j["sim"];
    check_keys(s, "sim", {"horizon", "replicas", "seed", "grid_dt"});
    if (s.contains("horizon")) c.horizon = num(s["horizon"], "sim.horizon");
    if (s.contains("replicas")) c.replicas = integer(s["replicas"], "sim.replicas");
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned() && !s["seed"].is_number_integer())
        bad("sim.seed must be an integer");
      c.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("grid_dt")) c.grid_dt = num(s["grid_dt"], "sim.grid_dt");
    if (!(c.horizon > 0.0)) bad("sim.horizon must be positive");
    if (c.replicas < 1) bad("sim.replicas must be >= 1");
    if (c.grid_dt < 0.0) bad("sim.grid_dt must be >= 0");
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, "output", {"directory"});
    if (o.contains("directory")) c.out_dir = o["directory"].get<std::string>();
  }

  if (j.contains("estimators")) {
    if (!j["estimators"].is_object()) bad("estimators must be an object");
    for (const auto& item : j["estimators"].items())
      c.estimators[item.key()] = parse_params(item.key(), item.value());
  }

  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad("parse error in '" + path + "': " + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    bad("malformed value in '" + path + "': " + e.what());
  }
}

json RunConfig::canonical_json() const {
  json j;
  j["model"]["family"] = family;
  j["model"]["species"] = species;
  j["model"]["cap"] = cap;
  if (family == "potential_coupled") j["model"]["coupling"] = coupling;
  if (family == "independent") j["model"]["rate_table"] = rate_table;
  if (family == "custom") j["model"]["rates"] = custom_rates;
  j["kernel"]["alpha"] = alpha;
  j["kernel"]["c_plus"] = c_plus;
  j["kernel"]["c_minus"] = c_minus;
  j["lattice"]["sites"] = sites;
  if (frame_solve) {
    j["density"]["frame_solve"]["lo"] = frame_lo;
    j["density"]["frame_solve"]["hi"] = frame_hi;
  } else {
    j["density"]["values"] = density;
  }
  j["sim"]["horizon"] = horizon;
  j["sim"]["replicas"] = replicas;
  j["sim"]["seed"] = seed;
  j["sim"]["grid_dt"] = grid_dt;
  // the output location is recorded in the manifest but kept out of the
  // canonical form: moving a run must not change its config hash
  json est = json::object();
  for (const auto& [name, p] : estimators) est[name] = params_to_json(p);
  j["estimators"] = est;
  return j;
}

std::uint64_t RunConfig::config_hash() const {
  return fnv1a64(canonical_json().dump());
}

std::size_t RunConfig::state_index(const int* k) const {
  std::size_t idx = 0;
  for (int i = 0; i < species; ++i)
    idx = idx * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(k[i]);
  return idx;
}

RateModel RunConfig::build_model() const {
  if (family == "linear") return RateModel::linear(species, cap);
  if (family == "constant_rate") return RateModel::constant_rate(species, cap);
  if (family == "potential_coupled")
    return RateModel::potential_coupled(species, coupling, cap);
  if (family == "independent") return RateModel::independent(rate_table);
  // custom: capture a copy of the flat tables
  auto tables = custom_rates;
  int n = species, kcap = cap;
  return RateModel::custom(n, kcap, [tables, n, kcap](const int* k, int i) {
    std::size_t idx = 0;
    for (int s = 0; s < n; ++s)
      idx = idx * static_cast<std::size_t>(kcap + 1) + static_cast<std::size_t>(k[s]);
    return tables[static_cast<std::size_t>(i)][idx];
  });
}

JumpKernel RunConfig::build_kernel() const {
  return JumpKernel(alpha, c_plus, c_minus, sites);
}

const EstimatorParams* RunConfig::params(const std::string& command) const {
  auto it = estimators.find(command);
  return it == estimators.end() ? nullptr : &it->second;
}

}  // namespace zrp
