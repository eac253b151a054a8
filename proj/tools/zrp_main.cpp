// Command-line harness around the simulator: one subcommand per artifact
// (validation report, stationary sampling, field trajectories, drift
// decomposition, quadratic variation, block-replacement residuals, energy
// functional, canonical relaxation times, reference limit chains, axis
// sweeps, and trajectory comparison).  Every run writes CSV plus a JSON
// manifest carrying the canonical config hash and the derived RNG stream
// ids, and reruns with the same (config, seed) reproduce the outputs byte
// for byte.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zrp/canonical.hpp"
#include "zrp/ensemble.hpp"
#include "zrp/fields.hpp"
#include "zrp/kernel.hpp"
#include "zrp/kmc.hpp"
#include "zrp/manifest.hpp"
#include "zrp/operators.hpp"
#include "zrp/ou.hpp"
#include "zrp/rng.hpp"
#include "zrp/run_config.hpp"
#include "zrp/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zrp;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

std::string fmt(double v) { return CsvFile::num(v); }
std::string fmt(std::int64_t v) { return CsvFile::num(v); }
std::string fmt(int v) { return CsvFile::num(static_cast<std::int64_t>(v)); }

// report-facing rounding; CSVs keep the full %.17g
std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

Configuration product_config(int sites, const SiteSampler& sampler, Rng& rng) {
  const Occupancy& first = sampler.draw(rng);
  Configuration eta(sites, static_cast<int>(first.size()));
  for (int i = 0; i < eta.species(); ++i) eta.set(0, i, first[i]);
  for (int x = 1; x < sites; ++x) {
    const Occupancy& occ = sampler.draw(rng);
    for (int i = 0; i < eta.species(); ++i) eta.set(x, i, occ[i]);
  }
  return eta;
}

std::vector<ModeTracker::SiteFunction> rate_channels(const RateModel& model) {
  std::vector<ModeTracker::SiteFunction> out;
  for (int i = 0; i < model.species(); ++i)
    out.push_back([model, i](const int* occ) { return model.rate(occ, i); });
  return out;
}

// g_i - g_mean_i - sum_j lambda_ij (occ_j - rho_j): the centred local part
// whose linear shadow vanishes, the right channel for the second-order block
// replacement.
std::vector<ModeTracker::SiteFunction> residual_channels(const RateModel& model,
                                                         const DensityPoint& pt) {
  std::vector<ModeTracker::SiteFunction> out;
  int n = model.species();
  for (int i = 0; i < n; ++i)
    out.push_back([model, i, n, g = pt.g_mean, lam = pt.lambda,
                   rho = pt.rho](const int* occ) {
      double v = model.rate(occ, i) - g[i];
      for (int j = 0; j < n; ++j) v -= lam(i, j) * (occ[j] - rho[j]);
      return v;
    });
  return out;
}

// block half-width balancing the replacement-error terms
int default_ell(const RunConfig& c) {
  double e = (1.0 + c.alpha) / (2.0 + c.alpha);
  int ell = static_cast<int>(std::lround(std::pow(static_cast<double>(c.sites), e)));
  return std::max(1, std::min(ell, (c.sites - 1) / 2));
}

TestFunction h_from(const EstimatorParams* p, bool secondary = false) {
  if (p) {
    const std::vector<ModeAmp>& m = secondary ? p->g : p->h;
    if (!m.empty()) return build_test_function(m);
    if (secondary && !p->h.empty()) return build_test_function(p->h);
  }
  return TestFunction::harmonic(1, 1.0, 0.0);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads <= 1) {
    for (int r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int r; (r = next.fetch_add(1)) < count;) {
        try {
          fn(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::vector<std::uint64_t> stream_ids(const RunConfig& c) {
  std::vector<std::uint64_t> ids;
  ids.reserve(c.replicas);
  for (int r = 0; r < c.replicas; ++r)
    ids.push_back(derive_stream(c.seed, static_cast<std::uint64_t>(r)));
  return ids;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void emit_manifest(const RunConfig& c, const std::string& command,
                   const std::vector<std::string>& outputs,
                   const json& extra = json::object(),
                   bool with_streams = true) {
  write_manifest(out_path(c, command + "_manifest.json"), command,
                 c.canonical_json(), c.config_hash(), c.seed,
                 with_streams ? stream_ids(c) : std::vector<std::uint64_t>{},
                 outputs, extra);
}

// ---- resolved physical setup shared by the simulation commands ----

struct Resolved {
  RateModel model;
  JumpKernel kernel;
  Ensemble ensemble;
  DensityPoint point;
  double lambda_scalar = 0.0;
  double frame_error = 0.0;  // off-diagonal max + diagonal spread of lambda
  FieldFrame frame;
};

Resolved resolve(const RunConfig& c) {
  RateModel model = c.build_model();
  if (!model.has_potential())
    bad("the custom rate family has no product measure; only 'validate' accepts it");
  JumpKernel kernel = c.build_kernel();
  Ensemble ensemble(model);
  DensityPoint pt;
  if (c.frame_solve) {
    FrameSearchResult res =
        find_frame_density(ensemble, to_vec(c.frame_lo), to_vec(c.frame_hi));
    pt = res.point;
    if (!res.satisfied)
      std::cerr << "note: frame solve reached off-diagonal max "
                << res.off_diag_max << ", diagonal spread " << res.diag_spread
                << "; using the best point found\n";
  } else {
    pt = ensemble.at_density(to_vec(c.density));
  }
  int n = model.species();
  double diag = pt.lambda.diagonal().mean();
  double err = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      err = std::max(err, std::abs(pt.lambda(i, j) - (i == j ? diag : 0.0)));
  FieldFrame frame = kernel.frame_constant() != 0.0
                         ? FieldFrame::drifting(kernel, diag)
                         : FieldFrame::fixed();
  return Resolved{std::move(model), std::move(kernel), std::move(ensemble),
                  std::move(pt),    diag,              err,
                  frame};
}

// ---- grid sampling of the fluctuation field (shared CSV schema) ----

struct FieldRow {
  double t;
  int species;
  double value;
};

class FieldSampleObserver : public Observer {
 public:
  FieldSampleObserver(TestFunction h, Eigen::VectorXd rho, FieldFrame frame)
      : h_(std::move(h)), rho_(std::move(rho)), frame_(frame) {}

  void begin(double t, const Configuration& eta) override { record(t, eta); }
  void at_grid(long, double t, const Configuration& eta) override {
    record(t, eta);
  }

  const std::vector<FieldRow>& rows() const { return rows_; }

 private:
  void record(double t, const Configuration& eta) {
    double delta = frame_.delta(t);
    for (int i = 0; i < static_cast<int>(rho_.size()); ++i)
      rows_.push_back({t, i, fluctuation_field(eta, i, rho_[i], h_, delta)});
  }

  TestFunction h_;
  Eigen::VectorXd rho_;
  FieldFrame frame_;
  std::vector<FieldRow> rows_;
};

void write_field_csv(const std::string& path,
                     const std::vector<std::vector<FieldRow>>& per_replica) {
  CsvFile csv(path, {"replica", "time", "species", "value"});
  for (std::size_t r = 0; r < per_replica.size(); ++r)
    for (const FieldRow& row : per_replica[r])
      csv.write_row({fmt(static_cast<std::int64_t>(r)), fmt(row.t),
                     fmt(row.species), fmt(row.value)});
}

// ---- validate ----

int cmd_validate(const RunConfig& c) {
  bool failed = false;
  json report = json::object();
  auto say = [&](const std::string& name, const std::string& status,
                 const std::string& detail) {
    std::cout << "check " << name << ": " << status
              << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    report[name] = {{"status", status}, {"detail", detail}};
    if (status == "FAIL") failed = true;
  };

  RateModel model = c.build_model();
  std::cout << "model: " << model.family_name() << ", species=" << model.species()
            << ", cap=" << model.cap() << "\n";

  CompatibilityReport comp = check_compatibility(model);
  if (comp.ok) {
    say("compatibility", "PASS", "");
  } else {
    std::ostringstream os;
    os << "i=" << comp.i << " j=" << comp.j << " k=(";
    for (std::size_t s = 0; s < comp.k.size(); ++s)
      os << (s ? "," : "") << comp.k[s];
    os << ") lhs=" << comp.lhs << " rhs=" << comp.rhs;
    say("compatibility", "FAIL", os.str());
  }

  double gmin = model.min_positive_rate();
  say("rate positivity", gmin > 0.0 ? "PASS" : "FAIL",
      "min positive rate = " + fmt6(gmin));

  double inc = model.min_rate_increment();
  say("rate increment", inc > 0.0 ? "PASS" : "WARN",
      "inf increment = " + fmt6(inc) +
          (inc > 0.0 ? "" : "; relaxation-time scaling not certified by the "
                            "increment condition"));

  if (model.has_potential()) {
    double growth = model.potential_growth_bound();
    say("potential growth", "INFO", "linear lower bound = " + fmt6(growth));
  }

  JumpKernel kernel = c.build_kernel();
  say("kernel truncation", "INFO",
      "radius = " + fmt(kernel.radius()) + ", relative mass deficit = " +
          fmt6(kernel.mass_deficit() / kernel.untruncated_mass()));

  if (model.has_potential()) {
    Ensemble ensemble(model);
    DensityPoint pt;
    double frame_err = 0.0;
    if (c.frame_solve) {
      FrameSearchResult res =
          find_frame_density(ensemble, to_vec(c.frame_lo), to_vec(c.frame_hi));
      pt = res.point;
      frame_err = std::max(res.off_diag_max, res.diag_spread);
      std::ostringstream os;
      os << "rho = (";
      for (int i = 0; i < pt.rho.size(); ++i)
        os << (i ? "," : "") << fmt6(pt.rho[i]);
      os << "), off-diagonal max = " << fmt6(res.off_diag_max)
         << ", diagonal spread = " << fmt6(res.diag_spread);
      say("frame solve", res.satisfied ? "PASS" : "WARN", os.str());
    } else {
      pt = ensemble.at_density(to_vec(c.density));
      double diag = pt.lambda.diagonal().mean();
      for (int i = 0; i < model.species(); ++i)
        for (int j = 0; j < model.species(); ++j)
          frame_err = std::max(
              frame_err, std::abs(pt.lambda(i, j) - (i == j ? diag : 0.0)));
    }

    say("cap tail mass", pt.tail_mass <= 1e-6 ? "PASS" : "FAIL",
        fmt6(pt.tail_mass));

    {
      std::ostringstream os;
      os << "diag = (";
      for (int i = 0; i < model.species(); ++i)
        os << (i ? "," : "") << fmt6(pt.lambda(i, i));
      os << "), deviation from scalar = " << fmt6(frame_err);
      say("rate jacobian", "INFO", os.str());
    }

    bool frame_matters = kernel.frame_constant() != 0.0;
    if (frame_matters && frame_err > 1e-8)
      say("moving frame", "WARN",
          "rate jacobian is not scalar at this density; frame-dependent "
          "estimators are disabled");
    else
      say("moving frame", "PASS",
          frame_matters ? "scalar jacobian, frame speed = " +
                              fmt6(pt.lambda.diagonal().mean() *
                                   kernel.frame_constant() / kernel.lattice())
                        : "not required (zero frame constant)");

    report["density"] = std::vector<double>(pt.rho.data(),
                                            pt.rho.data() + pt.rho.size());
    report["rate_mean"] = std::vector<double>(
        pt.g_mean.data(), pt.g_mean.data() + pt.g_mean.size());
  } else {
    say("stationary measure", "INFO",
        "custom rates carry no product measure; sampling checks skipped");
  }

  std::cout << "validate: " << (failed ? "FAIL" : "OK") << "\n";
  report["result"] = failed ? "FAIL" : "OK";
  std::ofstream out(out_path(c, "validate.json"));
  out << report.dump(2) << "\n";
  emit_manifest(c, "validate", {"validate.json"}, json::object(), false);
  return failed ? 1 : 0;
}

// ---- sample ----

int cmd_sample(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  const auto& states = R.ensemble.site_states();
  std::vector<double> probs = R.ensemble.site_probabilities(R.point.mu);
  SiteSampler sampler(R.ensemble, R.point.mu);

  const int n = R.model.species(), cap = R.model.cap();
  std::vector<std::vector<std::int64_t>> slot(
      c.replicas, std::vector<std::int64_t>(states.size(), 0));
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    for (int x = 0; x < c.sites; ++x) ++slot[r][sampler.draw_index(rng)];
  });
  std::vector<std::int64_t> counts(states.size(), 0);
  for (const auto& s : slot)
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += s[i];
  double total = static_cast<double>(c.replicas) * c.sites;

  // per-species marginals with tail binning for the chi-square
  CsvFile csv(out_path(c, "sample.csv"),
              {"species", "occupancy", "count", "expected"});
  bool gate_ok = true;
  json stats = json::object();
  for (int i = 0; i < n; ++i) {
    std::vector<double> expect(cap + 1, 0.0);
    std::vector<std::int64_t> obs(cap + 1, 0);
    for (std::size_t s = 0; s < states.size(); ++s) {
      expect[states[s][i]] += probs[s] * total;
      obs[states[s][i]] += counts[s];
    }
    for (int v = 0; v <= cap; ++v)
      csv.write_row({fmt(i), fmt(v), fmt(obs[v]), fmt(expect[v])});

    // merge sparse upper occupancies until every bin expects >= 5
    double chi2 = 0.0;
    int bins = 0;
    double tail_e = 0.0, tail_o = 0.0;
    for (int v = cap; v >= 0; --v) {
      tail_e += expect[v];
      tail_o += static_cast<double>(obs[v]);
      if (tail_e >= 5.0 || v == 0) {
        chi2 += (tail_o - tail_e) * (tail_o - tail_e) / tail_e;
        ++bins;
        tail_e = tail_o = 0.0;
      }
    }
    int dof = std::max(1, bins - 1);
    double p = chi_square_tail(chi2, dof);
    std::cout << "species " << i << ": chi2 = " << chi2 << ", dof = " << dof
              << ", p = " << p << "\n";
    stats["species_" + std::to_string(i)] = {
        {"chi2", chi2}, {"dof", dof}, {"p", p}};
    if (p < 0.01 / n) gate_ok = false;
  }
  emit_manifest(c, "sample", {"sample.csv"}, stats);
  if (!gate_ok) {
    std::cout << "sample: marginal mismatch beyond the 0.01 aggregate level\n";
    return 3;
  }
  std::cout << "sample: OK\n";
  return 0;
}

// ---- simulate / ou / burgers (FieldSample producers) ----

int cmd_simulate(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  TestFunction h = h_from(c.params("simulate"));
  SiteSampler sampler(R.ensemble, R.point.mu);
  std::vector<std::vector<FieldRow>> rows(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    FieldSampleObserver obs(h, R.point.rho, R.frame);
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    rows[r] = obs.rows();
  });
  write_field_csv(out_path(c, "simulate.csv"), rows);

  RunningStat last;
  for (const auto& rr : rows)
    for (const FieldRow& row : rr)
      if (row.species == 0 && row.t == rows[0].back().t) last.push(row.value);
  std::cout << "simulate: " << c.replicas << " replicas, final-time species-0 "
            << "field mean = " << last.mean << " +- " << last.stderr_mean()
            << "\n";
  emit_manifest(c, "simulate", {"simulate.csv"});
  return 0;
}

OUSpec build_ou_spec(const RunConfig& c, const Resolved& R,
                     const EstimatorParams* p, const TestFunction& h) {
  int max_mode = p && p->max_mode ? *p->max_mode : h.degree();
  if (max_mode < 1) bad("reference chain needs max_mode >= 1");
  double nf = p && p->noise_factor ? *p->noise_factor : 2.0;
  std::string symbols = p && p->symbols ? *p->symbols : "discrete";
  if (symbols == "continuum")
    return ou_spec_continuum(R.point, c.alpha, c.c_plus, c.c_minus, max_mode, nf);
  if (symbols != "discrete") bad("symbols must be 'discrete' or 'continuum'");
  bool frame_adj = p && p->frame_adjusted ? *p->frame_adjusted
                                          : R.kernel.frame_constant() != 0.0;
  return ou_spec_discrete(R.point, R.kernel, max_mode, frame_adj, nf);
}

template <class Chain, class Maker>
int run_reference_chain(const RunConfig& c, int threads, const char* name,
                        const TestFunction& h, const Maker& make) {
  double dt = c.effective_grid_dt();
  int steps = static_cast<int>(std::lround(c.horizon / dt));
  int n = c.species;
  std::vector<std::vector<FieldRow>> rows(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    Chain chain = make();
    chain.init_stationary(rng);
    auto record = [&](double t) {
      for (int i = 0; i < n; ++i)
        rows[r].push_back({t, i, chain.field(h, i)});
    };
    record(0.0);
    for (int s = 0; s < steps; ++s) {
      chain.step(dt, rng);
      record((s + 1) * dt);
    }
  });
  write_field_csv(out_path(c, std::string(name) + ".csv"), rows);
  emit_manifest(c, name, {std::string(name) + ".csv"});
  std::cout << name << ": " << c.replicas << " replicas x " << steps
            << " steps written\n";
  return 0;
}

int cmd_ou(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  const EstimatorParams* p = c.params("ou");
  TestFunction h = h_from(p);
  OUSpec spec = build_ou_spec(c, R, p, h);

  std::vector<std::string> outputs = {"ou.csv"};
  if (p && !p->lags.empty()) {
    TestFunction g = h_from(p, true);
    CsvFile csv(out_path(c, "ou_autocorrelation.csv"),
                {"lag", "species_i", "species_j", "value"});
    for (double lag : p->lags) {
      Eigen::MatrixXd m = ou_autocorrelation(spec, h, g, lag);
      for (int i = 0; i < spec.species(); ++i)
        for (int j = 0; j < spec.species(); ++j)
          csv.write_row({fmt(lag), fmt(i), fmt(j), fmt(m(i, j))});
    }
    outputs.push_back("ou_autocorrelation.csv");
  }
  int code = run_reference_chain<OUProcess>(
      c, threads, "ou", h, [&] { return OUProcess(spec); });
  emit_manifest(c, "ou", outputs);
  return code;
}

int cmd_burgers(const RunConfig& c, int threads) {
  if (c.alpha <= 1.0)
    bad("the quadratic reference chain needs kernel.alpha > 1 (finite mean)");
  Resolved R = resolve(c);
  const EstimatorParams* p = c.params("burgers");
  TestFunction h = h_from(p);

  BurgersSpec spec;
  spec.ou = build_ou_spec(c, R, p, h);
  std::vector<Eigen::MatrixXd> d2 = R.ensemble.rate_second_derivatives(R.point.rho);
  double m = R.kernel.untruncated_mean();
  for (const auto& mat : d2) spec.quad.push_back(0.5 * m * mat);
  return run_reference_chain<BurgersProcess>(
      c, threads, "burgers", h, [&] { return BurgersProcess(spec); });
}

// ---- decompose / qv ----

int cmd_decompose(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  TestFunction h = h_from(c.params("decompose"));
  SiteSampler sampler(R.ensemble, R.point.mu);
  int n = c.species;

  struct Slot {
    std::vector<double> times;
    std::vector<DecompositionPath> paths;
    std::vector<double> y0;
    double closure = 0.0;
  };
  std::vector<Slot> slot(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    DecompositionObserver obs(
        R.model, R.kernel,
        DecompositionSettings{h, R.point.rho, R.point.g_mean, R.point.lambda,
                              R.frame, true});
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    Slot& s = slot[r];
    s.times = obs.grid_times();
    for (int i = 0; i < n; ++i) {
      s.paths.push_back(obs.path(i));
      s.y0.push_back(obs.initial_field(i));
      s.closure = std::max(
          s.closure, std::abs(obs.a_term(i) + obs.b_term(i) -
                              obs.drift_integral(i)));
    }
  });

  CsvFile csv(out_path(c, "decompose.csv"),
              {"replica", "time", "species", "y", "a", "b", "martingale", "qv"});
  double closure = 0.0;
  for (int r = 0; r < c.replicas; ++r) {
    const Slot& s = slot[r];
    closure = std::max(closure, s.closure);
    for (std::size_t t = 0; t < s.times.size(); ++t)
      for (int i = 0; i < n; ++i) {
        const DecompositionPath& p = s.paths[i];
        double mart = p.y[t] - s.y0[i] - p.a[t] - p.b[t];
        csv.write_row({fmt(r), fmt(s.times[t]), fmt(i), fmt(p.y[t]), fmt(p.a[t]),
                       fmt(p.b[t]), fmt(mart), fmt(p.qv[t])});
      }
  }
  std::cout << "decompose: max |A + B - direct drift| = " << closure << "\n";
  emit_manifest(c, "decompose", {"decompose.csv"}, {{"drift_closure", closure}});
  return 0;
}

int cmd_qv(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  TestFunction h = h_from(c.params("qv"));
  SiteSampler sampler(R.ensemble, R.point.mu);
  int n = c.species;

  std::vector<std::vector<double>> slot(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    DecompositionObserver obs(
        R.model, R.kernel,
        DecompositionSettings{h, R.point.rho, R.point.g_mean, R.point.lambda,
                              R.frame, true});
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    for (int i = 0; i < n; ++i)
      slot[r].push_back(obs.quadratic_variation(i) / c.horizon);
  });

  double dform = dirichlet_form_discrete(R.kernel, h);
  double dspec = dirichlet_form_spectral(h, c.alpha, c.c_plus, c.c_minus);
  CsvFile csv(out_path(c, "qv.csv"),
              {"species", "measured", "stderr", "exact_rate",
               "fd_2_lambda_gamma", "literal_4g"});
  bool gate_ok = true;
  for (int i = 0; i < n; ++i) {
    RunningStat st;
    for (int r = 0; r < c.replicas; ++r) st.push(slot[r][i]);
    double exact = expected_qv_rate(R.kernel, h, R.point.g_mean[i]);
    double fd = 2.0 * (R.point.lambda * R.point.gamma)(i, i) * dform;
    double lit = 4.0 * R.point.g_mean[i] * dspec;
    csv.write_row({fmt(i), fmt(st.mean), fmt(st.stderr_mean()), fmt(exact),
                   fmt(fd), fmt(lit)});
    std::cout << "species " << i << ": qv rate = " << st.mean << " +- "
              << st.stderr_mean() << ", exact = " << exact
              << ", fluctuation-dissipation = " << fd
              << ", literal 4g form = " << lit << "\n";
    if (std::abs(st.mean - exact) >
        std::max(0.05 * std::abs(exact), 4.0 * st.stderr_mean()))
      gate_ok = false;
  }
  emit_manifest(c, "qv", {"qv.csv"});
  if (!gate_ok) {
    std::cout << "qv: measured rate outside 5% / 4 sigma of the exact value\n";
    return 3;
  }
  std::cout << "qv: OK\n";
  return 0;
}

// ---- block-replacement residuals ----

int cmd_bg1(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  const EstimatorParams* p = c.params("bg1");
  TestFunction h = h_from(p);
  std::vector<int> ells = p && p->ell ? std::vector<int>{*p->ell}
                                      : std::vector<int>{default_ell(c)};
  SiteSampler sampler(R.ensemble, R.point.mu);
  int n = c.species;

  std::vector<std::vector<double>> dens(c.replicas), field(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    BgObserver obs(R.kernel,
                   BgSettings{h, R.point.rho, rate_channels(R.model),
                              R.point.g_mean, R.point.lambda, ells, R.frame,
                              true});
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    for (int i = 0; i < n; ++i)
      for (std::size_t e = 0; e < ells.size(); ++e) {
        dens[r].push_back(obs.sup_square_density(i, static_cast<int>(e)));
        field[r].push_back(obs.sup_square_field(i, static_cast<int>(e)));
      }
  });

  CsvFile csv(out_path(c, "bg1.csv"),
              {"species", "ell", "sup_sq_density", "stderr_density",
               "sup_sq_field", "stderr_field"});
  for (int i = 0; i < n; ++i)
    for (std::size_t e = 0; e < ells.size(); ++e) {
      RunningStat d, f;
      for (int r = 0; r < c.replicas; ++r) {
        d.push(dens[r][i * ells.size() + e]);
        f.push(field[r][i * ells.size() + e]);
      }
      csv.write_row({fmt(i), fmt(ells[e]), fmt(d.mean), fmt(d.stderr_mean()),
                     fmt(f.mean), fmt(f.stderr_mean())});
      std::cout << "species " << i << ", ell " << ells[e]
                << ": E sup residual^2 (density pairing) = " << d.mean << " +- "
                << d.stderr_mean() << "\n";
    }
  emit_manifest(c, "bg1", {"bg1.csv"});
  return 0;
}

int cmd_bg2(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  const EstimatorParams* p = c.params("bg2");
  TestFunction h = h_from(p);
  int ell = p && p->ell ? *p->ell : default_ell(c);
  std::vector<Eigen::MatrixXd> d2 = R.ensemble.rate_second_derivatives(R.point.rho);
  SiteSampler sampler(R.ensemble, R.point.mu);
  int n = c.species;

  std::vector<std::vector<double>> dens(c.replicas), field(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    SecondOrderBgObserver obs(
        R.kernel,
        SecondOrderBgSettings{h, R.point.rho, residual_channels(R.model, R.point),
                              Eigen::VectorXd::Zero(n), d2, R.point.gamma, ell,
                              R.frame, true});
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    for (int i = 0; i < n; ++i) {
      dens[r].push_back(obs.sup_square_density(i));
      field[r].push_back(obs.sup_square_field(i));
    }
  });

  CsvFile csv(out_path(c, "bg2.csv"),
              {"species", "ell", "sup_sq_density", "stderr_density",
               "sup_sq_field", "stderr_field"});
  for (int i = 0; i < n; ++i) {
    RunningStat d, f;
    for (int r = 0; r < c.replicas; ++r) {
      d.push(dens[r][i]);
      f.push(field[r][i]);
    }
    csv.write_row({fmt(i), fmt(ell), fmt(d.mean), fmt(d.stderr_mean()),
                   fmt(f.mean), fmt(f.stderr_mean())});
    std::cout << "species " << i << ", ell " << ell
              << ": E sup second-order residual^2 (density pairing) = "
              << d.mean << " +- " << d.stderr_mean() << "\n";
  }
  emit_manifest(c, "bg2", {"bg2.csv"});
  return 0;
}

// ---- energy functional ----

std::vector<int> widths_from_epsilons(const RunConfig& c,
                                      std::vector<double> eps) {
  if (eps.empty()) eps = {0.125, 0.0625, 0.03125};
  std::sort(eps.begin(), eps.end(), std::greater<double>());
  eps.push_back(eps.back() / 2.0);  // the half-scale partner of the finest
  std::vector<int> widths;
  for (double e : eps) {
    int w = static_cast<int>(std::lround(e * c.sites));
    if (w < 1) bad("energy window epsilon too small for this lattice");
    if (widths.empty() || w != widths.back()) widths.push_back(w);
  }
  if (widths.size() < 2) bad("energy needs at least two distinct window widths");
  return widths;
}

int cmd_energy(const RunConfig& c, int threads) {
  Resolved R = resolve(c);
  const EstimatorParams* p = c.params("energy");
  TestFunction h = h_from(p);
  std::vector<int> widths =
      widths_from_epsilons(c, p ? p->epsilons : std::vector<double>{});
  std::vector<Eigen::MatrixXd> d2 = R.ensemble.rate_second_derivatives(R.point.rho);
  SiteSampler sampler(R.ensemble, R.point.mu);
  int n = c.species;
  int pairs = static_cast<int>(widths.size()) - 1;

  std::vector<std::vector<double>> slot(c.replicas);
  parallel_for(c.replicas, threads, [&](int r) {
    Rng rng = Rng::stream(c.seed, static_cast<std::uint64_t>(r));
    EnergyObserver obs(R.kernel,
                       EnergySettings{h, R.point.rho, d2, widths, R.frame});
    KmcEngine engine(R.model, R.kernel, product_config(c.sites, sampler, rng));
    engine.run(c.horizon, c.effective_grid_dt(), rng, {&obs});
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < pairs; ++q)
        slot[r].push_back(obs.sup_pair_diff_sq(i, q));
  });

  CsvFile csv(out_path(c, "energy.csv"),
              {"species", "width_hi", "width_lo", "sup_pair_diff_sq", "stderr"});
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < pairs; ++q) {
      RunningStat st;
      for (int r = 0; r < c.replicas; ++r) st.push(slot[r][i * pairs + q]);
      csv.write_row({fmt(i), fmt(widths[q]), fmt(widths[q + 1]), fmt(st.mean),
                     fmt(st.stderr_mean())});
      std::cout << "species " << i << ", windows " << widths[q] << " vs "
                << widths[q + 1] << ": E sup diff^2 = " << st.mean << " +- "
                << st.stderr_mean() << "\n";
    }
  emit_manifest(c, "energy", {"energy.csv"});
  return 0;
}

// ---- canonical relaxation times ----

int cmd_gap(const RunConfig& c) {
  RateModel model = c.build_model();
  if (!model.has_potential())
    bad("relaxation times need a potential-based rate family");
  const EstimatorParams* p = c.params("gap");
  std::vector<int> radii = p && !p->radii.empty() ? p->radii
                                                  : std::vector<int>{1, 2, 3, 4};
  std::vector<long> totals(c.species, 0);
  totals[0] = 1;
  if (p && !p->totals.empty()) {
    if (static_cast<int>(p->totals.size()) != c.species)
      bad("gap.totals needs one entry per species");
    for (int i = 0; i < c.species; ++i) totals[i] = p->totals[i];
  }

  CsvFile csv(out_path(c, "gap.csv"), {"ell", "sites", "relaxation_time"});
  std::vector<double> xs, sizes, ws;
  for (int ell : radii) {
    double w = spectral_gap(model, c.alpha, c.c_plus, c.c_minus, ell, totals);
    csv.write_row({fmt(ell), fmt(2 * ell + 1), fmt(w)});
    std::cout << "ell " << ell << ": relaxation time = " << w << "\n";
    xs.push_back(ell);
    sizes.push_back(2.0 * ell + 1.0);
    ws.push_back(w);
  }
  json extra = json::object();
  if (!(p && p->fit_slope && !*p->fit_slope) && xs.size() >= 2) {
    double slope_radius = fit_log_slope(xs, ws);
    double slope_size = fit_log_slope(sizes, ws);
    std::cout << "log-log slope vs radius = " << slope_radius
              << ", vs box size = " << slope_size << "\n";
    extra["slope_radius"] = slope_radius;
    extra["slope_size"] = slope_size;
  }
  emit_manifest(c, "gap", {"gap.csv"}, extra, false);
  return 0;
}

// ---- sweep ----

double replica_scalar(const std::string& est, const RunConfig& cv,
                      const Resolved& R, const TestFunction& h, int r) {
  Rng rng = Rng::stream(cv.seed, static_cast<std::uint64_t>(r));
  SiteSampler sampler(R.ensemble, R.point.mu);
  KmcEngine engine(R.model, R.kernel, product_config(cv.sites, sampler, rng));

  if (est == "qv" || est == "drift") {
    DecompositionObserver obs(
        R.model, R.kernel,
        DecompositionSettings{h, R.point.rho, R.point.g_mean, R.point.lambda,
                              R.frame, true});
    engine.run(cv.horizon, cv.effective_grid_dt(), rng, {&obs});
    if (est == "qv") return obs.quadratic_variation(0) / cv.horizon;
    double sup = 0.0;
    for (double a : obs.path(0).a) sup = std::max(sup, a * a);
    return sup;
  }
  if (est == "bg1") {
    const EstimatorParams* p = cv.params("bg1");
    int ell = p && p->ell ? *p->ell : default_ell(cv);
    BgObserver obs(R.kernel,
                   BgSettings{h, R.point.rho, rate_channels(R.model),
                              R.point.g_mean, R.point.lambda,
                              std::vector<int>{ell}, R.frame, true});
    engine.run(cv.horizon, cv.effective_grid_dt(), rng, {&obs});
    double worst = 0.0;
    for (int i = 0; i < cv.species; ++i)
      worst = std::max(worst, obs.sup_square_density(i, 0));
    return worst;
  }
  if (est == "bg2") {
    const EstimatorParams* p = cv.params("bg2");
    int ell = p && p->ell ? *p->ell : default_ell(cv);
    std::vector<Eigen::MatrixXd> d2 =
        R.ensemble.rate_second_derivatives(R.point.rho);
    SecondOrderBgObserver obs(
        R.kernel, SecondOrderBgSettings{h, R.point.rho,
                                        residual_channels(R.model, R.point),
                                        Eigen::VectorXd::Zero(cv.species), d2,
                                        R.point.gamma, ell, R.frame, true});
    engine.run(cv.horizon, cv.effective_grid_dt(), rng, {&obs});
    double worst = 0.0;
    for (int i = 0; i < cv.species; ++i)
      worst = std::max(worst, obs.sup_square_density(i));
    return worst;
  }
  if (est == "energy") {
    const EstimatorParams* p = cv.params("energy");
    std::vector<int> widths =
        widths_from_epsilons(cv, p ? p->epsilons : std::vector<double>{});
    std::vector<Eigen::MatrixXd> d2 =
        R.ensemble.rate_second_derivatives(R.point.rho);
    EnergyObserver obs(R.kernel,
                       EnergySettings{h, R.point.rho, d2, widths, R.frame});
    engine.run(cv.horizon, cv.effective_grid_dt(), rng, {&obs});
    double worst = 0.0;
    for (int i = 0; i < cv.species; ++i)
      worst = std::max(worst, obs.sup_pair_diff_sq(i, 0));
    return worst;
  }
  bad("sweep.estimator must be one of qv, drift, bg1, bg2, energy");
}

int cmd_sweep(const RunConfig& c, int threads) {
  const EstimatorParams* p = c.params("sweep");
  if (!p || p->values.empty()) bad("sweep needs estimators.sweep.values");
  std::string axis = p->axis ? *p->axis : "sites";
  std::string est = p->estimator ? *p->estimator : "bg1";
  TestFunction h = h_from(p);

  CsvFile csv(out_path(c, "sweep.csv"),
              {"axis", "value", "estimator", "mean", "stderr", "replicas"});
  std::vector<double> xs, ys;
  for (double v : p->values) {
    RunConfig cv = c;
    if (axis == "sites") {
      cv.sites = static_cast<int>(std::lround(v));
      if (cv.sites < 2) bad("sweep over sites needs values >= 2");
    } else if (axis == "ell") {
      if (est != "bg1" && est != "bg2")
        bad("sweep over ell applies to the bg1/bg2 estimators");
      cv.estimators[est].ell = static_cast<int>(std::lround(v));
    } else if (axis == "epsilon") {
      if (est != "energy") bad("sweep over epsilon applies to the energy estimator");
      cv.estimators["energy"].epsilons = {v};
    } else {
      bad("sweep.axis must be one of sites, ell, epsilon");
    }
    Resolved R = resolve(cv);
    std::vector<double> slot(cv.replicas, 0.0);
    parallel_for(cv.replicas, threads,
                 [&](int r) { slot[r] = replica_scalar(est, cv, R, h, r); });
    RunningStat st;
    for (double s : slot) st.push(s);
    csv.write_row({axis, fmt(v), est, fmt(st.mean), fmt(st.stderr_mean()),
                   fmt(cv.replicas)});
    std::cout << axis << " = " << v << ": " << est << " = " << st.mean
              << " +- " << st.stderr_mean() << "\n";
    xs.push_back(v);
    ys.push_back(st.mean);
  }

  json extra = json::object();
  if (p->fit_slope.value_or(false) && xs.size() >= 2) {
    double slope = fit_log_slope(xs, ys);
    std::cout << "log-log slope = " << slope << "\n";
    extra["slope"] = slope;
  }
  emit_manifest(c, "sweep", {"sweep.csv"}, extra);
  return 0;
}

// ---- compare ----

struct GroupKey {
  long long t_pico;
  int species;
  bool operator<(const GroupKey& o) const {
    return t_pico != o.t_pico ? t_pico < o.t_pico : species < o.species;
  }
};

struct GroupStat {
  RunningStat value;  // replica means of Y
  RunningStat square;  // replica means of Y^2, catches variance mismatches
};

std::map<GroupKey, GroupStat> read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) bad("empty file '" + path + "'");
  if (line != "replica,time,species,value")
    bad("'" + path + "' is not a field-sample CSV (header mismatch)");
  std::map<GroupKey, GroupStat> groups;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // replica, unused
    std::getline(ss, cell, ',');
    double t = std::strtod(cell.c_str(), nullptr);
    std::getline(ss, cell, ',');
    int species = std::atoi(cell.c_str());
    std::getline(ss, cell, ',');
    double value = std::strtod(cell.c_str(), nullptr);
    GroupStat& g =
        groups[{static_cast<long long>(std::llround(t * 1e12)), species}];
    g.value.push(value);
    g.square.push(value * value);
  }
  if (groups.empty()) bad("'" + path + "' has no data rows");
  return groups;
}

double group_z(const RunningStat& sa, const RunningStat& sb) {
  double se = std::sqrt(sa.stderr_mean() * sa.stderr_mean() +
                        sb.stderr_mean() * sb.stderr_mean());
  if (se > 0.0) return std::abs(sa.mean - sb.mean) / se;
  return sa.mean == sb.mean ? 0.0 : HUGE_VAL;
}

int cmd_compare(const std::vector<std::string>& files, const RunConfig* c) {
  auto a = read_field_csv(files[0]);
  auto b = read_field_csv(files[1]);
  const EstimatorParams* p = c ? c->params("compare") : nullptr;
  double z_max = p && p->z_max ? *p->z_max : 4.0;
  std::string channel = p && p->channel ? *p->channel : "both";
  if (channel != "mean" && channel != "second" && channel != "both")
    bad("compare.channel must be one of mean, second, both");

  double worst = 0.0;
  GroupKey worst_key{0, 0};
  const char* worst_channel = "mean";
  int common = 0;
  for (const auto& [key, ga] : a) {
    auto it = b.find(key);
    if (it == b.end()) continue;
    ++common;
    if (channel != "second") {
      double z = group_z(ga.value, it->second.value);
      if (z > worst) worst = z, worst_key = key, worst_channel = "mean";
    }
    if (channel != "mean") {
      double z = group_z(ga.square, it->second.square);
      if (z > worst) worst = z, worst_key = key, worst_channel = "second moment";
    }
  }
  if (common == 0) bad("the two files share no (time, species) groups");
  std::cout << "compare: " << common << " common groups, max |z| = " << worst
            << " (" << worst_channel << ") at t = " << worst_key.t_pico * 1e-12
            << ", species " << worst_key.species << " (threshold " << z_max
            << ")\n";
  if (worst > z_max) {
    std::cout << "compare: MISMATCH\n";
    return 3;
  }
  std::cout << "compare: OK\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-species long-jump zero range process: simulator and "
               "verification harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int replicas_flag = 0;
  std::string out_flag;
  int threads = 1;
  std::vector<std::string> compare_files;

  app.add_option("--config", config_path, "run configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_flag, "override sim.seed");
  auto* rep_opt =
      app.add_option("--replicas", replicas_flag, "override sim.replicas");
  auto* out_opt =
      app.add_option("--out", out_flag, "override output.directory");
  app.add_option("--threads", threads, "worker threads for replica runs");

  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"validate", "check rate compatibility, measure assumptions, and frames"},
      {"sample", "draw stationary product configurations and test marginals"},
      {"simulate", "record fluctuation-field trajectories on the time grid"},
      {"decompose", "split the field into drift terms and a martingale"},
      {"qv", "pathwise quadratic variation against the exact rate"},
      {"bg1", "first-order block-replacement residual"},
      {"bg2", "second-order block-replacement residual"},
      {"energy", "window-pair Cauchy differences of the quadratic functional"},
      {"gap", "canonical relaxation times on boxes with fixed totals"},
      {"ou", "reference linear fluctuation chain (exact integrator)"},
      {"burgers", "reference quadratic fluctuation chain"},
      {"sweep", "run one estimator across an axis with matched streams"},
      {"compare", "z-test two field-sample CSVs group by group"},
  };
  for (const auto& [name, desc] : verbs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    if (name == "compare")
      sub->add_option("files", compare_files, "two field-sample CSV files")
          ->expected(2);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    std::optional<RunConfig> cfg;
    if (!config_path.empty()) {
      cfg = RunConfig::from_file(config_path);
      if (seed_opt->count()) cfg->seed = seed_flag;
      if (rep_opt->count()) {
        if (replicas_flag < 1) bad("--replicas must be >= 1");
        cfg->replicas = replicas_flag;
      }
      if (out_opt->count()) cfg->out_dir = out_flag;
    }
    if (cmd != "compare" && !cfg)
      bad("--config is required for '" + cmd + "'");

    if (cmd == "validate") return cmd_validate(*cfg);
    if (cmd == "sample") return cmd_sample(*cfg, threads);
    if (cmd == "simulate") return cmd_simulate(*cfg, threads);
    if (cmd == "decompose") return cmd_decompose(*cfg, threads);
    if (cmd == "qv") return cmd_qv(*cfg, threads);
    if (cmd == "bg1") return cmd_bg1(*cfg, threads);
    if (cmd == "bg2") return cmd_bg2(*cfg, threads);
    if (cmd == "energy") return cmd_energy(*cfg, threads);
    if (cmd == "gap") return cmd_gap(*cfg);
    if (cmd == "ou") return cmd_ou(*cfg, threads);
    if (cmd == "burgers") return cmd_burgers(*cfg, threads);
    if (cmd == "sweep") return cmd_sweep(*cfg, threads);
    if (cmd == "compare") return cmd_compare(compare_files, cfg ? &*cfg : nullptr);
    bad("unknown command " + cmd);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
