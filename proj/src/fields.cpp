#include "zrp/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace zrp {

namespace {

constexpr std::complex<double> kImag{0.0, 1.0};

// sin(x)/x, stable through x = 0
double sinc(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// integral of e^{-i theta s} ds over [t0, t1]
std::complex<double> phase_integral(double theta, double t0, double t1) {
  double dt = t1 - t0;
  if (theta == 0.0) return {dt, 0.0};
  double mid = theta * 0.5 * (t0 + t1);
  double half = theta * 0.5 * dt;
  return dt * sinc(half) * std::polar(1.0, -mid);
}

int wrap(int x, int n) {
  int r = x % n;
  return r < 0 ? r + n : r;
}

}  // namespace

double fluctuation_field(const Configuration& eta, int species, double rho,
                         const TestFunction& h, double delta) {
  int n = eta.sites();
  double acc = 0.0;
  for (int x = 0; x < n; ++x)
    acc += (eta.at(x, species) - rho) * h(static_cast<double>(x) / n - delta);
  return acc / std::sqrt(static_cast<double>(n));
}

double block_average(const Configuration& eta, int species, int x, int ell) {
  int n = eta.sites();
  long acc = 0;
  for (int y = x - ell; y <= x + ell; ++y) acc += eta.at(wrap(y, n), species);
  return static_cast<double>(acc) / (2 * ell + 1);
}

double centered_block_average(const Configuration& eta, int species, int x,
                              int ell, double rho) {
  return block_average(eta, species, x, ell) - rho;
}

double block_kernel_factor(int N, int ell, int k) {
  int r = wrap(k, N);
  if (r == 0) return 1.0;
  double u = M_PI * r / N;
  return std::sin((2 * ell + 1) * u) / ((2 * ell + 1) * std::sin(u));
}

double expected_qv_rate(const JumpKernel& kernel, const TestFunction& h,
                        double g_mean) {
  int n = kernel.lattice();
  std::vector<double> tab(n);
  for (int x = 0; x < n; ++x) tab[x] = h(static_cast<double>(x) / n);
  double acc = 0.0;
  for (int x = 0; x < n; ++x) {
    for (int r = 1; r <= kernel.radius(); ++r) {
      double dp = tab[wrap(x + r, n)] - tab[x];
      double dm = tab[wrap(x - r, n)] - tab[x];
      acc += kernel.p(r) * dp * dp + kernel.p(-r) * dm * dm;
    }
  }
  return g_mean * std::pow(static_cast<double>(n), kernel.alpha() - 1.0) * acc;
}

// ---- ModeTracker ----

ModeTracker::ModeTracker(int lattice, int species, int max_mode,
                         Eigen::VectorXd rho,
                         std::vector<SiteFunction> channels,
                         Eigen::VectorXd channel_mean)
    : n_sites_(lattice),
      n_species_(species),
      max_mode_(max_mode),
      rho_(std::move(rho)),
      channel_mean_(std::move(channel_mean)),
      channels_(std::move(channels)) {
  if (rho_.size() != n_species_)
    throw std::invalid_argument("mode tracker: density size mismatch");
  if (channel_mean_.size() != static_cast<long>(channels_.size()))
    throw std::invalid_argument("mode tracker: channel mean size mismatch");
  roots_.resize(static_cast<std::size_t>(n_sites_) * (max_mode_ + 1));
  for (int x = 0; x < n_sites_; ++x)
    for (int k = 0; k <= max_mode_; ++k)
      // reduce k x mod N before forming the angle to keep full precision
      roots_[static_cast<std::size_t>(x) * (max_mode_ + 1) + k] = std::polar(
          1.0, kTwoPi * ((static_cast<long>(k) * x) % n_sites_) / n_sites_);
}

void ModeTracker::recompute(const Configuration& eta,
                            std::vector<std::complex<double>>& d,
                            std::vector<std::complex<double>>& f,
                            std::vector<double>& cache) const {
  int nc = channel_count();
  d.assign(static_cast<std::size_t>(n_species_) * (max_mode_ + 1), {});
  f.assign(static_cast<std::size_t>(nc) * (max_mode_ + 1), {});
  cache.assign(static_cast<std::size_t>(n_sites_) * nc, 0.0);
  for (int x = 0; x < n_sites_; ++x) {
    const std::complex<double>* row = unit_roots(x);
    const int* site = eta.site(x);
    for (int j = 0; j < n_species_; ++j) {
      double v = site[j] - rho_[j];
      for (int k = 0; k <= max_mode_; ++k)
        d[static_cast<std::size_t>(j) * (max_mode_ + 1) + k] += v * row[k];
    }
    for (int c = 0; c < nc; ++c) {
      double v = channels_[c](site);
      cache[static_cast<std::size_t>(x) * nc + c] = v;
      if (v != 0.0)
        for (int k = 0; k <= max_mode_; ++k)
          f[static_cast<std::size_t>(c) * (max_mode_ + 1) + k] += v * row[k];
    }
  }
}

void ModeTracker::init(const Configuration& eta) {
  if (eta.sites() != n_sites_ || eta.species() != n_species_)
    throw std::invalid_argument("mode tracker: configuration shape mismatch");
  recompute(eta, d_, f_, cache_);
  drift_ = 0.0;
}

void ModeTracker::apply_jump(int x, int y, int species,
                             const Configuration& after) {
  const std::complex<double>* rx = unit_roots(x);
  const std::complex<double>* ry = unit_roots(y);
  std::complex<double>* dsp = d_.data() + static_cast<std::size_t>(species) * (max_mode_ + 1);
  for (int k = 0; k <= max_mode_; ++k) dsp[k] += ry[k] - rx[k];
  int nc = channel_count();
  for (int site : {x, y}) {
    const int* occ = after.site(site);
    const std::complex<double>* row = unit_roots(site);
    double* cache = cache_.data() + static_cast<std::size_t>(site) * nc;
    for (int c = 0; c < nc; ++c) {
      double v = channels_[c](occ);
      double dv = v - cache[c];
      if (dv != 0.0) {
        std::complex<double>* fc =
            f_.data() + static_cast<std::size_t>(c) * (max_mode_ + 1);
        for (int k = 0; k <= max_mode_; ++k) fc[k] += dv * row[k];
        cache[c] = v;
      }
    }
  }
}

double ModeTracker::refresh(const Configuration& eta) {
  std::vector<std::complex<double>> d, f;
  std::vector<double> cache;
  recompute(eta, d, f, cache);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    worst = std::max(worst, std::abs(d[i] - d_[i]));
  for (std::size_t i = 0; i < f.size(); ++i)
    worst = std::max(worst, std::abs(f[i] - f_[i]));
  d_.swap(d);
  f_.swap(f);
  cache_.swap(cache);
  drift_ = std::max(drift_, worst);
  return worst;
}

// ---- DecompositionObserver ----

namespace {

std::vector<ModeTracker::SiteFunction> rate_channels(const RateModel& model) {
  std::vector<ModeTracker::SiteFunction> out;
  for (int i = 0; i < model.species(); ++i)
    out.push_back([model, i](const int* occ) { return model.rate(occ, i); });
  return out;
}

}  // namespace

DecompositionObserver::DecompositionObserver(const RateModel& model,
                                             const JumpKernel& kernel,
                                             DecompositionSettings settings)
    : n_sites_(kernel.lattice()),
      n_species_(model.species()),
      max_mode_(settings.h.degree()),
      s_(std::move(settings)),
      tracker_(n_sites_, n_species_, max_mode_, s_.rho, rate_channels(model),
               s_.g_mean),
      inv_sqrt_n_(1.0 / std::sqrt(static_cast<double>(n_sites_))) {
  if (s_.lambda.rows() != n_species_ || s_.lambda.cols() != n_species_)
    throw std::invalid_argument("decomposition: jacobian shape mismatch");
  psi_.resize(max_mode_ + 1);
  c2_.resize(max_mode_ + 1);
  c2psi_.resize(max_mode_ + 1);
  theta_.resize(max_mode_ + 1);
  for (int k = 0; k <= max_mode_; ++k) {
    psi_[k] = discrete_symbol(kernel, k);
    c2_[k] = (k == 0 ? 1.0 : 2.0) * inv_sqrt_n_ * s_.h.coeff(k);
    c2psi_[k] = c2_[k] * psi_[k];
    theta_[k] = kTwoPi * k * s_.frame.speed;
  }
  if (!s_.frame.moving()) {
    h_table_.resize(n_sites_);
    for (int x = 0; x < n_sites_; ++x)
      h_table_[x] = s_.h(static_cast<double>(x) / n_sites_);
  }
  a_.assign(n_species_, 0.0);
  b_.assign(n_species_, 0.0);
  drift_.assign(n_species_, 0.0);
  frame_drift_.assign(n_species_, 0.0);
  qv_.assign(n_species_, 0.0);
  jump_sum_.assign(n_species_, 0.0);
  y0_.assign(n_species_, 0.0);
  paths_.resize(n_species_);
}

double DecompositionObserver::field(int i, double t) const {
  double acc = (c2_[0] * tracker_.occupation_mode(i, 0)).real();
  for (int k = 1; k <= max_mode_; ++k) {
    std::complex<double> ph =
        theta_[k] == 0.0 ? 1.0 : std::polar(1.0, -theta_[k] * t);
    acc += (c2_[k] * ph * tracker_.occupation_mode(i, k)).real();
  }
  return acc;
}

void DecompositionObserver::begin(double t, const Configuration& eta) {
  tracker_.init(eta);
  std::fill(a_.begin(), a_.end(), 0.0);
  std::fill(b_.begin(), b_.end(), 0.0);
  std::fill(drift_.begin(), drift_.end(), 0.0);
  std::fill(frame_drift_.begin(), frame_drift_.end(), 0.0);
  std::fill(qv_.begin(), qv_.end(), 0.0);
  std::fill(jump_sum_.begin(), jump_sum_.end(), 0.0);
  max_jump_ = 0.0;
  times_.clear();
  for (auto& p : paths_) p = DecompositionPath{};
  for (int i = 0; i < n_species_; ++i) y0_[i] = field(i, t);
  at_grid(-1, t, eta);
}

void DecompositionObserver::integrate(double t0, double t1) {
  double dt = t1 - t0;
  if (dt <= 0.0) return;
  for (int k = 1; k <= max_mode_; ++k) {
    std::complex<double> pk = s_.frame.moving()
                                  ? phase_integral(theta_[k], t0, t1)
                                  : std::complex<double>{dt, 0.0};
    std::complex<double> wa = c2psi_[k] * pk;   // pairs with the local residual
    std::complex<double> wb = c2_[k] * pk;      // pairs with occupation terms
    for (int i = 0; i < n_species_; ++i) {
      std::complex<double> lin{};  // sum_j lambda_ij D^j_k
      for (int j = 0; j < n_species_; ++j)
        lin += s_.lambda(i, j) * tracker_.occupation_mode(j, k);
      std::complex<double> g = tracker_.channel_mode(i, k);
      std::complex<double> d = tracker_.occupation_mode(i, k);
      std::complex<double> frame_term = -kImag * theta_[k] * d;
      a_[i] += (wa * (g - lin)).real();
      b_[i] += (wb * (psi_[k] * lin + frame_term)).real();
      drift_[i] += (wb * (psi_[k] * g + frame_term)).real();
      frame_drift_[i] += (wb * frame_term).real();
    }
  }
}

void DecompositionObserver::on_interval(double t0, double t1,
                                        const Configuration&) {
  integrate(t0, t1);
}

void DecompositionObserver::on_jump(double t, int x, int y, long /*z*/,
                                    int species, const Configuration& after) {
  double dy;
  if (!s_.frame.moving()) {
    dy = (h_table_[y] - h_table_[x]) * inv_sqrt_n_;
  } else {
    double delta = s_.frame.delta(t);
    dy = (s_.h(static_cast<double>(y) / n_sites_ - delta) -
          s_.h(static_cast<double>(x) / n_sites_ - delta)) *
         inv_sqrt_n_;
  }
  jump_sum_[species] += dy;
  qv_[species] += dy * dy;
  max_jump_ = std::max(max_jump_, std::abs(dy));
  tracker_.apply_jump(x, y, species, after);
}

void DecompositionObserver::at_grid(long /*index*/, double t,
                                    const Configuration& eta) {
  if (s_.refresh_at_grid) tracker_.refresh(eta);
  times_.push_back(t);
  for (int i = 0; i < n_species_; ++i) {
    paths_[i].y.push_back(field(i, t));
    paths_[i].a.push_back(a_[i]);
    paths_[i].b.push_back(b_[i]);
    paths_[i].drift.push_back(drift_[i]);
    paths_[i].qv.push_back(qv_[i]);
  }
}

// ---- BgObserver ----

BgObserver::BgObserver(const JumpKernel& kernel, BgSettings settings)
    : n_sites_(kernel.lattice()),
      max_mode_(settings.h.degree()),
      s_(std::move(settings)),
      tracker_(n_sites_, static_cast<int>(s_.rho.size()), max_mode_, s_.rho,
               s_.f, s_.f_mean) {
  int nc = channel_count();
  if (s_.f_gradient.rows() != nc || s_.f_gradient.cols() != s_.rho.size())
    throw std::invalid_argument("bg residual: gradient shape mismatch");
  kfac_.resize(static_cast<std::size_t>(radius_count()) * (max_mode_ + 1));
  for (int e = 0; e < radius_count(); ++e) {
    if (2 * s_.ells[e] + 1 > n_sites_)
      throw std::invalid_argument("bg residual: block exceeds the torus");
    for (int k = 0; k <= max_mode_; ++k)
      kfac_[static_cast<std::size_t>(e) * (max_mode_ + 1) + k] =
          block_kernel_factor(n_sites_, s_.ells[e], k);
  }
  c2_.resize(max_mode_ + 1);
  theta_.resize(max_mode_ + 1);
  for (int k = 0; k <= max_mode_; ++k) {
    c2_[k] = (k == 0 ? 1.0 : 2.0) * s_.h.coeff(k);
    theta_[k] = kTwoPi * k * s_.frame.speed;
  }
  integral_.assign(static_cast<std::size_t>(nc) * radius_count(), 0.0);
  sup_sq_ = integral_;
  paths_.resize(integral_.size());
}

void BgObserver::begin(double t, const Configuration& eta) {
  tracker_.init(eta);
  std::fill(integral_.begin(), integral_.end(), 0.0);
  std::fill(sup_sq_.begin(), sup_sq_.end(), 0.0);
  times_.clear();
  for (auto& p : paths_) p.clear();
  at_grid(-1, t, eta);
}

void BgObserver::integrate(double t0, double t1) {
  double dt = t1 - t0;
  if (dt <= 0.0) return;
  int nc = channel_count(), nr = radius_count();
  int n_species = tracker_.species();
  for (int k = 0; k <= max_mode_; ++k) {
    if (c2_[k] == std::complex<double>{}) continue;
    std::complex<double> pk = s_.frame.moving()
                                  ? phase_integral(theta_[k], t0, t1)
                                  : std::complex<double>{dt, 0.0};
    std::complex<double> w = c2_[k] * pk;
    const double* kf = kfac_.data() + 0 * (max_mode_ + 1) + k;
    for (int c = 0; c < nc; ++c) {
      std::complex<double> lin{};
      for (int j = 0; j < n_species; ++j)
        lin += s_.f_gradient(c, j) * tracker_.occupation_mode(j, k);
      std::complex<double> f = tracker_.channel_mode(c, k);
      for (int e = 0; e < nr; ++e)
        integral_[c * nr + e] +=
            (w * (f - kf[static_cast<std::size_t>(e) * (max_mode_ + 1)] * lin))
                .real();
    }
  }
}

void BgObserver::on_interval(double t0, double t1, const Configuration&) {
  integrate(t0, t1);
}

void BgObserver::on_jump(double /*t*/, int x, int y, long /*z*/, int species,
                         const Configuration& after) {
  tracker_.apply_jump(x, y, species, after);
}

void BgObserver::at_grid(long /*index*/, double t, const Configuration& eta) {
  if (s_.refresh_at_grid) tracker_.refresh(eta);
  times_.push_back(t);
  for (std::size_t i = 0; i < integral_.size(); ++i) {
    paths_[i].push_back(integral_[i]);
    sup_sq_[i] = std::max(sup_sq_[i], integral_[i] * integral_[i]);
  }
}

// ---- SecondOrderBgObserver ----

SecondOrderBgObserver::SecondOrderBgObserver(const JumpKernel& kernel,
                                             SecondOrderBgSettings settings)
    : n_sites_(kernel.lattice()),
      n_species_(static_cast<int>(settings.rho.size())),
      max_mode_(settings.h.degree()),
      s_(std::move(settings)),
      tracker_(n_sites_, n_species_, max_mode_, s_.rho, s_.f, s_.f_mean),
      window_(2.0 * s_.ell + 1.0) {
  if (2 * s_.ell + 1 > n_sites_)
    throw std::invalid_argument("bg residual: block exceeds the torus");
  if (static_cast<int>(s_.d2.size()) != channel_count())
    throw std::invalid_argument("bg residual: second-derivative count");
  c2_.resize(max_mode_ + 1);
  theta_.resize(max_mode_ + 1);
  for (int k = 0; k <= max_mode_; ++k) {
    c2_[k] = (k == 0 ? 1.0 : 2.0) * s_.h.coeff(k);
    theta_[k] = kTwoPi * k * s_.frame.speed;
  }
  integral_.assign(channel_count(), 0.0);
  sup_sq_ = integral_;
  paths_.resize(channel_count());
}

void SecondOrderBgObserver::rebuild_quadratic(const Configuration& eta) {
  block_counts_.assign(static_cast<std::size_t>(n_species_) * n_sites_, 0);
  for (int j = 0; j < n_species_; ++j)
    for (int x = 0; x < n_sites_; ++x)
      for (int y = x - s_.ell; y <= x + s_.ell; ++y)
        block_counts_[static_cast<std::size_t>(j) * n_sites_ + x] +=
            eta.at(wrap(y, n_sites_), j);

  std::vector<std::complex<double>> fresh(
      static_cast<std::size_t>(channel_count()) * (max_mode_ + 1));
  std::vector<double> b(n_species_);
  for (int x = 0; x < n_sites_; ++x) {
    const std::complex<double>* row = tracker_.unit_roots(x);
    for (int j = 0; j < n_species_; ++j)
      b[j] = block_counts_[static_cast<std::size_t>(j) * n_sites_ + x] /
                 window_ -
             s_.rho[j];
    for (int c = 0; c < channel_count(); ++c) {
      double q = 0.0;
      for (int j = 0; j < n_species_; ++j)
        for (int k = 0; k < n_species_; ++k)
          q += 0.5 * s_.d2[c](j, k) * (b[j] * b[k] - s_.gamma(j, k) / window_);
      if (q != 0.0)
        for (int k = 0; k <= max_mode_; ++k)
          fresh[static_cast<std::size_t>(c) * (max_mode_ + 1) + k] +=
              q * row[k];
    }
  }
  if (!qhat_.empty()) {
    double worst = 0.0;
    for (std::size_t i = 0; i < fresh.size(); ++i)
      worst = std::max(worst, std::abs(fresh[i] - qhat_[i]));
    quad_drift_ = std::max(quad_drift_, worst);
  }
  qhat_.swap(fresh);
}

void SecondOrderBgObserver::begin(double t, const Configuration& eta) {
  tracker_.init(eta);
  qhat_.clear();
  rebuild_quadratic(eta);
  quad_drift_ = 0.0;
  std::fill(integral_.begin(), integral_.end(), 0.0);
  std::fill(sup_sq_.begin(), sup_sq_.end(), 0.0);
  times_.clear();
  for (auto& p : paths_) p.clear();
  at_grid(-1, t, eta);
}

std::complex<double> SecondOrderBgObserver::residual_mode(int c, int k) const {
  return tracker_.channel_mode(c, k) -
         qhat_[static_cast<std::size_t>(c) * (max_mode_ + 1) + k];
}

void SecondOrderBgObserver::integrate(double t0, double t1) {
  double dt = t1 - t0;
  if (dt <= 0.0) return;
  for (int k = 0; k <= max_mode_; ++k) {
    if (c2_[k] == std::complex<double>{}) continue;
    std::complex<double> pk = s_.frame.moving()
                                  ? phase_integral(theta_[k], t0, t1)
                                  : std::complex<double>{dt, 0.0};
    std::complex<double> w = c2_[k] * pk;
    for (int c = 0; c < channel_count(); ++c)
      integral_[c] += (w * residual_mode(c, k)).real();
  }
}

void SecondOrderBgObserver::on_interval(double t0, double t1,
                                        const Configuration&) {
  integrate(t0, t1);
}

void SecondOrderBgObserver::shift_site(int site, int species, int delta) {
  double db = delta / window_;
  std::vector<double> b_old(n_species_);
  for (int x = site - s_.ell; x <= site + s_.ell; ++x) {
    int xi = wrap(x, n_sites_);
    for (int j = 0; j < n_species_; ++j)
      b_old[j] = block_counts_[static_cast<std::size_t>(j) * n_sites_ + xi] /
                     window_ -
                 s_.rho[j];
    const std::complex<double>* row = tracker_.unit_roots(xi);
    for (int c = 0; c < channel_count(); ++c) {
      double dq = 0.5 * s_.d2[c](species, species) * db * db;
      for (int j = 0; j < n_species_; ++j)
        dq += s_.d2[c](species, j) * db * b_old[j];
      if (dq != 0.0) {
        std::complex<double>* qc =
            qhat_.data() + static_cast<std::size_t>(c) * (max_mode_ + 1);
        for (int k = 0; k <= max_mode_; ++k) qc[k] += dq * row[k];
      }
    }
    block_counts_[static_cast<std::size_t>(species) * n_sites_ + xi] += delta;
  }
}

void SecondOrderBgObserver::on_jump(double /*t*/, int x, int y, long /*z*/,
                                    int species, const Configuration& after) {
  shift_site(x, species, -1);
  shift_site(y, species, +1);
  tracker_.apply_jump(x, y, species, after);
}

void SecondOrderBgObserver::at_grid(long /*index*/, double t,
                                    const Configuration& eta) {
  if (s_.refresh_at_grid) {
    tracker_.refresh(eta);
    rebuild_quadratic(eta);
  }
  times_.push_back(t);
  for (int c = 0; c < channel_count(); ++c) {
    paths_[c].push_back(integral_[c]);
    sup_sq_[c] = std::max(sup_sq_[c], integral_[c] * integral_[c]);
  }
}

// ---- EnergyObserver ----

EnergyObserver::EnergyObserver(const JumpKernel& kernel, EnergySettings settings)
    : n_sites_(kernel.lattice()),
      n_species_(static_cast<int>(settings.rho.size())),
      s_(std::move(settings)),
      h_prime_(s_.h.derived()) {
  if (static_cast<int>(s_.d2.size()) != n_species_)
    throw std::invalid_argument("energy: second-derivative count mismatch");
  for (int w : s_.widths)
    if (w < 0 || 2 * w + 1 > n_sites_)
      throw std::invalid_argument("energy: window exceeds the torus");
  if (!s_.frame.moving()) {
    hp_table_.resize(n_sites_);
    for (int x = 0; x < n_sites_; ++x)
      hp_table_[x] = h_prime_(static_cast<double>(x) / n_sites_);
  }
  int cells = n_species_ * width_count();
  integral_.assign(cells, 0.0);
  f_prev_.assign(cells, 0.0);
  f_now_.assign(cells, 0.0);
  sup_pair_.assign(static_cast<std::size_t>(n_species_) *
                       std::max(0, width_count() - 1),
                   0.0);
  paths_.resize(cells);
  prefix_.assign(static_cast<std::size_t>(n_species_) * (n_sites_ + 1), 0);
}

void EnergyObserver::evaluate(const Configuration& eta, double t,
                              std::vector<double>& out) {
  for (int j = 0; j < n_species_; ++j) {
    long* p = prefix_.data() + static_cast<std::size_t>(j) * (n_sites_ + 1);
    p[0] = 0;
    for (int x = 0; x < n_sites_; ++x) p[x + 1] = p[x] + eta.at(x, j);
  }
  const double* hp = nullptr;
  std::vector<double> shifted;
  if (!s_.frame.moving()) {
    hp = hp_table_.data();
  } else {
    double delta = s_.frame.delta(t);
    shifted.resize(n_sites_);
    for (int x = 0; x < n_sites_; ++x)
      shifted[x] = h_prime_(static_cast<double>(x) / n_sites_ - delta);
    hp = shifted.data();
  }
  std::vector<double> b(n_species_);
  std::vector<double> acc(static_cast<std::size_t>(n_species_) * n_species_);
  for (int wi = 0; wi < width_count(); ++wi) {
    int w = s_.widths[wi];
    double window = 2.0 * w + 1.0;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int x = 0; x < n_sites_; ++x) {
      int lo = wrap(x - w, n_sites_);
      for (int j = 0; j < n_species_; ++j) {
        const long* p =
            prefix_.data() + static_cast<std::size_t>(j) * (n_sites_ + 1);
        long sum;
        if (lo + 2 * w + 1 <= n_sites_) {
          sum = p[lo + 2 * w + 1] - p[lo];
        } else {
          sum = (p[n_sites_] - p[lo]) + p[lo + 2 * w + 1 - n_sites_];
        }
        b[j] = sum / window - s_.rho[j];
      }
      double weight = hp[x];
      for (int j = 0; j < n_species_; ++j)
        for (int k = j; k < n_species_; ++k)
          acc[static_cast<std::size_t>(j) * n_species_ + k] +=
              b[j] * b[k] * weight;
    }
    for (int i = 0; i < n_species_; ++i) {
      double v = 0.0;
      for (int j = 0; j < n_species_; ++j)
        for (int k = j; k < n_species_; ++k)
          v += (j == k ? 1.0 : 2.0) * s_.d2[i](j, k) *
               acc[static_cast<std::size_t>(j) * n_species_ + k];
      out[i * width_count() + wi] = v;
    }
  }
}

void EnergyObserver::begin(double t, const Configuration& eta) {
  std::fill(integral_.begin(), integral_.end(), 0.0);
  std::fill(sup_pair_.begin(), sup_pair_.end(), 0.0);
  times_.clear();
  for (auto& p : paths_) p.clear();
  evaluate(eta, t, f_prev_);
  t_prev_ = t;
  times_.push_back(t);
  for (std::size_t i = 0; i < integral_.size(); ++i) paths_[i].push_back(0.0);
}

void EnergyObserver::advance(double t, const Configuration& eta) {
  evaluate(eta, t, f_now_);
  double half = 0.5 * (t - t_prev_);
  for (std::size_t i = 0; i < integral_.size(); ++i) {
    integral_[i] += half * (f_prev_[i] + f_now_[i]);
    paths_[i].push_back(integral_[i]);
  }
  f_prev_.swap(f_now_);
  t_prev_ = t;
  times_.push_back(t);
  int nw = width_count();
  for (int i = 0; i < n_species_; ++i)
    for (int pair = 0; pair + 1 < nw; ++pair) {
      double d = integral_[i * nw + pair] - integral_[i * nw + pair + 1];
      double& sup = sup_pair_[static_cast<std::size_t>(i) * (nw - 1) + pair];
      sup = std::max(sup, d * d);
    }
}

void EnergyObserver::at_grid(long /*index*/, double t,
                             const Configuration& eta) {
  advance(t, eta);
}

}  // namespace zrp
