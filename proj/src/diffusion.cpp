#include "mh2n/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mh2n/parallel.hpp"
#include "mh2n/stats.hpp"

namespace mh2n {

LimitState to_bar_frame(const LimitState& y, double p) {
  return {(1.0 - p) * y.y1 - p * y.y2, y.y1 + y.y2};
}

LimitState from_bar_frame(const LimitState& yb, double p) {
  return {yb.y1 + p * yb.y2, (1.0 - p) * yb.y2 - yb.y1};
}

DriftNoise drift_and_noise(SdeSystem sys, const LimitState& s, const SystemParams& sp) {
  const double p = sp.service.p, mu1 = sp.service.mu1, mu2 = sp.service.mu2;
  const double th = sp.theta, B = sp.B;
  DriftNoise dn;
  switch (sys) {
    case SdeSystem::kY: {
      const double wplus = std::max(0.0, s.y1 + s.y2);
      dn.drift[0] = B * p - mu1 * (s.y1 - p * wplus) - p * th * wplus;
      dn.drift[1] = B * (1.0 - p) - mu2 * (s.y2 - (1.0 - p) * wplus) - (1.0 - p) * th * wplus;
      dn.noise_var = {2.0 * p, 2.0 * (1.0 - p)};
      break;
    }
    case SdeSystem::kYBar: {
      const double gap = std::max(0.0, s.y2) - s.y2;  // ybar2^+ - ybar2
      // First-component switching coefficient p(1-p)(mu1 - mu2): the linear
      // combination of the base system's equations produces (mu1 - mu2), and
      // the coupling must vanish for symmetric service rates.
      dn.drift[0] = -mu1 * mu2 * s.y1 + p * (1.0 - p) * (mu1 - mu2) * gap;
      dn.drift[1] =
          B - (mu1 - mu2) * s.y1 - th * s.y2 + (p * mu1 + (1.0 - p) * mu2 - th) * gap;
      dn.noise_var = {2.0 * p * (1.0 - p), 2.0};
      break;
    }
    case SdeSystem::kYHat: {
      dn.drift[0] = -mu1 * mu2 * s.y1;
      dn.drift[1] = B - (mu1 - mu2) * s.y1 - th * s.y2;
      dn.noise_var = {2.0 * p * (1.0 - p), 2.0};
      break;
    }
  }
  return dn;
}

SdePath euler_simulate(SdeSystem sys, const LimitState& init, double dt, double horizon,
                       const SystemParams& sp, RngStream& rng, std::size_t record_stride) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_simulate: nonpositive-dt");
  const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
  SdePath path;
  path.t.reserve(steps / record_stride + 2);
  LimitState s = init;
  const double sdt = std::sqrt(dt);
  auto record = [&](double t) {
    path.t.push_back(t);
    path.y1.push_back(s.y1);
    path.y2.push_back(s.y2);
    const double proxy = sys == SdeSystem::kY ? std::max(0.0, s.y1 + s.y2) : std::max(0.0, s.y2);
    path.y2_plus.push_back(proxy);
  };
  record(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const DriftNoise dn = drift_and_noise(sys, s, sp);
    s.y1 += dn.drift[0] * dt + std::sqrt(dn.noise_var[0]) * sdt * rng.normal();
    s.y2 += dn.drift[1] * dt + std::sqrt(dn.noise_var[1]) * sdt * rng.normal();
    if (k % record_stride == 0 || k == steps) record(static_cast<double>(k) * dt);
  }
  return path;
}

CommonNoisePair euler_common_noise(const LimitState& init, double dt, double horizon,
                                   const SystemParams& sp, RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_simulate: nonpositive-dt");
  const std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
  CommonNoisePair out;
  LimitState sb = init, sh = init;
  const double sdt = std::sqrt(dt);
  auto record = [&](double t) {
    out.ybar.t.push_back(t);
    out.ybar.y1.push_back(sb.y1);
    out.ybar.y2.push_back(sb.y2);
    out.ybar.y2_plus.push_back(std::max(0.0, sb.y2));
    out.yhat.t.push_back(t);
    out.yhat.y1.push_back(sh.y1);
    out.yhat.y2.push_back(sh.y2);
    out.yhat.y2_plus.push_back(std::max(0.0, sh.y2));
  };
  record(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const DriftNoise db = drift_and_noise(SdeSystem::kYBar, sb, sp);
    const DriftNoise dh = drift_and_noise(SdeSystem::kYHat, sh, sp);
    sb.y1 += db.drift[0] * dt + std::sqrt(db.noise_var[0]) * sdt * g1;
    sb.y2 += db.drift[1] * dt + std::sqrt(db.noise_var[1]) * sdt * g2;
    sh.y1 += dh.drift[0] * dt + std::sqrt(dh.noise_var[0]) * sdt * g1;
    sh.y2 += dh.drift[1] * dt + std::sqrt(dh.noise_var[1]) * sdt * g2;
    record(static_cast<double>(k) * dt);
    if (out.first_nonpositive < 0.0 && sb.y2 <= 0.0)
      out.first_nonpositive = static_cast<double>(k) * dt;
  }
  return out;
}

namespace {

void require_nonresonant(const SystemParams& sp) {
  if (sp.service.mu1 * sp.service.mu2 == sp.theta)
    throw std::invalid_argument("exact_ou_step: resonant-parameters (mu1 mu2 == theta)");
}

}  // namespace

OuTransition exact_ou_transition(const LimitState& state, double delta_t, const SystemParams& sp) {
  require_nonresonant(sp);
  const double mu1 = sp.service.mu1, mu2 = sp.service.mu2, th = sp.theta;
  const double m = mu1 * mu2;
  const double qt = sp.service.p * (1.0 - sp.service.p);
  const auto E = matexp_negzJ(delta_t, th, mu1, mu2);

  OuTransition tr;
  tr.mean[0] = E[0] * state.y1;
  tr.mean[1] = E[2] * state.y1 + E[3] * state.y2 + drift_term(sp.B, th, delta_t);

  // cov = int_0^dt e^{-uJ} diag(2q, 2) e^{-uJ^T} du with
  // e^{-uJ} = [[a, 0], [b, c]], a = e^{-mu}, b = g(e^{-mu} - e^{-th u}),
  // c = e^{-th u}, g = (mu1 - mu2)/(m - th).
  const double g = (mu1 - mu2) / (m - th);
  const double dt = delta_t;
  const double i_aa = (1.0 - std::exp(-2.0 * m * dt)) / (2.0 * m);
  const double i_ac = (1.0 - std::exp(-(m + th) * dt)) / (m + th);
  const double i_cc = (1.0 - std::exp(-2.0 * th * dt)) / (2.0 * th);
  const double i_ab = g * (i_aa - i_ac);
  const double i_bb = g * g * (i_aa - 2.0 * i_ac + i_cc);
  tr.cov[0] = 2.0 * qt * i_aa;
  tr.cov[1] = 2.0 * qt * i_ab;
  tr.cov[2] = 2.0 * qt * i_bb + 2.0 * i_cc;
  return tr;
}

LimitState exact_ou_step(const LimitState& state, double delta_t, const SystemParams& sp,
                         RngStream& rng) {
  const OuTransition tr = exact_ou_transition(state, delta_t, sp);
  // 2x2 Cholesky of the conditional covariance.
  const double l11 = std::sqrt(std::max(0.0, tr.cov[0]));
  const double l21 = l11 > 0.0 ? tr.cov[1] / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, tr.cov[2] - l21 * l21));
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return {tr.mean[0] + l11 * z1, tr.mean[1] + l21 * z1 + l22 * z2};
}

std::array<double, 3> ou_step_cov_quadrature(double delta_t, const SystemParams& sp) {
  require_nonresonant(sp);
  const double mu1 = sp.service.mu1, mu2 = sp.service.mu2, th = sp.theta;
  const double m = mu1 * mu2;
  const double g = (mu1 - mu2) / (m - th);
  const double qt = sp.service.p * (1.0 - sp.service.p);
  const auto a = [&](double u) { return std::exp(-m * u); };
  const auto b = [&](double u) { return g * (std::exp(-m * u) - std::exp(-th * u)); };
  const auto c = [&](double u) { return std::exp(-th * u); };
  const int panels = std::max(8, static_cast<int>(std::ceil(delta_t * std::max(1.0, m))));
  std::array<double, 3> cov;
  cov[0] = quad_gl([&](double u) { return 2.0 * qt * a(u) * a(u); }, 0.0, delta_t, panels, 32);
  cov[1] = quad_gl([&](double u) { return 2.0 * qt * a(u) * b(u); }, 0.0, delta_t, panels, 32);
  cov[2] = quad_gl([&](double u) { return 2.0 * qt * b(u) * b(u) + 2.0 * c(u) * c(u); }, 0.0,
                   delta_t, panels, 32);
  return cov;
}

LimitState exact_ou_step_with_noise(const LimitState& state, double delta_t,
                                    const SystemParams& sp, const std::array<double, 2>& noise) {
  require_nonresonant(sp);
  const auto E = matexp_negzJ(delta_t, sp.theta, sp.service.mu1, sp.service.mu2);
  return {E[0] * state.y1 + noise[0],
          E[2] * state.y1 + E[3] * state.y2 + drift_term(sp.B, sp.theta, delta_t) + noise[1]};
}

// ---------------------------------------------------------------------------
// Lower-bound apparatus
// ---------------------------------------------------------------------------

LowerBoundConfig LowerBoundConfig::defaults(const SystemParams& sp) {
  LowerBoundConfig cfg;
  cfg.C1 = 4.0 * std::fabs(sp.B) / sp.theta + 1.0;
  cfg.C2 = cfg.C1 + 1.0;
  cfg.C3 = -1.0;
  cfg.C4 = 1.0;
  return cfg;
}

void LowerBoundConfig::validate(const SystemParams& sp) const {
  const double floor = 4.0 * std::fabs(sp.B) / sp.theta;
  if (!(C1 > floor)) throw std::invalid_argument("LowerBoundConfig: invalid-config (C1 <= 4|B|/theta)");
  if (!(C2 > C1)) throw std::invalid_argument("LowerBoundConfig: invalid-config (C2 <= C1)");
  if (!(C4 > C3)) throw std::invalid_argument("LowerBoundConfig: invalid-config (C4 <= C3)");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("LowerBoundConfig: invalid-config (delta outside (0,1))");
}

double buf_value(const LowerBoundConfig& cfg, const SystemParams& sp, double t) {
  const double th = sp.theta;
  const double mu_sum = sp.service.mu1 + sp.service.mu2;
  const double c34 = std::fabs(cfg.C3) + std::fabs(cfg.C4);
  return std::exp(-th * t) * cfg.C1 - mu_sum * c34 * t * std::exp(-th * t) - std::fabs(sp.B) / th;
}

PiBufPaths pi_and_buf(const LowerBoundConfig& cfg, const SystemParams& sp,
                      const std::vector<double>& grid, std::size_t n_paths, std::uint64_t seed,
                      int n_threads) {
  cfg.validate(sp);
  sp.validate(RegimeCheck::kFormulas);
  PiBufPaths out;
  out.grid = grid;
  out.buf.reserve(grid.size());
  for (double t : grid) out.buf.push_back(buf_value(cfg, sp, t));

  const Kernel pk = Kernel::make(KernelKind::kPi, sp);
  // Drop a leading zero grid point (Pi(0) = 0 exactly).
  std::vector<double> times = grid;
  const bool had_zero = !times.empty() && times.front() == 0.0;
  if (had_zero) times.erase(times.begin());
  const GaussGrid g = GaussGrid::from_times(pk, times);
  out.pi_paths.assign(n_paths, {});
  parallel_for(n_paths, n_threads, [&](std::size_t i) {
    RngStream rng(seed, i);
    std::vector<double> vals;
    g.sample(rng, vals);
    if (had_zero) vals.insert(vals.begin(), 0.0);
    out.pi_paths[i] = std::move(vals);
  });
  return out;
}

namespace {

std::vector<double> uniform_grid(double T, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = T * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

}  // namespace

GordonCheck gordon_check(const LowerBoundConfig& cfg, const SystemParams& sp, double T, double x,
                         std::size_t n_mc, std::uint64_t seed, std::size_t grid_points,
                         int n_threads) {
  const auto grid = uniform_grid(T, grid_points);
  const PiBufPaths pb = pi_and_buf(cfg, sp, grid, n_mc, seed, n_threads);
  std::size_t joint = 0, pos = 0, term = 0;
  const double buf_T = pb.buf.back();
  for (const auto& path : pb.pi_paths) {
    bool inf_pos = true;
    for (std::size_t i = 0; i < path.size(); ++i)
      if (path[i] + pb.buf[i] <= 0.0) {
        inf_pos = false;
        break;
      }
    const bool exceed = path.back() + buf_T > x;
    if (inf_pos) ++pos;
    if (inf_pos && exceed) ++joint;
    if (path.back() > x - buf_T) ++term;
  }
  const double n = static_cast<double>(n_mc);
  GordonCheck gc;
  gc.lhs = static_cast<double>(joint) / n;
  const double p_pos = static_cast<double>(pos) / n;
  const double p_term = static_cast<double>(term) / n;
  gc.rhs = p_pos * p_term;
  gc.se_lhs = std::sqrt(gc.lhs * (1.0 - gc.lhs) / n);
  gc.se_rhs = std::sqrt(p_term * p_term * p_pos * (1.0 - p_pos) / n +
                        p_pos * p_pos * p_term * (1.0 - p_term) / n);
  gc.holds_within_3se = gc.lhs >= gc.rhs - 3.0 * (gc.se_lhs + gc.se_rhs);
  return gc;
}

PositivityEstimate positivity_prob(const LowerBoundConfig& cfg, const SystemParams& sp, double T,
                                   std::size_t n_mc, std::uint64_t seed, std::size_t grid_points,
                                   int n_threads) {
  if (n_mc == 0) throw std::invalid_argument("positivity_prob: empty-sample");
  const auto grid = uniform_grid(T, grid_points);
  const PiBufPaths pb = pi_and_buf(cfg, sp, grid, n_mc, seed, n_threads);
  std::size_t pos = 0;
  for (const auto& path : pb.pi_paths) {
    bool inf_pos = true;
    for (std::size_t i = 0; i < path.size(); ++i)
      if (path[i] + pb.buf[i] <= 0.0) {
        inf_pos = false;
        break;
      }
    if (inf_pos) ++pos;
  }
  PositivityEstimate pe;
  pe.n_mc = n_mc;
  const Wilson w = wilson_interval(pos, n_mc, 2.5758293035489);
  pe.estimate = w.estimate;
  pe.wilson_lo_99 = w.lo;
  return pe;
}

// ---------------------------------------------------------------------------
// Stationary tail campaign
// ---------------------------------------------------------------------------

TailCampaign limit_tail_campaign(const SystemParams& sp, double dt, double horizon,
                                 std::size_t n_reps, std::uint64_t seed, double x_lo, double x_hi,
                                 int n_threads) {
  if (!(dt > 0.0)) throw std::invalid_argument("limit_tail_campaign: nonpositive-dt");
  const double burn = 10.0 * std::max(1.0 / sp.theta, 1.0);
  if (!(horizon > burn)) throw std::invalid_argument("limit_tail_campaign: horizon below burn-in");
  const ExponentReport er = exponents(sp.theta, sp.service.mu1, sp.service.mu2);
  const double sigma = std::sqrt(er.sup_variance);
  if (x_lo <= 0.0) x_lo = 1.5 * sigma;
  if (x_hi <= 0.0) x_hi = 2.5 * sigma;

  constexpr std::size_t kGrid = 25;
  constexpr std::size_t kBatches = 20;
  std::vector<double> x2grid(kGrid);
  for (std::size_t i = 0; i < kGrid; ++i)
    x2grid[i] = x_lo * x_lo + (x_hi * x_hi - x_lo * x_lo) * static_cast<double>(i) /
                                  static_cast<double>(kGrid - 1);
  std::vector<double> xgrid(kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) xgrid[i] = std::sqrt(x2grid[i]);

  // occupancy[rep][batch][ix]: fraction of batch time with ybar2^+ > x.
  const double batch_len = (horizon - burn) / static_cast<double>(kBatches);
  std::vector<std::vector<std::array<double, kGrid>>> occ(
      n_reps, std::vector<std::array<double, kGrid>>(kBatches));
  for (auto& reps : occ)
    for (auto& b : reps) b.fill(0.0);

  auto run_once = [&](std::size_t rep, double dt_run,
                      std::vector<std::vector<std::array<double, kGrid>>>& acc, double burn_run,
                      double horizon_run) {
    RngStream rng(seed, rep);
    LimitState s{0.0, 0.0};
    const double sdt = std::sqrt(dt_run);
    const std::size_t steps = static_cast<std::size_t>(std::llround(horizon_run / dt_run));
    const double blen = (horizon_run - burn_run) / static_cast<double>(kBatches);
    for (std::size_t k = 1; k <= steps; ++k) {
      const DriftNoise dn = drift_and_noise(SdeSystem::kYBar, s, sp);
      s.y1 += dn.drift[0] * dt_run + std::sqrt(dn.noise_var[0]) * sdt * rng.normal();
      s.y2 += dn.drift[1] * dt_run + std::sqrt(dn.noise_var[1]) * sdt * rng.normal();
      const double t = static_cast<double>(k) * dt_run;
      if (t <= burn_run) continue;
      const std::size_t b =
          std::min(kBatches - 1, static_cast<std::size_t>((t - burn_run) / blen));
      const double v = std::max(0.0, s.y2);
      for (std::size_t ix = 0; ix < kGrid; ++ix) {
        if (v > xgrid[ix]) acc[rep][b][ix] += dt_run;
        else break;  // xgrid increasing
      }
    }
  };

  parallel_for(n_reps, n_threads, [&](std::size_t rep) { run_once(rep, dt, occ, burn, horizon); });

  // Refinement study on a shortened horizon: halve dt, compare slopes.
  const double short_hor = burn + (horizon - burn) * 0.2;
  std::vector<std::vector<std::array<double, kGrid>>> occ_h(
      1, std::vector<std::array<double, kGrid>>(kBatches));
  std::vector<std::vector<std::array<double, kGrid>>> occ_f(
      1, std::vector<std::array<double, kGrid>>(kBatches));
  for (auto& b : occ_h[0]) b.fill(0.0);
  for (auto& b : occ_f[0]) b.fill(0.0);
  run_once(0, dt, occ_f, burn, short_hor);
  run_once(0, dt * 0.5, occ_h, burn, short_hor);

  auto slope_from = [&](const std::vector<std::vector<std::array<double, kGrid>>>& acc,
                        double blen, std::vector<double>* batch_slopes) {
    std::array<double, kGrid> surv{};
    surv.fill(0.0);
    double total = 0.0;
    for (const auto& rep : acc)
      for (const auto& b : rep) {
        for (std::size_t ix = 0; ix < kGrid; ++ix) surv[ix] += b[ix];
        total += blen;
      }
    std::vector<double> lx, ly;
    for (std::size_t ix = 0; ix < kGrid; ++ix) {
      if (surv[ix] <= 0.0) break;
      lx.push_back(x2grid[ix]);
      ly.push_back(std::log(surv[ix] / total));
    }
    if (lx.size() < 5) throw std::runtime_error("limit_tail_campaign: insufficient-exceedances");
    if (batch_slopes) {
      // Jackknife-style bootstrap over batches: resample batch indices.
      RngStream rng(seed, 777);
      std::vector<const std::array<double, kGrid>*> flat;
      for (const auto& rep : acc)
        for (const auto& b : rep) flat.push_back(&b);
      for (int boot = 0; boot < 400; ++boot) {
        std::array<double, kGrid> s2{};
        s2.fill(0.0);
        for (std::size_t j = 0; j < flat.size(); ++j) {
          const auto* pick = flat[rng.uniform_index(flat.size())];
          for (std::size_t ix = 0; ix < kGrid; ++ix) s2[ix] += (*pick)[ix];
        }
        std::vector<double> bx, by;
        for (std::size_t ix = 0; ix < kGrid; ++ix) {
          if (s2[ix] <= 0.0) break;
          bx.push_back(x2grid[ix]);
          by.push_back(std::log(s2[ix] / total));
        }
        if (bx.size() >= 5) batch_slopes->push_back(ols(bx, by).second);
      }
    }
    return ols(lx, ly).second;
  };

  TailCampaign tc;
  std::vector<double> boot_slopes;
  tc.slope = slope_from(occ, batch_len, &boot_slopes);
  const double s_f = slope_from(occ_f, (short_hor - burn) / static_cast<double>(kBatches), nullptr);
  const double s_h = slope_from(occ_h, (short_hor - burn) / static_cast<double>(kBatches), nullptr);
  tc.refinement_drift = std::fabs(s_h - s_f) / std::max(1e-12, std::fabs(s_f));
  std::sort(boot_slopes.begin(), boot_slopes.end());
  if (!boot_slopes.empty()) {
    tc.ci_lo = boot_slopes[static_cast<std::size_t>(0.025 * static_cast<double>(boot_slopes.size() - 1))];
    tc.ci_hi = boot_slopes[static_cast<std::size_t>(0.975 * static_cast<double>(boot_slopes.size() - 1))];
  }
  tc.x_lo = x_lo;
  tc.x_hi = x_hi;
  tc.dt_used = dt;
  // Count exceedances at the top threshold across all batches.
  double top_time = 0.0;
  for (const auto& rep : occ)
    for (const auto& b : rep) top_time += b[kGrid - 1];
  tc.exceed_hi = static_cast<std::size_t>(top_time / dt);
  return tc;
}

}  // namespace mh2n
