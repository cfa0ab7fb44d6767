#include "mh2n/skorokhod.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mh2n {

// ---------------------------------------------------------------------------
// ReflectedPath
// ---------------------------------------------------------------------------

ReflectedPath::ReflectedPath(std::vector<Piece> pieces, double theta, double horizon)
    : pieces_(std::move(pieces)), theta_(theta), horizon_(horizon) {
  if (pieces_.empty() || pieces_.front().t != 0.0)
    throw std::invalid_argument("ReflectedPath: first piece must start at 0");
  prefix_integral_.assign(pieces_.size(), 0.0);
  double integ = 0.0;
  for (std::size_t k = 0; k + 1 < pieces_.size(); ++k) {
    const double dt = pieces_[k + 1].t - pieces_[k].t;
    if (!pieces_[k].stuck) {
      const double e = std::exp(-theta_ * dt);
      integ += pieces_[k].phi * (1.0 - e) / theta_ +
               (pieces_[k].slope / theta_) * (dt - (1.0 - e) / theta_);
    }
    prefix_integral_[k + 1] = integ;
  }
}

std::size_t ReflectedPath::piece_index(double t) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                             [](double x, const Piece& p) { return x < p.t; });
  if (it == pieces_.begin()) throw std::invalid_argument("ReflectedPath: time before 0");
  return static_cast<std::size_t>(it - pieces_.begin()) - 1;
}

double ReflectedPath::value(double t) const {
  const std::size_t k = piece_index(t);
  const Piece& p = pieces_[k];
  if (p.stuck) return 0.0;
  const double e = std::exp(-theta_ * (t - p.t));
  return e * p.phi + (p.slope / theta_) * (1.0 - e);
}

double ReflectedPath::integral(double t) const {
  const std::size_t k = piece_index(t);
  const Piece& p = pieces_[k];
  if (p.stuck) return prefix_integral_[k];
  const double dt = t - p.t;
  const double e = std::exp(-theta_ * dt);
  return prefix_integral_[k] + p.phi * (1.0 - e) / theta_ +
         (p.slope / theta_) * (dt - (1.0 - e) / theta_);
}

PathPL ReflectedPath::sample(const std::vector<double>& times) const {
  std::vector<PathPL::Seg> segs;
  double prev_t = 0.0, prev_v = 0.0;
  bool first = true;
  for (double t : times) {
    const double v = value(t);
    if (first) {
      segs.push_back({0.0, v, 0.0});
      first = false;
    } else {
      const double slope = (v - prev_v) / (t - prev_t);
      segs.back().slope = slope;
      segs.push_back({t, 0.0, 0.0});
    }
    prev_t = t;
    prev_v = v;
  }
  return PathPL(std::move(segs), std::max(horizon_, prev_t));
}

double SkorSolution::identity_residual(const PathPL& x) const {
  double worst = 0.0;
  auto check = [&](double t) {
    const double lhs = phi.value(t);
    const double rhs = x.value(t) - theta * phi.integral(t) + psi.value(t);
    worst = std::max(worst, std::fabs(lhs - rhs));
  };
  for (const auto& p : phi.pieces()) check(p.t);
  check(std::min(x.horizon(), phi.horizon()));
  return worst;
}

double SkorSolution::complementarity_residual(double tol) const {
  // psi grows only along stuck pieces (continuously) and at its own jumps;
  // charge any growth that happens while phi exceeds tol. The indicator is
  // right-continuous, so jumps look at the post-jump value and continuous
  // growth is probed at interior points of the piece.
  double bad = 0.0;
  const auto& segs = psi.segments();
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (segs[k].jump != 0.0 && phi.value(segs[k].t) > tol) bad += segs[k].jump;
    if (segs[k].slope != 0.0) {
      const double t_end = (k + 1 < segs.size()) ? segs[k + 1].t : psi.horizon();
      const double len = t_end - segs[k].t;
      for (double frac : {0.0, 0.25, 0.5, 0.75}) {
        if (phi.value(segs[k].t + frac * len) > tol) {
          bad += segs[k].slope * len;
          break;
        }
      }
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Drift Skorokhod solver
// ---------------------------------------------------------------------------

namespace {

// phi evolution over a free stretch: value after dt.
double evolve(double phi0, double slope, double theta, double dt) {
  const double e = std::exp(-theta * dt);
  return e * phi0 + (slope / theta) * (1.0 - e);
}

// First zero of evolve(phi0, c, theta, .) inside (0, dt_max], or a negative
// value when none. Requires phi0 > 0 and c < 0 (the only case with a zero).
// Safeguarded bisection to 1e-12 time tolerance with a Newton polish.
double zero_hit_time(double phi0, double slope, double theta, double dt_max) {
  if (!(phi0 > 0.0) || !(slope < 0.0)) return -1.0;
  if (evolve(phi0, slope, theta, dt_max) > 0.0) return -1.0;
  double lo = 0.0, hi = dt_max;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (evolve(phi0, slope, theta, mid) > 0.0) lo = mid; else hi = mid;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    const double f = evolve(phi0, slope, theta, t);
    const double df = -theta * std::exp(-theta * t) * phi0 + slope * std::exp(-theta * t);
    if (df == 0.0) break;
    const double t_next = t - f / df;
    if (t_next > lo && t_next < hi) t = t_next; else break;
  }
  return t;
}

}  // namespace

SkorSolution solve_phi_psi(const PathPL& x, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("solve_phi_psi: nonpositive-theta");
  const auto& segs = x.segments();
  if (segs.empty() || x.value(0.0) != 0.0)
    throw std::invalid_argument("solve_phi_psi: nonzero-origin");

  std::vector<ReflectedPath::Piece> phi_pieces;
  std::vector<PathPL::Seg> psi_segs;
  psi_segs.push_back({0.0, 0.0, 0.0});

  double phi = 0.0;
  double psi_slope_open = 0.0;  // slope of the currently open psi segment

  auto open_psi_piece = [&](double t, double jump, double slope) {
    if (!psi_segs.empty() && psi_segs.back().t == t) {
      psi_segs.back().jump += jump;
      psi_segs.back().slope = slope;
    } else {
      psi_segs.push_back({t, jump, slope});
    }
    psi_slope_open = slope;
  };

  auto open_phi_piece = [&](double t, double v, double slope, bool stuck) {
    if (!phi_pieces.empty() && phi_pieces.back().t == t) {
      phi_pieces.back() = {t, v, slope, stuck};
    } else {
      phi_pieces.push_back({t, v, slope, stuck});
    }
  };

  for (std::size_t k = 0; k < segs.size(); ++k) {
    const double t0 = segs[k].t;
    const double t1 = (k + 1 < segs.size()) ? segs[k + 1].t : x.horizon();
    const double c = segs[k].slope;

    // Apply the jump at t0: upward jumps transfer to phi; downward jumps are
    // absorbed by psi exactly to the extent needed to keep phi >= 0.
    const double j = segs[k].jump;
    if (j != 0.0) {
      const double lifted = phi + j;
      if (lifted >= 0.0) {
        phi = lifted;
      } else {
        open_psi_piece(t0, -lifted, psi_slope_open);
        phi = 0.0;
      }
    }

    // Zero-length trailing segment at the horizon: record the value.
    if (t0 >= t1) {
      open_phi_piece(t0, phi, 0.0, phi == 0.0);
      continue;
    }

    // Evolve across [t0, t1) under slope c.
    double t = t0;
    while (t < t1) {
      if (phi <= 0.0 && c <= 0.0) {
        // Stuck at zero: psi absorbs -c for the rest of the segment.
        phi = 0.0;
        open_phi_piece(t, 0.0, c, true);
        open_psi_piece(t, 0.0, -c);
        t = t1;
      } else {
        // Free piece; find a possible zero hit strictly inside.
        open_phi_piece(t, phi, c, false);
        if (psi_slope_open != 0.0) open_psi_piece(t, 0.0, 0.0);
        const double hit = zero_hit_time(phi, c, theta, t1 - t);
        if (hit > 0.0 && t + hit < t1) {
          t += hit;
          phi = 0.0;
        } else {
          phi = evolve(phi, c, theta, t1 - t);
          t = t1;
        }
      }
    }
  }
  ReflectedPath rphi(std::move(phi_pieces), theta, x.horizon());
  PathPL rpsi(std::move(psi_segs), x.horizon());
  return SkorSolution{std::move(rphi), std::move(rpsi), theta};
}

// ---------------------------------------------------------------------------
// zeta and the supremum representation
// ---------------------------------------------------------------------------

double zeta(const PathPL& x, double s, double t, double theta) {
  if (s < 0.0 || s > x.horizon()) throw std::invalid_argument("zeta: s-out-of-range");
  if (t <= 0.0) return 0.0;
  // zeta(X,s,t) = int_{(s, s+t]} e^{-theta(s + t - u)} dX(u).
  const double end = s + t;
  const auto& segs = x.segments();
  double acc = 0.0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const double a = segs[k].t;
    const double b = (k + 1 < segs.size()) ? segs[k + 1].t : x.horizon();
    // Jump at a contributes when s < a <= end.
    if (a > s && a <= end && segs[k].jump != 0.0) acc += segs[k].jump * std::exp(-theta * (end - a));
    // Slope over [a, b) clipped to (s, end].
    const double lo = std::max(a, s);
    const double hi = std::min(b, end);
    if (hi > lo && segs[k].slope != 0.0)
      acc += (segs[k].slope / theta) *
             (std::exp(-theta * (end - hi)) - std::exp(-theta * (end - lo)));
    if (a >= end) break;
  }
  return acc;
}

double reed_sup(const PathPL& x, double theta, double t) {
  if (x.value(0.0) != 0.0) throw std::invalid_argument("reed_sup: nonzero-origin");
  if (!(theta > 0.0)) throw std::invalid_argument("reed_sup: nonpositive-theta");
  if (t < 0.0 || t > x.horizon()) throw std::invalid_argument("reed_sup: t out of range");
  // h(s) = zeta(X, s, t-s) = int_{(s,t]} e^{-theta(t-u)} dX(u) has derivative
  // -slope(s) e^{-theta(t-s)} between breakpoints, so it is piecewise
  // monotone: the supremum is attained at a breakpoint or a pre-jump left
  // limit. Accumulate h backwards from s = t.
  const auto& segs = x.segments();
  double sup = 0.0;  // h(t) = 0
  double h = 0.0;
  for (std::size_t k = segs.size(); k-- > 0;) {
    const double a = segs[k].t;
    if (a >= t) continue;
    const double b = std::min((k + 1 < segs.size()) ? segs[k + 1].t : x.horizon(), t);
    // Slope contribution over [a, b).
    if (segs[k].slope != 0.0)
      h += (segs[k].slope / theta) *
           (std::exp(-theta * (t - b)) - std::exp(-theta * (t - a)));
    sup = std::max(sup, h);  // h at s = a (jump at a excluded)
    // Left limit at a includes the jump at a (s < a captures it).
    if (segs[k].jump != 0.0) {
      h += segs[k].jump * std::exp(-theta * (t - a));
      sup = std::max(sup, h);
    }
  }
  return sup;
}

double lipschitz_ratio(const PathPL& x1, const PathPL& x2, double theta) {
  const double denom = x1.uniform_distance(x2);
  if (denom == 0.0) throw std::invalid_argument("lipschitz_ratio: identical-paths");
  const SkorSolution s1 = solve_phi_psi(x1, theta);
  const SkorSolution s2 = solve_phi_psi(x2, theta);
  // Evaluate |phi1 - phi2| on the union of piece starts plus a refinement of
  // each interval (the difference of two exponential pieces can peak inside).
  std::vector<double> ts;
  for (const auto& p : s1.phi.pieces()) ts.push_back(p.t);
  for (const auto& p : s2.phi.pieces()) ts.push_back(p.t);
  const double hmin = std::min(x1.horizon(), x2.horizon());
  ts.push_back(hmin);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double num = 0.0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    if (ts[k] > hmin) break;
    for (int j = 0; j < 8; ++j) {
      const double t = ts[k] + (ts[k + 1] - ts[k]) * j / 8.0;
      if (t > hmin) break;
      num = std::max(num, std::fabs(s1.phi.value(t) - s2.phi.value(t)));
    }
  }
  num = std::max(num, std::fabs(s1.phi.value(hmin) - s2.phi.value(hmin)));
  return num / denom;
}

// ---------------------------------------------------------------------------
// Counter-chain paths
// ---------------------------------------------------------------------------

namespace {

PathPL build_skor_path_impl(const EventLog<TrackState>& log, long n, double theta) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<PathPL::Seg> segs;
  segs.reserve(log.events.size() + 1);
  if (log.init.W != 0) throw std::invalid_argument("build_skor_path: inconsistent-log (W(0) != 0)");
  segs.push_back({0.0, 0.0, theta * scale * static_cast<double>(log.init.W)});
  TrackState prev = log.init;
  for (const auto& ev : log.events) {
    const long d_arr = ev.post.ARR - prev.ARR;
    const long d_ren = ev.post.REN - prev.REN;
    const long d_aba = ev.post.ABA - prev.ABA;
    if (d_arr < 0 || d_ren < 0 || d_aba < 0 || d_arr + d_ren + d_aba == 0)
      throw std::invalid_argument("build_skor_path: inconsistent-log");
    const double jump = scale * static_cast<double>(d_arr - d_ren - d_aba);
    const double slope = theta * scale * static_cast<double>(ev.post.W);
    if (!segs.empty() && segs.back().t == ev.t) {
      segs.back().jump += jump;
      segs.back().slope = slope;
    } else {
      segs.push_back({ev.t, jump, slope});
    }
    prev = ev.post;
  }
  return PathPL(std::move(segs), log.horizon);
}

}  // namespace

PathPL build_skor_path(const EventLog<TrackState>& log, long n, double theta) {
  return build_skor_path_impl(log, n, theta);
}

double verify_skoro1(const EventLog<TrackState>& log, long n, double theta) {
  const PathPL x = build_skor_path_impl(log, n, theta);
  const SkorSolution sol = solve_phi_psi(x, theta);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  double worst = std::fabs(scale * static_cast<double>(log.init.W) - sol.phi.value(0.0));
  for (const auto& ev : log.events) {
    const double w = scale * static_cast<double>(ev.post.W);
    worst = std::max(worst, std::fabs(w - sol.phi.value(ev.t)));
  }
  return worst;
}

double err_process_supnorm(const EventLog<TrackState>& log, long n, double theta) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  // ERR(t) = scale (ABA(t) - theta int_0^t W ds): piecewise linear in t with
  // jumps at abandonments; extremes occur at event times and their left
  // limits (and at the horizon).
  double sup = 0.0;
  double integral_w = 0.0;
  TrackState prev = log.init;
  double prev_t = 0.0;
  auto err_at = [&](double integ, long aba) {
    return scale * (static_cast<double>(aba) - theta * integ);
  };
  for (const auto& ev : log.events) {
    integral_w += static_cast<double>(prev.W) * (ev.t - prev_t);
    sup = std::max(sup, std::fabs(err_at(integral_w, prev.ABA)));   // left limit
    sup = std::max(sup, std::fabs(err_at(integral_w, ev.post.ABA)));  // post jump
    prev = ev.post;
    prev_t = ev.t;
  }
  integral_w += static_cast<double>(prev.W) * (log.horizon - prev_t);
  sup = std::max(sup, std::fabs(err_at(integral_w, prev.ABA)));
  return sup;
}

PathPL random_fuzz_path(double horizon, RngStream& rng, int max_segments) {
  const int m = 2 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_segments - 1)));
  std::vector<double> ts{0.0};
  for (int k = 1; k < m; ++k) ts.push_back(rng.uniform(0.0, horizon));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<PathPL::Seg> segs;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double jump = (k == 0 || rng.uniform() < 0.3) ? 0.0 : rng.normal();
    const double slope = 2.0 * rng.normal();
    segs.push_back({ts[k], jump, slope});
  }
  return PathPL(std::move(segs), horizon);
}

}  // namespace mh2n
