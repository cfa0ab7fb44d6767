#include "mh2n/path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mh2n {

PathPL::PathPL(std::vector<Seg> segs, double horizon) : segs_(std::move(segs)), horizon_(horizon) {
  if (segs_.empty() || segs_.front().t != 0.0)
    throw std::invalid_argument("PathPL: first breakpoint must be at t = 0");
  for (std::size_t k = 1; k < segs_.size(); ++k)
    if (!(segs_[k].t > segs_[k - 1].t))
      throw std::invalid_argument("PathPL: breakpoints must be strictly increasing");
  if (!(horizon_ >= segs_.back().t)) throw std::invalid_argument("PathPL: horizon before last breakpoint");
  build_prefix();
}

PathPL PathPL::constant_slope(double slope, double horizon) {
  return PathPL({{0.0, 0.0, slope}}, horizon);
}

PathPL PathPL::zero(double horizon) { return constant_slope(0.0, horizon); }

void PathPL::build_prefix() {
  const std::size_t m = segs_.size();
  start_value_.assign(m, 0.0);
  prefix_integral_.assign(m, 0.0);
  double v = 0.0;      // left limit entering segment k
  double integ = 0.0;  // integral up to segs_[k].t
  for (std::size_t k = 0; k < m; ++k) {
    if (k > 0) {
      const double dt = segs_[k].t - segs_[k - 1].t;
      integ += start_value_[k - 1] * dt + 0.5 * segs_[k - 1].slope * dt * dt;
      v = start_value_[k - 1] + segs_[k - 1].slope * dt;
    }
    start_value_[k] = v + segs_[k].jump;
    prefix_integral_[k] = integ;
  }
}

std::size_t PathPL::segment_index(double t) const {
  // Last segment with start time <= t.
  auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                             [](double x, const Seg& s) { return x < s.t; });
  if (it == segs_.begin()) throw std::invalid_argument("PathPL: time before 0");
  return static_cast<std::size_t>(it - segs_.begin()) - 1;
}

double PathPL::value(double t) const {
  const std::size_t k = segment_index(t);
  return start_value_[k] + segs_[k].slope * (t - segs_[k].t);
}

double PathPL::left_value(double t) const {
  if (t <= 0.0) return 0.0;
  const std::size_t k = segment_index(t);
  if (t == segs_[k].t) {
    // Left limit excludes the jump at t.
    if (k == 0) return 0.0;
    return start_value_[k - 1] + segs_[k - 1].slope * (t - segs_[k - 1].t);
  }
  return start_value_[k] + segs_[k].slope * (t - segs_[k].t);
}

double PathPL::integral(double t) const {
  const std::size_t k = segment_index(t);
  const double dt = t - segs_[k].t;
  return prefix_integral_[k] + start_value_[k] * dt + 0.5 * segs_[k].slope * dt * dt;
}

double PathPL::uniform_distance(const PathPL& other) const {
  std::vector<double> ts;
  ts.reserve(size() + other.size());
  for (const auto& s : segs_) ts.push_back(s.t);
  for (const auto& s : other.segs_) ts.push_back(s.t);
  ts.push_back(std::min(horizon_, other.horizon_));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double d = 0.0;
  const double hmin = std::min(horizon_, other.horizon_);
  for (double t : ts) {
    if (t > hmin) break;
    d = std::max(d, std::fabs(value(t) - other.value(t)));
    d = std::max(d, std::fabs(left_value(t) - other.left_value(t)));
  }
  return d;
}

PathPL PathPL::with_jump(double t, double jump) const {
  std::vector<Seg> segs = segs_;
  auto it = std::lower_bound(segs.begin(), segs.end(), t,
                             [](const Seg& s, double x) { return s.t < x; });
  if (it != segs.end() && it->t == t) {
    it->jump += jump;
  } else {
    const std::size_t k = static_cast<std::size_t>(it - segs.begin());
    const double slope = k == 0 ? 0.0 : segs[k - 1].slope;
    segs.insert(it, Seg{t, jump, slope});
  }
  return PathPL(std::move(segs), std::max(horizon_, t));
}

std::string PathPL::to_csv() const {
  std::ostringstream os;
  os << "t_break,left_value,jump,slope\n";
  char buf[160];
  for (std::size_t k = 0; k < segs_.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", segs_[k].t,
                  start_value_[k] - segs_[k].jump, segs_[k].jump, segs_[k].slope);
    os << buf;
  }
  return os.str();
}

}  // namespace mh2n
