#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mh2n {

// Piecewise-linear path with jumps on [0, horizon], right-continuous with
// left limits. Segment k starts at time[k] with an instantaneous jump and a
// constant outgoing slope valid until the next breakpoint.
class PathPL {
 public:
  struct Seg {
    double t = 0.0;
    double jump = 0.0;
    double slope = 0.0;
  };

  PathPL() = default;
  PathPL(std::vector<Seg> segs, double horizon);

  static PathPL constant_slope(double slope, double horizon);
  static PathPL zero(double horizon);

  double horizon() const { return horizon_; }
  const std::vector<Seg>& segments() const { return segs_; }
  std::size_t size() const { return segs_.size(); }

  double value(double t) const;       // x(t), right-continuous
  double left_value(double t) const;  // x(t-)
  double integral(double t) const;    // closed-form integral of x over [0, t]

  // Sup-norm distance to another path, exact for piecewise-linear paths
  // (attained at a breakpoint of either path or a one-sided limit there).
  double uniform_distance(const PathPL& other) const;

  // Returns a copy with one extra jump added at the given time.
  PathPL with_jump(double t, double jump) const;

  std::string to_csv() const;  // t_break,left_value,jump,slope

 private:
  void build_prefix();
  std::size_t segment_index(double t) const;

  std::vector<Seg> segs_;
  std::vector<double> start_value_;     // value at segs_[k].t after the jump
  std::vector<double> prefix_integral_; // integral of x over [0, segs_[k].t]
  double horizon_ = 0.0;
};

}  // namespace mh2n
