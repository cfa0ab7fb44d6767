#include "mh2n/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mh2n/parallel.hpp"
#include "mh2n/stats.hpp"

namespace mh2n {

// ---------------------------------------------------------------------------
// ExpTriplet
// ---------------------------------------------------------------------------

int ExpTriplet::count_service(const Job& j) const {
  auto it = service_.find(j);
  return it == service_.end() ? 0 : it->second;
}

int ExpTriplet::count_queue(const Job& j) const {
  int c = 0;
  for (const Job& q : queue_)
    if (q == j) ++c;
  return c;
}

long ExpTriplet::count_type_in_service(int type) const {
  long c = 0;
  for (const auto& [j, mult] : service_)
    if (j.type == type) c += mult;
  return c;
}

void ExpTriplet::add_service(const Job& j) {
  ++service_[j];
  ++s_size_;
}

void ExpTriplet::remove_service(const Job& j) {
  auto it = service_.find(j);
  if (it == service_.end()) throw std::logic_error("ExpTriplet: removing absent service job");
  if (--it->second == 0) service_.erase(it);
  --s_size_;
}

void ExpTriplet::push_queue(const Job& j) { queue_.push_back(j); }

void ExpTriplet::remove_queue(const Job& j) {
  auto it = std::find(queue_.begin(), queue_.end(), j);
  if (it == queue_.end()) throw std::logic_error("ExpTriplet: removing absent queued job");
  queue_.erase(it);
}

Job ExpTriplet::queue_front() const {
  if (queue_.empty()) throw std::logic_error("ExpTriplet: queue_front on empty queue");
  return queue_.front();
}

void ExpTriplet::serve_head() {
  const Job h = queue_front();
  queue_.erase(queue_.begin());
  add_service(h);
}

bool ExpTriplet::operator<(const ExpTriplet& o) const {
  if (nu != o.nu) return nu < o.nu;
  if (queue_ != o.queue_) return queue_ < o.queue_;
  return service_ < o.service_;
}

std::string ExpTriplet::brief() const {
  std::ostringstream os;
  os << "S={";
  bool first = true;
  for (const auto& [j, c] : service_) {
    for (int k = 0; k < c; ++k) {
      if (!first) os << ",";
      os << "(" << j.index << "," << j.type << ")";
      first = false;
    }
  }
  os << "} W=[";
  first = true;
  for (const Job& j : queue_) {
    if (!first) os << ",";
    os << "(" << j.index << "," << j.type << ")";
    first = false;
  }
  os << "] nu=" << nu;
  return os.str();
}

// ---------------------------------------------------------------------------
// Good-state predicates
// ---------------------------------------------------------------------------

std::vector<std::string> good_state_violations(const ExpTriplet& q, long n) {
  std::vector<std::string> v;
  if (q.in_service() <= n - 1 && !q.queue().empty()) v.push_back("queue nonempty with idle server");
  if (q.in_service() > n) v.push_back("more than n jobs in service");

  // Each index >= 1 appears at most once across service and queue.
  std::set<long> seen;
  bool dup = false;
  for (const auto& [j, c] : q.service_multiset()) {
    if (j.index >= 1) {
      if (c > 1 || !seen.insert(j.index).second) dup = true;
    }
    if (j.index > q.nu) v.push_back("service index exceeds arrival counter");
  }
  for (const Job& j : q.queue()) {
    if (j.index == 0) v.push_back("dummy job in queue");
    if (!seen.insert(j.index).second) dup = true;
    if (j.index > q.nu) v.push_back("queue index exceeds arrival counter");
  }
  if (dup) v.push_back("duplicate positive index");

  const auto& w = q.queue();
  for (std::size_t k = 1; k < w.size(); ++k)
    if (!(w[k - 1].index < w[k].index)) {
      v.push_back("queue indices not strictly increasing");
      break;
    }
  if (!w.empty()) {
    for (const auto& [j, c] : q.service_multiset())
      if (j.index >= w.front().index) {
        v.push_back("queued index not above every in-service index");
        break;
      }
  }
  return v;
}

bool is_good(const ExpTriplet& q, long n) { return good_state_violations(q, n).empty(); }

bool is_zero_good(const ExpTriplet& q, long n) {
  if (!is_good(q, n)) return false;
  return q.count_service({0, 1}) == 0 && q.count_service({0, 2}) == 0;
}

bool is_bar_zero_good(const ExpTriplet& q, long n) {
  if (!is_good(q, n)) return false;
  return q.in_service() == n;
}

bool is_very_good(const ExpTriplet& q, long n) {
  if (!is_zero_good(q, n) || !is_bar_zero_good(q, n)) return false;
  if (q.nu != n || !q.queue().empty()) return false;
  for (long i = 1; i <= n; ++i)
    if (q.count_service({i, 1}) + q.count_service({i, 2}) != 1) return false;
  return true;
}

bool dominates(const ExpTriplet& upper, const ExpTriplet& lower) {
  if (upper.nu != lower.nu) return false;
  for (const Job& j : lower.queue())
    if (upper.count_queue(j) < lower.count_queue(j)) return false;
  for (const auto& [j, c] : lower.service_multiset()) {
    if (j.index < 1) continue;
    if (upper.count_total(j) < c) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

std::string gen_name(Gen g) {
  switch (g) {
    case Gen::kQ: return "q";
    case Gen::kQBar: return "qbar";
    case Gen::kQ0: return "q0";
    case Gen::kQBar0: return "qbar0";
    case Gen::kQPrime: return "qprime";
    case Gen::kQTilde: return "qtilde";
    case Gen::kRen: return "ren";
  }
  return "?";
}

Gen gen_from_name(const std::string& name) {
  if (name == "q") return Gen::kQ;
  if (name == "qbar") return Gen::kQBar;
  if (name == "q0") return Gen::kQ0;
  if (name == "qbar0") return Gen::kQBar0;
  if (name == "qprime") return Gen::kQPrime;
  if (name == "qtilde") return Gen::kQTilde;
  if (name == "ren") return Gen::kRen;
  throw std::invalid_argument("unknown generator: " + name);
}

namespace {

void push(std::vector<Action>& out, std::string tag, long i, int z1, int z2, double rate) {
  if (rate > 0.0) out.push_back(Action{std::move(tag), i, z1, z2, rate});
}

void check_agg(const AggState& s, const ChainParams& cp, bool full_servers) {
  if (s.N1 < 0 || s.N2 < 0 || s.W < 0) throw std::invalid_argument("bad-state: negative component");
  if (s.N1 + s.N2 > cp.n) throw std::invalid_argument("bad-state: more than n in service");
  if (s.W >= 1 && s.N1 + s.N2 != cp.n)
    throw std::invalid_argument("bad-state: positive queue with idle server");
  if (full_servers && s.N1 + s.N2 != cp.n)
    throw std::invalid_argument("bad-state: dominating chain requires all servers busy");
}

}  // namespace

std::vector<Action> enumerate_q(const AggState& s, const ChainParams& cp) {
  check_agg(s, cp, false);
  std::vector<Action> out;
  const double lam = cp.lambda, mu1 = cp.mu1, mu2 = cp.mu2, p = cp.p, th = cp.theta;
  if (s.N1 + s.N2 <= cp.n - 1) {
    push(out, "arr_svc1", 0, 1, 0, lam * p);
    push(out, "arr_svc2", 0, 2, 0, lam * (1.0 - p));
  } else {
    push(out, "arr_queue", 0, 0, 0, lam);
  }
  if (s.W == 0) {
    push(out, "dep1", 0, 1, 0, mu1 * static_cast<double>(s.N1));
    push(out, "dep2", 0, 2, 0, mu2 * static_cast<double>(s.N2));
  } else {
    push(out, "dep1_head2", 0, 1, 2, mu1 * static_cast<double>(s.N1) * (1.0 - p));
    push(out, "dep2_head1", 0, 2, 1, mu2 * static_cast<double>(s.N2) * p);
    push(out, "dep_same_or_abandon", 0, 0, 0,
         mu1 * static_cast<double>(s.N1) * p + mu2 * static_cast<double>(s.N2) * (1.0 - p) +
             th * static_cast<double>(s.W));
  }
  return out;
}

void apply_q(AggState& s, const Action& a) {
  if (a.tag == "arr_svc1") ++s.N1;
  else if (a.tag == "arr_svc2") ++s.N2;
  else if (a.tag == "arr_queue") ++s.W;
  else if (a.tag == "dep1") --s.N1;
  else if (a.tag == "dep2") --s.N2;
  else if (a.tag == "dep1_head2") { --s.N1; ++s.N2; --s.W; }
  else if (a.tag == "dep2_head1") { ++s.N1; --s.N2; --s.W; }
  else if (a.tag == "dep_same_or_abandon") --s.W;
  else throw std::logic_error("apply_q: unknown tag " + a.tag);
}

std::vector<Action> enumerate_qbar(const AggState& s, const ChainParams& cp) {
  check_agg(s, cp, true);
  std::vector<Action> out;
  const double lam = cp.lambda, mu1 = cp.mu1, mu2 = cp.mu2, p = cp.p, th = cp.theta;
  push(out, "arr_queue", 0, 0, 0, lam);
  if (s.W == 0) {
    push(out, "swap12", 0, 1, 2, mu1 * static_cast<double>(s.N1) * (1.0 - p));
    push(out, "swap21", 0, 2, 1, mu2 * static_cast<double>(s.N2) * p);
  } else {
    push(out, "dep1_head2", 0, 1, 2, mu1 * static_cast<double>(s.N1) * (1.0 - p));
    push(out, "dep2_head1", 0, 2, 1, mu2 * static_cast<double>(s.N2) * p);
    push(out, "dep_same_or_abandon", 0, 0, 0,
         mu1 * static_cast<double>(s.N1) * p + mu2 * static_cast<double>(s.N2) * (1.0 - p) +
             th * static_cast<double>(s.W));
  }
  return out;
}

void apply_qbar(AggState& s, const Action& a) {
  if (a.tag == "arr_queue") ++s.W;
  else if (a.tag == "swap12") { --s.N1; ++s.N2; }
  else if (a.tag == "swap21") { ++s.N1; --s.N2; }
  else if (a.tag == "dep1_head2") { --s.N1; ++s.N2; --s.W; }
  else if (a.tag == "dep2_head1") { ++s.N1; --s.N2; --s.W; }
  else if (a.tag == "dep_same_or_abandon") --s.W;
  else throw std::logic_error("apply_qbar: unknown tag " + a.tag);
}

std::vector<Action> enumerate_q0(const ExpTriplet& s, const ChainParams& cp) {
  if (!is_good(s, cp.n)) throw std::invalid_argument("bad-state: triplet not good");
  std::vector<Action> out;
  if (s.in_service() <= cp.n - 1) {
    for (int z = 1; z <= 2; ++z) push(out, "g1_arr_svc", 0, z, 0, cp.lambda * cp.pz(z));
  } else {
    for (int z = 1; z <= 2; ++z) push(out, "g2_arr_queue", 0, z, 0, cp.lambda * cp.pz(z));
  }
  if (s.queue().empty()) {
    for (const auto& [j, c] : s.service_multiset())
      if (j.index >= 1) push(out, "g3_dep", j.index, j.type, 0, cp.mu(j.type));
  } else {
    for (const auto& [j, c] : s.service_multiset())
      if (j.index >= 1) push(out, "g4_dep_serve_head", j.index, j.type, 0, cp.mu(j.type));
    for (const Job& j : s.queue()) push(out, "g5_abandon", j.index, j.type, 0, cp.theta);
  }
  return out;
}

void apply_q0(ExpTriplet& s, const Action& a) {
  if (a.tag == "g1_arr_svc") { s.add_service({s.nu + 1, a.z1}); ++s.nu; }
  else if (a.tag == "g2_arr_queue") { s.push_queue({s.nu + 1, a.z1}); ++s.nu; }
  else if (a.tag == "g3_dep") s.remove_service({a.i, a.z1});
  else if (a.tag == "g4_dep_serve_head") { s.remove_service({a.i, a.z1}); s.serve_head(); }
  else if (a.tag == "g5_abandon") s.remove_queue({a.i, a.z1});
  else throw std::logic_error("apply_q0: unknown tag " + a.tag);
}

std::vector<Action> enumerate_qbar0(const ExpTriplet& s, const ChainParams& cp) {
  if (!is_good(s, cp.n)) throw std::invalid_argument("bad-state: triplet not good");
  if (s.in_service() != cp.n) throw std::invalid_argument("bad-state: dominating chain needs |S| = n");
  std::vector<Action> out;
  for (int z = 1; z <= 2; ++z) push(out, "h1_arr_queue", 0, z, 0, cp.lambda * cp.pz(z));
  if (s.queue().empty()) {
    for (const auto& [j, c] : s.service_multiset())
      if (j.index >= 1)
        for (int z2 = 1; z2 <= 2; ++z2)
          push(out, "h2_dep_to_dummy", j.index, j.type, z2, cp.mu(j.type) * cp.pz(z2));
    for (int z1 = 1; z1 <= 2; ++z1) {
      const int z2 = 3 - z1;
      const int c = s.count_service({0, z1});
      push(out, "h3_dummy_swap", 0, z1, z2, static_cast<double>(c) * cp.mu(z1) * cp.pz(z2));
    }
  } else {
    for (const auto& [j, c] : s.service_multiset())
      if (j.index >= 1) push(out, "h4_dep_serve_head", j.index, j.type, 0, cp.mu(j.type));
    for (const Job& j : s.queue()) push(out, "h5_abandon", j.index, j.type, 0, cp.theta);
    for (int z = 1; z <= 2; ++z) {
      const int c = s.count_service({0, z});
      push(out, "h6_dummy_dep_serve_head", 0, z, 0, static_cast<double>(c) * cp.mu(z));
    }
  }
  return out;
}

void apply_qbar0(ExpTriplet& s, const Action& a) {
  if (a.tag == "h1_arr_queue") { s.push_queue({s.nu + 1, a.z1}); ++s.nu; }
  else if (a.tag == "h2_dep_to_dummy") { s.remove_service({a.i, a.z1}); s.add_service({0, a.z2}); }
  else if (a.tag == "h3_dummy_swap") { s.remove_service({0, a.z1}); s.add_service({0, a.z2}); }
  else if (a.tag == "h4_dep_serve_head") { s.remove_service({a.i, a.z1}); s.serve_head(); }
  else if (a.tag == "h5_abandon") s.remove_queue({a.i, a.z1});
  else if (a.tag == "h6_dummy_dep_serve_head") { s.remove_service({0, a.z1}); s.serve_head(); }
  else throw std::logic_error("apply_qbar0: unknown tag " + a.tag);
}

std::vector<Action> enumerate_qprime(const CoupledState& s, const ChainParams& cp) {
  if (cp.theta > std::min(cp.mu1, cp.mu2))
    throw std::invalid_argument("assumption-violation: theta > min(mu1,mu2) gives a negative split rate");
  const ExpTriplet& lo = s.lower;
  const ExpTriplet& hi = s.upper;
  if (!is_good(lo, cp.n) || !is_good(hi, cp.n))
    throw std::invalid_argument("bad-state: coupled component not good");
  if (!lo.queue().empty() && hi.queue().empty())
    throw std::invalid_argument("bad-state: lower queue nonempty while upper queue empty");

  std::vector<Action> out;
  // Arrivals are shared, with the same index and type in both components.
  if (lo.in_service() <= cp.n - 1) {
    for (int z = 1; z <= 2; ++z) push(out, "z1", 0, z, 0, cp.lambda * cp.pz(z));
  } else {
    for (int z = 1; z <= 2; ++z) push(out, "z2", 0, z, 0, cp.lambda * cp.pz(z));
  }

  const bool lo_empty = lo.queue().empty();
  const bool hi_empty = hi.queue().empty();

  if (lo_empty && hi_empty) {
    for (const auto& [j, c] : hi.service_multiset()) {
      if (j.index < 1) continue;
      if (lo.count_total(j) == 0) {
        for (int z2 = 1; z2 <= 2; ++z2)
          push(out, "z3", j.index, j.type, z2, cp.mu(j.type) * cp.pz(z2));
      } else if (lo.count_service(j) == 1) {
        for (int z2 = 1; z2 <= 2; ++z2)
          push(out, "z4", j.index, j.type, z2, cp.mu(j.type) * cp.pz(z2));
      }
    }
    for (int z1 = 1; z1 <= 2; ++z1) {
      const int z2 = 3 - z1;
      const int c = hi.count_service({0, z1});
      push(out, "z5", 0, z1, z2, static_cast<double>(c) * cp.mu(z1) * cp.pz(z2));
    }
  } else if (lo_empty && !hi_empty) {
    for (const auto& [j, c] : hi.service_multiset()) {
      if (j.index < 1) continue;
      if (lo.count_total(j) == 0) push(out, "z6", j.index, j.type, 0, cp.mu(j.type));
      else if (lo.count_service(j) == 1) push(out, "z8", j.index, j.type, 0, cp.mu(j.type));
    }
    for (const Job& j : hi.queue()) {
      if (lo.count_total(j) == 0) {
        push(out, "z7", j.index, j.type, 0, cp.theta);
      } else if (lo.count_service(j) == 1) {
        push(out, "z9", j.index, j.type, 0, cp.theta);
        push(out, "z10", j.index, j.type, 0, cp.mu(j.type) - cp.theta);
      }
    }
    for (int z = 1; z <= 2; ++z) {
      const int c = hi.count_service({0, z});
      push(out, "z12", 0, z, 0, static_cast<double>(c) * cp.mu(z));
    }
  } else {  // both queues nonempty
    for (const auto& [j, c] : hi.service_multiset()) {
      if (j.index < 1) continue;
      if (lo.count_total(j) == 0) push(out, "z14", j.index, j.type, 0, cp.mu(j.type));
      else if (lo.count_service(j) == 1) push(out, "z16", j.index, j.type, 0, cp.mu(j.type));
    }
    for (const Job& j : hi.queue()) {
      if (lo.count_total(j) == 0) {
        push(out, "z15", j.index, j.type, 0, cp.theta);
      } else if (lo.count_service(j) == 1) {
        push(out, "z17", j.index, j.type, 0, cp.theta);
        push(out, "z18", j.index, j.type, 0, cp.mu(j.type) - cp.theta);
      } else if (lo.count_queue(j) == 1) {
        push(out, "z19", j.index, j.type, 0, cp.theta);
      }
    }
    for (int z = 1; z <= 2; ++z) {
      const int c = hi.count_service({0, z});
      push(out, "z20", 0, z, 0, static_cast<double>(c) * cp.mu(z));
    }
  }
  return out;
}

void apply_qprime(CoupledState& s, const Action& a) {
  ExpTriplet& lo = s.lower;
  ExpTriplet& hi = s.upper;
  const Job j{a.i, a.z1};
  if (a.tag == "z1") {
    lo.add_service({lo.nu + 1, a.z1});
    ++lo.nu;
    hi.push_queue({hi.nu + 1, a.z1});
    ++hi.nu;
  } else if (a.tag == "z2") {
    lo.push_queue({lo.nu + 1, a.z1});
    ++lo.nu;
    hi.push_queue({hi.nu + 1, a.z1});
    ++hi.nu;
  } else if (a.tag == "z3") {
    hi.remove_service(j);
    hi.add_service({0, a.z2});
  } else if (a.tag == "z4") {
    lo.remove_service(j);
    hi.remove_service(j);
    hi.add_service({0, a.z2});
  } else if (a.tag == "z5") {
    hi.remove_service({0, a.z1});
    hi.add_service({0, a.z2});
  } else if (a.tag == "z6") {
    hi.remove_service(j);
    hi.serve_head();
  } else if (a.tag == "z7") {
    hi.remove_queue(j);
  } else if (a.tag == "z8") {
    lo.remove_service(j);
    hi.remove_service(j);
    hi.serve_head();
  } else if (a.tag == "z9") {
    lo.remove_service(j);
    hi.remove_queue(j);
  } else if (a.tag == "z10") {
    lo.remove_service(j);
  } else if (a.tag == "z12") {
    hi.remove_service({0, a.z1});
    hi.serve_head();
  } else if (a.tag == "z14") {
    hi.remove_service(j);
    hi.serve_head();
  } else if (a.tag == "z15") {
    hi.remove_queue(j);
  } else if (a.tag == "z16") {
    lo.remove_service(j);
    lo.serve_head();
    hi.remove_service(j);
    hi.serve_head();
  } else if (a.tag == "z17") {
    lo.remove_service(j);
    lo.serve_head();
    hi.remove_queue(j);
  } else if (a.tag == "z18") {
    lo.remove_service(j);
    lo.serve_head();
  } else if (a.tag == "z19") {
    lo.remove_queue(j);
    hi.remove_queue(j);
  } else if (a.tag == "z20") {
    hi.remove_service({0, a.z1});
    hi.serve_head();
  } else {
    throw std::logic_error("apply_qprime: unknown tag " + a.tag);
  }
}

std::vector<Action> enumerate_qtilde(const TrackState& s, const ChainParams& cp) {
  if (s.RES1 < 0 || s.RES2 < 0 || s.W < 0) throw std::invalid_argument("bad-state: negative component");
  if (s.RES1 + s.RES2 != cp.n) throw std::invalid_argument("bad-state: RES1 + RES2 != n");
  if (s.W != s.ARR - s.REN - s.ABA + s.DMY)
    throw std::invalid_argument("bad-state: counter identity broken");
  std::vector<Action> out;
  const double r1 = static_cast<double>(s.RES1), r2 = static_cast<double>(s.RES2);
  const double p1 = cp.p, p2 = 1.0 - cp.p;
  if (s.W == 0) {
    push(out, "t_ren_dummy_12", 0, 1, 2, cp.mu1 * r1 * p2);
    push(out, "t_ren_dummy_21", 0, 2, 1, cp.mu2 * r2 * p1);
    push(out, "t_ren_dummy_same", 0, 0, 0, cp.mu1 * r1 * p1 + cp.mu2 * r2 * p2);
  } else {
    push(out, "t_ren_queue_12", 0, 1, 2, cp.mu1 * r1 * p2);
    push(out, "t_ren_queue_21", 0, 2, 1, cp.mu2 * r2 * p1);
    push(out, "t_ren_queue_same", 0, 0, 0, cp.mu1 * r1 * p1 + cp.mu2 * r2 * p2);
    push(out, "t_abandon", 0, 0, 0, cp.theta * static_cast<double>(s.W));
  }
  push(out, "t_arrival", 0, 0, 0, cp.lambda);
  return out;
}

void apply_qtilde(TrackState& s, const Action& a) {
  if (a.tag == "t_ren_dummy_12") { --s.RES1; ++s.RES2; ++s.REN; ++s.DMY; }
  else if (a.tag == "t_ren_dummy_21") { ++s.RES1; --s.RES2; ++s.REN; ++s.DMY; }
  else if (a.tag == "t_ren_dummy_same") { ++s.REN; ++s.DMY; }
  else if (a.tag == "t_arrival") { ++s.W; ++s.ARR; }
  else if (a.tag == "t_ren_queue_12") { --s.RES1; ++s.RES2; --s.W; ++s.REN; }
  else if (a.tag == "t_ren_queue_21") { ++s.RES1; --s.RES2; --s.W; ++s.REN; }
  else if (a.tag == "t_ren_queue_same") { --s.W; ++s.REN; }
  else if (a.tag == "t_abandon") { --s.W; ++s.ABA; }
  else throw std::logic_error("apply_qtilde: unknown tag " + a.tag);
}

std::vector<Action> enumerate_ren(const RenState& s, const ChainParams& cp) {
  if (s.RES1 < 0 || s.RES2 < 0) throw std::invalid_argument("bad-state: negative component");
  std::vector<Action> out;
  const double r1 = static_cast<double>(s.RES1), r2 = static_cast<double>(s.RES2);
  push(out, "r_12", 0, 1, 2, cp.mu1 * r1 * (1.0 - cp.p));
  push(out, "r_21", 0, 2, 1, cp.mu2 * r2 * cp.p);
  push(out, "r_same", 0, 0, 0, cp.mu1 * r1 * cp.p + cp.mu2 * r2 * (1.0 - cp.p));
  return out;
}

void apply_ren(RenState& s, const Action& a) {
  if (a.tag == "r_12") { --s.RES1; ++s.RES2; ++s.REN; }
  else if (a.tag == "r_21") { ++s.RES1; --s.RES2; ++s.REN; }
  else if (a.tag == "r_same") ++s.REN;
  else throw std::logic_error("apply_ren: unknown tag " + a.tag);
}

// ---------------------------------------------------------------------------
// Simulation wrappers
// ---------------------------------------------------------------------------

EventLog<AggState> simulate_q(const AggState& init, const ChainParams& cp, double horizon,
                              RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_q, apply_q);
}
EventLog<AggState> simulate_qbar(const AggState& init, const ChainParams& cp, double horizon,
                                 RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_qbar, apply_qbar);
}
EventLog<ExpTriplet> simulate_q0(const ExpTriplet& init, const ChainParams& cp, double horizon,
                                 RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_q0, apply_q0);
}
EventLog<ExpTriplet> simulate_qbar0(const ExpTriplet& init, const ChainParams& cp, double horizon,
                                    RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_qbar0, apply_qbar0);
}
EventLog<CoupledState> simulate_qprime(const CoupledState& init, const ChainParams& cp,
                                       double horizon, RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_qprime, apply_qprime);
}
EventLog<TrackState> simulate_qtilde(const TrackState& init, const ChainParams& cp, double horizon,
                                     RngStream& rng) {
  return simulate_chain(init, cp, horizon, rng, enumerate_qtilde, apply_qtilde);
}

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

namespace {

long binomial_types(const SystemParams& sp, RngStream& rng, std::vector<int>* types_out) {
  const double p_hat = equilibrium_mix(sp.service);
  long n1 = 0;
  for (long i = 0; i < sp.n; ++i) {
    const bool one = rng.bernoulli(p_hat);
    if (types_out) types_out->push_back(one ? 1 : 2);
    if (one) ++n1;
  }
  return n1;
}

}  // namespace

AggState init_halfin_whitt_agg(const SystemParams& sp, RngStream& rng) {
  const long n1 = binomial_types(sp, rng, nullptr);
  return AggState{n1, sp.n - n1, 0};
}

ExpTriplet init_halfin_whitt_expanded(const SystemParams& sp, RngStream& rng) {
  std::vector<int> types;
  types.reserve(sp.n);
  binomial_types(sp, rng, &types);
  ExpTriplet t;
  for (long i = 1; i <= sp.n; ++i) t.add_service({i, types[static_cast<std::size_t>(i - 1)]});
  t.nu = sp.n;
  return t;
}

TrackState init_halfin_whitt_track(const SystemParams& sp, RngStream& rng) {
  const long n1 = binomial_types(sp, rng, nullptr);
  return TrackState{n1, sp.n - n1, 0, 0, 0, 0, 0};
}

ExpTriplet deterministic_very_good(const SystemParams& sp) {
  const double p_hat = equilibrium_mix(sp.service);
  const long n1 = std::lround(p_hat * static_cast<double>(sp.n));
  ExpTriplet t;
  for (long i = 1; i <= sp.n; ++i) t.add_service({i, i <= n1 ? 1 : 2});
  t.nu = sp.n;
  return t;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

AuditReport dominance_audit(const EventLog<CoupledState>& log, long n) {
  AuditReport rep;
  if (!(log.init.lower == log.init.upper) || !is_very_good(log.init.lower, n))
    throw std::invalid_argument("dominance_audit: initial state not a shared very-good triplet");
  auto check = [&](const CoupledState& s, double t) {
    if (!is_zero_good(s.lower, n)) return std::string("lower not 0-good at t=") + std::to_string(t);
    if (!is_bar_zero_good(s.upper, n))
      return std::string("upper not 0bar-good at t=") + std::to_string(t);
    if (!dominates(s.upper, s.lower)) return std::string("comparator fails at t=") + std::to_string(t);
    if (s.upper.queue().size() < s.lower.queue().size())
      return std::string("queue-length ordering fails at t=") + std::to_string(t);
    return std::string();
  };
  std::string v = check(log.init, 0.0);
  for (const auto& ev : log.events) {
    if (!v.empty()) break;
    v = check(ev.post, ev.t);
    ++rep.events_checked;
  }
  if (!v.empty()) {
    rep.pass = false;
    rep.first_violation = v;
  }
  return rep;
}

namespace {

template <class State, class EnumFn, class ApplyFn>
std::map<State, double> grouped_rates(const State& s, const ChainParams& cp, EnumFn&& en,
                                      ApplyFn&& ap) {
  std::map<State, double> m;
  for (const Action& a : en(s, cp)) {
    State next = s;
    ap(next, a);
    m[next] += a.rate;
  }
  return m;
}

}  // namespace

AuditReport marginal_rate_consistency(const CoupledState& s, const ChainParams& cp, double tol) {
  AuditReport rep;
  // Group coupled rates by the outcome of one component, drop self-loops, and
  // compare against the marginal generator.
  auto compare = [&](auto project, auto marginal_enum, auto marginal_apply, const ExpTriplet& mstate,
                     const char* side) {
    std::map<ExpTriplet, double> coupled;
    for (const Action& a : enumerate_qprime(s, cp)) {
      CoupledState next = s;
      apply_qprime(next, a);
      ExpTriplet proj = project(next);
      if (proj == mstate) continue;  // self-loop w.r.t. this component
      coupled[proj] += a.rate;
    }
    const auto direct = grouped_rates(mstate, cp, marginal_enum, marginal_apply);
    for (const auto& [st, rate] : coupled) {
      auto it = direct.find(st);
      if (it == direct.end()) {
        rep.pass = false;
        rep.first_violation = std::string(side) + ": coupled transition absent in marginal chain";
        return;
      }
      if (std::fabs(it->second - rate) > tol * std::max(1.0, it->second)) {
        rep.pass = false;
        rep.first_violation = std::string(side) + ": rate mismatch";
        return;
      }
    }
    for (const auto& [st, rate] : direct) {
      if (coupled.find(st) == coupled.end()) {
        rep.pass = false;
        rep.first_violation = std::string(side) + ": marginal transition missing from coupling";
        return;
      }
    }
  };
  compare([](const CoupledState& c) { return c.lower; }, enumerate_q0, apply_q0, s.lower, "lower");
  if (rep.pass)
    compare([](const CoupledState& c) { return c.upper; }, enumerate_qbar0, apply_qbar0, s.upper,
            "upper");
  rep.events_checked = 1;
  return rep;
}

bool conservation_audit(const EventLog<TrackState>& log) {
  auto holds = [](const TrackState& s) { return s.W == s.ARR - s.REN - s.ABA + s.DMY; };
  if (!holds(log.init)) return false;
  TrackState prev = log.init;
  for (const auto& ev : log.events) {
    if (!holds(ev.post)) return false;
    if (ev.post.DMY > prev.DMY && prev.W != 0) return false;
    prev = ev.post;
  }
  return true;
}

std::vector<long> queue_at_time(Gen gen, std::size_t n_reps, double T, const SystemParams& sp,
                                std::uint64_t seed, int n_threads) {
  if (n_reps == 0) throw std::invalid_argument("queue_at_time: empty-sample");
  const ChainParams cp = ChainParams::from(sp);
  const ExpTriplet start = deterministic_very_good(sp);
  const AggState agg_start{start.count_type_in_service(1), start.count_type_in_service(2), 0};
  std::vector<long> out(n_reps, 0);
  parallel_for(n_reps, n_threads, [&](std::size_t r) {
    RngStream rng(seed, r);
    long w = 0;
    switch (gen) {
      case Gen::kQ0: {
        auto log = simulate_q0(start, cp, T, rng);
        w = log.events.empty() ? 0 : static_cast<long>(log.events.back().post.queue().size());
        break;
      }
      case Gen::kQBar0: {
        auto log = simulate_qbar0(start, cp, T, rng);
        w = log.events.empty() ? 0 : static_cast<long>(log.events.back().post.queue().size());
        break;
      }
      case Gen::kQ: {
        auto log = simulate_q(agg_start, cp, T, rng);
        w = log.events.empty() ? 0 : log.events.back().post.W;
        break;
      }
      case Gen::kQBar: {
        auto log = simulate_qbar(agg_start, cp, T, rng);
        w = log.events.empty() ? 0 : log.events.back().post.W;
        break;
      }
      default:
        throw std::invalid_argument("queue_at_time: unsupported generator");
    }
    out[r] = w;
  });
  return out;
}

FidelityReport marginal_fidelity(std::size_t n_reps, double T, const SystemParams& sp,
                                 std::uint64_t seed, int n_threads) {
  if (n_reps == 0) throw std::invalid_argument("marginal_fidelity: empty-sample");
  sp.validate(RegimeCheck::kDominanceCoupling);
  const ChainParams cp = ChainParams::from(sp);
  const ExpTriplet start = deterministic_very_good(sp);

  std::vector<long> lower_proj(n_reps), upper_proj(n_reps), direct_lo(n_reps), direct_hi(n_reps);
  parallel_for(n_reps, n_threads, [&](std::size_t r) {
    {
      RngStream rng(seed, 4 * r);
      CoupledState c{start, start};
      auto log = simulate_qprime(c, cp, T, rng);
      const CoupledState& fin = log.events.empty() ? c : log.events.back().post;
      lower_proj[r] = static_cast<long>(fin.lower.queue().size());
    }
    {
      RngStream rng(seed, 4 * r + 1);
      CoupledState c{start, start};
      auto log = simulate_qprime(c, cp, T, rng);
      const CoupledState& fin = log.events.empty() ? c : log.events.back().post;
      upper_proj[r] = static_cast<long>(fin.upper.queue().size());
    }
    {
      RngStream rng(seed, 4 * r + 2);
      auto log = simulate_q0(start, cp, T, rng);
      direct_lo[r] = log.events.empty() ? 0 : static_cast<long>(log.events.back().post.queue().size());
    }
    {
      RngStream rng(seed, 4 * r + 3);
      auto log = simulate_qbar0(start, cp, T, rng);
      direct_hi[r] = log.events.empty() ? 0 : static_cast<long>(log.events.back().post.queue().size());
    }
  });

  FidelityReport rep;
  rep.n_reps = n_reps;
  rep.p_value_lower = chi2_two_sample(lower_proj, direct_lo).p_value;
  rep.p_value_upper = chi2_two_sample(upper_proj, direct_hi).p_value;
  return rep;
}

// ---------------------------------------------------------------------------
// Steady-state tail estimation
// ---------------------------------------------------------------------------

double default_burn_in(const SystemParams& sp) { return 10.0 * std::max(1.0 / sp.theta, 1.0); }

SurvivalCurve steady_tail_estimate(Gen gen, const SystemParams& sp, double burn_in, double horizon,
                                   std::size_t n_reps, const std::vector<double>& x_grid,
                                   std::uint64_t seed, int n_threads, std::size_t min_events) {
  if (!(horizon > burn_in)) throw std::invalid_argument("steady_tail_estimate: horizon <= burn_in");
  if (gen != Gen::kQ && gen != Gen::kQBar)
    throw std::invalid_argument("steady_tail_estimate: aggregate chains only");
  const ChainParams cp = ChainParams::from(sp);
  const double sqn = std::sqrt(static_cast<double>(sp.n));
  constexpr std::size_t kBatches = 30;

  // occupancy[rep][batch][ix] = time with n^{-1/2} W > x within the batch.
  std::vector<std::vector<std::vector<double>>> occ(
      n_reps, std::vector<std::vector<double>>(kBatches, std::vector<double>(x_grid.size(), 0.0)));
  std::vector<std::size_t> events_post(n_reps, 0);

  const double batch_len = (horizon - burn_in) / static_cast<double>(kBatches);
  parallel_for(n_reps, n_threads, [&](std::size_t r) {
    RngStream rng(seed, r);
    AggState state = init_halfin_whitt_agg(sp, rng);
    double t = 0.0;
    std::vector<Action> acts;
    for (;;) {
      acts = gen == Gen::kQ ? enumerate_q(state, cp) : enumerate_qbar(state, cp);
      double total = 0.0;
      for (const Action& a : acts) total += a.rate;
      if (!std::isfinite(total)) throw std::runtime_error("simulate: rate-overflow");
      if (total <= 0.0) break;
      const double dt = rng.expo(total);
      double t_next = t + dt;
      if (t_next > horizon) t_next = horizon;
      // Accumulate occupancy of the current state over [t, t_next).
      if (t_next > burn_in) {
        const double w_scaled = static_cast<double>(state.W) / sqn;
        double a = std::max(t, burn_in);
        while (a < t_next) {
          const std::size_t b = std::min(
              kBatches - 1, static_cast<std::size_t>((a - burn_in) / batch_len));
          // The last batch owns everything up to the horizon so rounding at
          // the final boundary cannot produce a zero-length segment.
          const double b_end = b + 1 == kBatches
                                   ? horizon
                                   : burn_in + static_cast<double>(b + 1) * batch_len;
          const double hi = std::min(t_next, b_end);
          if (!(hi > a)) break;
          for (std::size_t ix = 0; ix < x_grid.size(); ++ix)
            if (w_scaled > x_grid[ix]) occ[r][b][ix] += hi - a;
          a = hi;
        }
        ++events_post[r];
      }
      if (t + dt > horizon) break;
      t += dt;
      double u = rng.uniform() * total;
      std::size_t pick = acts.size() - 1;
      for (std::size_t k = 0; k < acts.size(); ++k) {
        u -= acts[k].rate;
        if (u <= 0.0) {
          pick = k;
          break;
        }
      }
      if (gen == Gen::kQ) apply_q(state, acts[pick]); else apply_qbar(state, acts[pick]);
    }
  });

  std::size_t total_events = 0;
  for (std::size_t e : events_post) total_events += e;
  if (total_events < min_events)
    throw std::runtime_error("steady_tail_estimate: insufficient-data");

  SurvivalCurve curve;
  curve.x = x_grid;
  curve.survival.resize(x_grid.size());
  curve.se.resize(x_grid.size());
  curve.time_averaged = (horizon - burn_in) * static_cast<double>(n_reps);
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
    std::vector<double> batch_fracs;
    batch_fracs.reserve(n_reps * kBatches);
    for (std::size_t r = 0; r < n_reps; ++r)
      for (std::size_t b = 0; b < kBatches; ++b) batch_fracs.push_back(occ[r][b][ix] / batch_len);
    const MeanSe ms = mean_and_se(batch_fracs);
    curve.survival[ix] = ms.mean;
    curve.se[ix] = ms.se;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string eventlog_csv(const EventLog<AggState>& log) {
  std::ostringstream os;
  os << "time,tag,N1,N2,W\n";
  os << num(0.0) << ",init," << log.init.N1 << "," << log.init.N2 << "," << log.init.W << "\n";
  for (const auto& e : log.events)
    os << num(e.t) << "," << e.action.tag << "," << e.post.N1 << "," << e.post.N2 << ","
       << e.post.W << "\n";
  return os.str();
}

std::string eventlog_csv(const EventLog<TrackState>& log) {
  std::ostringstream os;
  os << "time,tag,RES1,RES2,W,ARR,REN,ABA,DMY\n";
  auto row = [&](double t, const std::string& tag, const TrackState& s) {
    os << num(t) << "," << tag << "," << s.RES1 << "," << s.RES2 << "," << s.W << "," << s.ARR
       << "," << s.REN << "," << s.ABA << "," << s.DMY << "\n";
  };
  row(0.0, "init", log.init);
  for (const auto& e : log.events) row(e.t, e.action.tag, e.post);
  return os.str();
}

std::string eventlog_csv(const EventLog<CoupledState>& log) {
  std::ostringstream os;
  os << "time,tag,lower_in_service,lower_queue,upper_in_service,upper_queue\n";
  auto row = [&](double t, const std::string& tag, const CoupledState& s) {
    os << num(t) << "," << tag << "," << s.lower.in_service() << "," << s.lower.queue().size()
       << "," << s.upper.in_service() << "," << s.upper.queue().size() << "\n";
  };
  row(0.0, "init", log.init);
  for (const auto& e : log.events) row(e.t, e.action.tag, e.post);
  return os.str();
}

namespace {

constexpr char kLogMagic[8] = {'M', 'H', '2', 'N', 'L', 'O', 'G', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(in.at(pos++)) << (8 * k);
  return v;
}

std::uint64_t double_bits(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, 8);
  return b;
}

double bits_double(std::uint64_t b) {
  double x;
  std::memcpy(&x, &b, 8);
  return x;
}

void put_track(std::vector<std::uint8_t>& out, const TrackState& s) {
  put_u64(out, static_cast<std::uint64_t>(s.RES1));
  put_u64(out, static_cast<std::uint64_t>(s.RES2));
  put_u64(out, static_cast<std::uint64_t>(s.W));
  put_u64(out, static_cast<std::uint64_t>(s.ARR));
  put_u64(out, static_cast<std::uint64_t>(s.REN));
  put_u64(out, static_cast<std::uint64_t>(s.ABA));
  put_u64(out, static_cast<std::uint64_t>(s.DMY));
}

TrackState get_track(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  TrackState s;
  s.RES1 = static_cast<long>(get_u64(in, pos));
  s.RES2 = static_cast<long>(get_u64(in, pos));
  s.W = static_cast<long>(get_u64(in, pos));
  s.ARR = static_cast<long>(get_u64(in, pos));
  s.REN = static_cast<long>(get_u64(in, pos));
  s.ABA = static_cast<long>(get_u64(in, pos));
  s.DMY = static_cast<long>(get_u64(in, pos));
  return s;
}

// Stable numeric ids for counter-chain tags in the binary frame format.
const char* kTrackTags[] = {"t_ren_dummy_12", "t_ren_dummy_21", "t_ren_dummy_same", "t_arrival",
                            "t_ren_queue_12", "t_ren_queue_21", "t_ren_queue_same", "t_abandon"};

std::uint64_t track_tag_id(const std::string& tag) {
  for (std::uint64_t k = 0; k < 8; ++k)
    if (tag == kTrackTags[k]) return k;
  throw std::logic_error("eventlog_binary: unknown tag " + tag);
}

}  // namespace

std::vector<std::uint8_t> eventlog_binary(const EventLog<TrackState>& log) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kLogMagic, kLogMagic + 8);
  put_u64(out, double_bits(log.horizon));
  put_u64(out, log.seed);
  put_track(out, log.init);
  put_u64(out, log.events.size());
  for (const auto& e : log.events) {
    put_u64(out, double_bits(e.t));
    put_u64(out, track_tag_id(e.action.tag));
    put_track(out, e.post);
  }
  return out;
}

EventLog<TrackState> eventlog_from_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kLogMagic, 8) != 0)
    throw std::invalid_argument("eventlog_from_binary: bad magic");
  std::size_t pos = 8;
  EventLog<TrackState> log;
  log.horizon = bits_double(get_u64(bytes, pos));
  log.seed = get_u64(bytes, pos);
  log.init = get_track(bytes, pos);
  const std::uint64_t n = get_u64(bytes, pos);
  log.events.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    Event<TrackState> e;
    e.t = bits_double(get_u64(bytes, pos));
    e.action.tag = kTrackTags[get_u64(bytes, pos)];
    e.post = get_track(bytes, pos);
    log.events.push_back(std::move(e));
  }
  return log;
}

}  // namespace mh2n
