#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mh2n/model.hpp"
#include "mh2n/rng.hpp"

namespace mh2n {

// Rates shared by all chains. lambda is the raw arrival rate (in the
// Halfin-Whitt regime lambda = n + B sqrt(n)).
struct ChainParams {
  long n = 1;
  double lambda = 1.0;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double p = 0.5;
  double theta = 1.0;

  static ChainParams from(const SystemParams& sp) {
    return ChainParams{sp.n, sp.lambda(), sp.service.mu1, sp.service.mu2, sp.service.p, sp.theta};
  }
  double mu(int type) const { return type == 1 ? mu1 : mu2; }
  double pz(int type) const { return type == 1 ? p : 1.0 - p; }
};

// ---------------------------------------------------------------------------
// State types
// ---------------------------------------------------------------------------

// Aggregate state for the plain and dominating chains.
struct AggState {
  long N1 = 0;
  long N2 = 0;
  long W = 0;
  auto operator<=>(const AggState&) const = default;
};

// A job: arrival index (0 for dummies) and service type in {1,2}.
struct Job {
  long index = 0;
  int type = 1;
  auto operator<=>(const Job&) const = default;
};

// Expanded per-job state: unordered multiset of jobs in service, FCFS queue,
// and the arrival counter.
class ExpTriplet {
 public:
  long nu = 0;

  long in_service() const { return s_size_; }
  const std::map<Job, int>& service_multiset() const { return service_; }
  const std::vector<Job>& queue() const { return queue_; }

  int count_service(const Job& j) const;
  int count_queue(const Job& j) const;
  int count_total(const Job& j) const { return count_service(j) + count_queue(j); }
  long count_type_in_service(int type) const;

  void add_service(const Job& j);
  void remove_service(const Job& j);  // throws if absent
  void push_queue(const Job& j);      // append at the back
  void remove_queue(const Job& j);    // throws if absent
  Job queue_front() const;

  // Moves the queue head into service.
  void serve_head();

  bool operator==(const ExpTriplet& o) const {
    return nu == o.nu && service_ == o.service_ && queue_ == o.queue_;
  }
  bool operator<(const ExpTriplet& o) const;

  std::string brief() const;

 private:
  std::map<Job, int> service_;
  std::vector<Job> queue_;
  long s_size_ = 0;
};

// Good-state predicates (each condition separately testable via reasons()).
bool is_good(const ExpTriplet& q, long n);
bool is_zero_good(const ExpTriplet& q, long n);
bool is_bar_zero_good(const ExpTriplet& q, long n);
bool is_very_good(const ExpTriplet& q, long n);
std::vector<std::string> good_state_violations(const ExpTriplet& q, long n);

// Comparator for expanded representations: upper >= lower.
bool dominates(const ExpTriplet& upper, const ExpTriplet& lower);

// Coupled state driven by the joint generator; lower tracks the plain chain,
// upper the dominating chain.
struct CoupledState {
  ExpTriplet lower;
  ExpTriplet upper;
  bool operator==(const CoupledState&) const = default;
};

// Expanded counter state for the dominating chain: residual-type counts,
// queue length, and cumulative arrival / renewal / abandonment / dummy
// counters.
struct TrackState {
  long RES1 = 0;
  long RES2 = 0;
  long W = 0;
  long ARR = 0;
  long REN = 0;
  long ABA = 0;
  long DMY = 0;
  auto operator<=>(const TrackState&) const = default;
};

// Pooled equilibrium renewal process state.
struct RenState {
  long RES1 = 0;
  long RES2 = 0;
  long REN = 0;
  auto operator<=>(const RenState&) const = default;
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class Gen { kQ, kQBar, kQ0, kQBar0, kQPrime, kQTilde, kRen };
std::string gen_name(Gen g);
Gen gen_from_name(const std::string& name);

// One enabled transition: a tag naming the generator clause, the job /
// type arguments it acts on, and its strictly positive rate.
struct Action {
  std::string tag;
  long i = 0;
  int z1 = 0;
  int z2 = 0;
  double rate = 0.0;
};

// Exhaustive positive-rate transition lists, exactly as the generator
// definitions write them (self-loops excluded). Throw "bad-state" when the
// structural invariants fail and "assumption-violation" when the rate split
// of the coupled chain would go negative.
std::vector<Action> enumerate_q(const AggState& s, const ChainParams& cp);
std::vector<Action> enumerate_qbar(const AggState& s, const ChainParams& cp);
std::vector<Action> enumerate_q0(const ExpTriplet& s, const ChainParams& cp);
std::vector<Action> enumerate_qbar0(const ExpTriplet& s, const ChainParams& cp);
std::vector<Action> enumerate_qprime(const CoupledState& s, const ChainParams& cp);
std::vector<Action> enumerate_qtilde(const TrackState& s, const ChainParams& cp);
std::vector<Action> enumerate_ren(const RenState& s, const ChainParams& cp);

void apply_q(AggState& s, const Action& a);
void apply_qbar(AggState& s, const Action& a);
void apply_q0(ExpTriplet& s, const Action& a);
void apply_qbar0(ExpTriplet& s, const Action& a);
void apply_qprime(CoupledState& s, const Action& a);
void apply_qtilde(TrackState& s, const Action& a);
void apply_ren(RenState& s, const Action& a);

// Materialized (next_state, rate) pairs, for audits and tests.
template <class State, class EnumFn, class ApplyFn>
std::vector<std::pair<State, double>> materialize_transitions(const State& s, const ChainParams& cp,
                                                              EnumFn&& enumerate, ApplyFn&& apply) {
  std::vector<std::pair<State, double>> out;
  for (const Action& a : enumerate(s, cp)) {
    State next = s;
    apply(next, a);
    out.emplace_back(std::move(next), a.rate);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event-exact simulation
// ---------------------------------------------------------------------------

template <class State>
struct Event {
  double t = 0.0;
  Action action;
  State post;
};

template <class State>
struct EventLog {
  State init;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<Event<State>> events;
};

// Exponential holding time at the total exit rate, categorical next-state
// draw proportional to rates. Deterministic replay for a fixed
// (generator, init, seed). Throws "rate-overflow" on a non-finite total rate.
template <class State, class EnumFn, class ApplyFn>
EventLog<State> simulate_chain(const State& init, const ChainParams& cp, double horizon,
                               RngStream& rng, EnumFn&& enumerate, ApplyFn&& apply,
                               const std::function<void(double, const Action&, const State&)>&
                                   visitor = nullptr) {
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be positive");
  EventLog<State> log;
  log.init = init;
  log.horizon = horizon;
  State state = init;
  double t = 0.0;
  std::vector<Action> acts;
  for (;;) {
    acts = enumerate(state, cp);
    double total = 0.0;
    for (const Action& a : acts) total += a.rate;
    if (!std::isfinite(total)) throw std::runtime_error("simulate: rate-overflow");
    if (total <= 0.0) break;  // absorbing; log simply ends at the horizon
    t += rng.expo(total);
    if (t > horizon) break;
    double u = rng.uniform() * total;
    std::size_t pick = acts.size() - 1;
    for (std::size_t k = 0; k < acts.size(); ++k) {
      u -= acts[k].rate;
      if (u <= 0.0) {
        pick = k;
        break;
      }
    }
    apply(state, acts[pick]);
    if (visitor) visitor(t, acts[pick], state);
    log.events.push_back(Event<State>{t, acts[pick], state});
  }
  return log;
}

EventLog<AggState> simulate_q(const AggState& init, const ChainParams& cp, double horizon,
                              RngStream& rng);
EventLog<AggState> simulate_qbar(const AggState& init, const ChainParams& cp, double horizon,
                                 RngStream& rng);
EventLog<ExpTriplet> simulate_q0(const ExpTriplet& init, const ChainParams& cp, double horizon,
                                 RngStream& rng);
EventLog<ExpTriplet> simulate_qbar0(const ExpTriplet& init, const ChainParams& cp, double horizon,
                                    RngStream& rng);
EventLog<CoupledState> simulate_qprime(const CoupledState& init, const ChainParams& cp,
                                       double horizon, RngStream& rng);
EventLog<TrackState> simulate_qtilde(const TrackState& init, const ChainParams& cp, double horizon,
                                     RngStream& rng);

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

// n jobs in service with types drawn i.i.d. with P(type 1) = p_hat = p/mu1,
// empty queue. Requires unit mean service.
AggState init_halfin_whitt_agg(const SystemParams& sp, RngStream& rng);
ExpTriplet init_halfin_whitt_expanded(const SystemParams& sp, RngStream& rng);
TrackState init_halfin_whitt_track(const SystemParams& sp, RngStream& rng);

// Deterministic very-good triplet with round(n * p_hat) type-1 jobs.
ExpTriplet deterministic_very_good(const SystemParams& sp);

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

struct AuditReport {
  bool pass = true;
  std::size_t events_checked = 0;
  std::string first_violation;  // empty when pass
};

// Checks along a coupled-chain log: lower stays 0-good, upper stays
// 0bar-good, upper >= lower, and |upper queue| >= |lower queue| at every
// event. The log must start from a very-good shared triplet.
AuditReport dominance_audit(const EventLog<CoupledState>& log, long n);

// Row-sum consistency at one state: coupled-chain rates grouped by the
// lower (resp. upper) component outcome must reproduce the marginal chain's
// transition rates exactly.
AuditReport marginal_rate_consistency(const CoupledState& s, const ChainParams& cp,
                                      double tol = 1e-12);

// Conservation identity along a counter-chain log: W = ARR - REN - ABA + DMY
// at every event, and DMY increments only while the queue is empty.
bool conservation_audit(const EventLog<TrackState>& log);

// Two-sample distributional check of the coupled chain's marginals against
// the directly simulated chains, via the queue length at time T.
struct FidelityReport {
  double p_value_lower = 1.0;  // coupled lower component vs direct plain chain
  double p_value_upper = 1.0;  // coupled upper component vs direct dominating chain
  std::size_t n_reps = 0;
};
FidelityReport marginal_fidelity(std::size_t n_reps, double T, const SystemParams& sp,
                                 std::uint64_t seed, int n_threads = 0);

// Queue-length distribution of one chain at time T over n_reps replications:
// used to compare arbitrary pairs of chains.
std::vector<long> queue_at_time(Gen gen, std::size_t n_reps, double T, const SystemParams& sp,
                                std::uint64_t seed, int n_threads = 0);

// ---------------------------------------------------------------------------
// Steady-state tail estimation
// ---------------------------------------------------------------------------

struct SurvivalCurve {
  std::vector<double> x;         // thresholds for n^{-1/2} W
  std::vector<double> survival;  // time-averaged P(n^{-1/2} W > x)
  std::vector<double> se;        // batch-means standard errors
  double time_averaged = 0.0;    // total post-burn-in time
};

// Time-averaged (post burn-in) survival of the rescaled queue length, with
// batch-means errors over 30 batches per replication. Throws
// "insufficient-data" when fewer than min_events post-burn-in events occur.
SurvivalCurve steady_tail_estimate(Gen gen, const SystemParams& sp, double burn_in, double horizon,
                                   std::size_t n_reps, const std::vector<double>& x_grid,
                                   std::uint64_t seed, int n_threads = 0,
                                   std::size_t min_events = 1000);

// Default burn-in: 10 max(1/theta, 1) time units.
double default_burn_in(const SystemParams& sp);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

std::string eventlog_csv(const EventLog<AggState>& log);
std::string eventlog_csv(const EventLog<TrackState>& log);
std::string eventlog_csv(const EventLog<CoupledState>& log);

// Framed binary export: magic "MH2NLOG1", then per event a frame of
// little-endian 64-bit fields (time as IEEE double bits, then the state
// fields). Documented in README.
std::vector<std::uint8_t> eventlog_binary(const EventLog<TrackState>& log);
EventLog<TrackState> eventlog_from_binary(const std::vector<std::uint8_t>& bytes);

}  // namespace mh2n
