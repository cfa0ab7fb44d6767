#include "mh2n/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mh2n/birth_death.hpp"
#include "mh2n/ctmc.hpp"
#include "mh2n/diffusion.hpp"
#include "mh2n/gauss.hpp"
#include "mh2n/skorokhod.hpp"
#include "mh2n/stats.hpp"

namespace mh2n {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double RunConfig::extra_num(const std::string& key, double fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : std::stod(it->second);
}

long RunConfig::extra_int(const std::string& key, long fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : std::stol(it->second);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::string> main_kv;
  std::map<std::string, std::string> exp_kv;
  bool in_experiment = false;
  std::istringstream is(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t == "[experiment]") in_experiment = true;
      else throw std::invalid_argument("config: unknown section " + t);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config: malformed line '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    (in_experiment ? exp_kv : main_kv)[key] = val;
  }

  try {
    cfg.params.n = std::stol(main_kv.at("n"));
    cfg.params.B = std::stod(main_kv.at("B"));
    cfg.params.service.p = std::stod(main_kv.at("p"));
    cfg.params.service.mu1 = std::stod(main_kv.at("mu1"));
    cfg.params.service.mu2 = std::stod(main_kv.at("mu2"));
    cfg.params.theta = std::stod(main_kv.at("theta"));
  } catch (const std::exception&) {
    throw std::invalid_argument("config: missing or malformed system parameter key");
  }
  if (auto it = exp_kv.find("id"); it != exp_kv.end()) cfg.experiment = it->second;
  if (auto it = exp_kv.find("seed"); it != exp_kv.end()) cfg.seed = std::stoull(it->second);
  if (auto it = exp_kv.find("reps"); it != exp_kv.end()) cfg.reps = std::stoull(it->second);
  if (auto it = exp_kv.find("parallel"); it != exp_kv.end()) cfg.parallel = std::stoi(it->second);
  if (auto it = exp_kv.find("out"); it != exp_kv.end()) cfg.out_dir = it->second;
  cfg.extra = std::move(exp_kv);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

json params_json(const SystemParams& p) {
  return json{{"n", p.n},
              {"B", p.B},
              {"p", p.service.p},
              {"mu1", p.service.mu1},
              {"mu2", p.service.mu2},
              {"theta", p.theta}};
}

struct Artifacts {
  std::string results_csv;
  std::string summary;
  json manifest_extra;
};

Artifacts run_exponent(const RunConfig& cfg) {
  const ExponentReport er = exponents(cfg.params.theta, cfg.params.service.mu1, cfg.params.service.mu2);
  Artifacts a;
  a.results_csv = er.csv_header() + "\n" + er.csv_row() + "\n";
  std::ostringstream os;
  os << "true exponent:        " << format_double(er.true_exponent) << "\n"
     << "conjectured exponent: " << format_double(er.dai_he_exponent) << "\n"
     << "sup variance:         " << format_double(er.sup_variance) << "\n"
     << "gap (true - conj):    " << format_double(er.gap) << "\n";
  a.summary = os.str();
  return a;
}

Artifacts run_counterexample(const RunConfig& cfg) {
  (void)cfg;
  const HyperExp2 sa = counterexample_a();
  const HyperExp2 sb = counterexample_b();
  const double theta = 0.2;
  const ExponentReport ra = exponents(theta, sa.mu1, sa.mu2);
  const ExponentReport rb = exponents(theta, sb.mu1, sb.mu2);
  Artifacts a;
  std::ostringstream csv;
  csv << "dist,p,mu1,mu2,mean,second_moment,true_exponent,dai_he_exponent\n";
  csv << "S_a," << format_double(sa.p) << "," << format_double(sa.mu1) << ","
      << format_double(sa.mu2) << "," << format_double(sa.mean()) << ","
      << format_double(sa.second_moment()) << "," << format_double(ra.true_exponent) << ","
      << format_double(ra.dai_he_exponent) << "\n";
  csv << "S_b," << format_double(sb.p) << "," << format_double(sb.mu1) << ","
      << format_double(sb.mu2) << "," << format_double(sb.mean()) << ","
      << format_double(sb.second_moment()) << "," << format_double(rb.true_exponent) << ","
      << format_double(rb.dai_he_exponent) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "moment-matched pair at theta = 0.2\n"
     << "S_a: mean " << format_double(sa.mean()) << ", E[S^2] " << format_double(sa.second_moment())
     << ", true exponent " << format_double(ra.true_exponent) << "\n"
     << "S_b: mean " << format_double(sb.mean()) << ", E[S^2] " << format_double(sb.second_moment())
     << ", true exponent " << format_double(rb.true_exponent) << "\n"
     << "conjectured exponent (both): " << format_double(ra.dai_he_exponent) << " vs "
     << format_double(rb.dai_he_exponent) << "\n"
     << "exponent difference: " << format_double(ra.true_exponent - rb.true_exponent) << "\n";
  a.summary = os.str();
  return a;
}

Artifacts run_simulate(const RunConfig& cfg) {
  const std::string gen = cfg.extra.count("generator") ? cfg.extra.at("generator") : "qtilde";
  const double horizon = cfg.extra_num("horizon", 10.0);
  const ChainParams cp = ChainParams::from(cfg.params);
  RngStream rng(cfg.seed, 0);
  Artifacts a;
  const Gen g = gen_from_name(gen);
  if (g == Gen::kQTilde) {
    const TrackState init = init_halfin_whitt_track(cfg.params, rng);
    const auto log = simulate_qtilde(init, cp, horizon, rng);
    a.results_csv = eventlog_csv(log);
    std::ostringstream os;
    os << "generator qtilde, horizon " << format_double(horizon) << ", events "
       << log.events.size() << "\n";
    a.summary = os.str();
  } else if (g == Gen::kQ || g == Gen::kQBar) {
    const AggState init = init_halfin_whitt_agg(cfg.params, rng);
    const auto log = g == Gen::kQ ? simulate_q(init, cp, horizon, rng)
                                  : simulate_qbar(init, cp, horizon, rng);
    a.results_csv = eventlog_csv(log);
    std::ostringstream os;
    os << "generator " << gen << ", horizon " << format_double(horizon) << ", events "
       << log.events.size() << "\n";
    a.summary = os.str();
  } else {
    const ExpTriplet init = deterministic_very_good(cfg.params);
    if (g == Gen::kQPrime) {
      const auto log = simulate_qprime(CoupledState{init, init}, cp, horizon, rng);
      a.results_csv = eventlog_csv(log);
      std::ostringstream os;
      os << "generator qprime, horizon " << format_double(horizon) << ", events "
         << log.events.size() << "\n";
      a.summary = os.str();
    } else {
      throw std::invalid_argument("simulate: unsupported generator " + gen);
    }
  }
  return a;
}

Artifacts run_dominance(const RunConfig& cfg) {
  const double horizon = cfg.extra_num("horizon", 50.0);
  const ChainParams cp = ChainParams::from(cfg.params);
  std::size_t passes = 0;
  std::string first_violation;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    RngStream rng(cfg.seed, r);
    const ExpTriplet init = init_halfin_whitt_expanded(cfg.params, rng);
    const auto log = simulate_qprime(CoupledState{init, init}, cp, horizon, rng);
    const AuditReport rep = dominance_audit(log, cfg.params.n);
    if (rep.pass) ++passes;
    else if (first_violation.empty()) first_violation = rep.first_violation;
  }
  Artifacts a;
  std::ostringstream csv;
  csv << "reps,passes,failures\n" << cfg.reps << "," << passes << "," << (cfg.reps - passes) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "dominance audit: " << passes << "/" << cfg.reps << " paths pass";
  if (!first_violation.empty()) os << "; first violation: " << first_violation;
  os << "\n";
  a.summary = os.str();
  a.manifest_extra["horizon"] = horizon;
  return a;
}

Artifacts run_skorokhod(const RunConfig& cfg) {
  const double horizon = cfg.extra_num("horizon", 10.0);
  const double theta = cfg.params.theta;
  double worst_gap = 0.0, worst_comp = 0.0, worst_ratio = 0.0;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    RngStream rng(cfg.seed, r);
    const PathPL x = random_fuzz_path(horizon, rng);
    const SkorSolution sol = solve_phi_psi(x, theta);
    for (int k = 0; k <= 100; ++k) {
      const double t = horizon * k / 100.0;
      worst_gap = std::max(worst_gap, std::fabs(sol.phi.value(t) - reed_sup(x, theta, t)));
    }
    worst_comp = std::max(worst_comp, sol.complementarity_residual());
    const PathPL y = random_fuzz_path(horizon, rng);
    worst_ratio = std::max(worst_ratio, lipschitz_ratio(x, y, theta));
  }
  Artifacts a;
  std::ostringstream csv;
  csv << "paths,max_solver_sup_gap,max_complementarity,max_lipschitz_ratio\n"
      << cfg.reps << "," << format_double(worst_gap) << "," << format_double(worst_comp) << ","
      << format_double(worst_ratio) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "skorokhod fuzz: solver vs sup-representation gap " << format_double(worst_gap)
     << ", complementarity " << format_double(worst_comp) << ", empirical Lipschitz ratio "
     << format_double(worst_ratio) << "\n";
  a.summary = os.str();
  return a;
}

Artifacts run_gauss_sup(const RunConfig& cfg) {
  const Kernel k = Kernel::make(KernelKind::kGbar, cfg.params);
  const ExponentReport er =
      exponents(cfg.params.theta, cfg.params.service.mu1, cfg.params.service.mu2);
  const double sigma = std::sqrt(er.sup_variance);
  const double eps_d = cfg.extra_num("eps_d", sigma / 50.0);
  const std::size_t n_paths = static_cast<std::size_t>(cfg.extra_int("paths", 100000));
  const SupSamples ss =
      sample_sup(k, eps_d, HorizonPolicy{}, n_paths, cfg.seed, cfg.parallel, false);
  const TailFit fit = tail_fit(ss.sups, 2.0 * sigma, 3.5 * sigma);
  Artifacts a;
  std::ostringstream csv;
  csv << "n_paths,grid_points,horizon,sup_variance,fitted_slope,ci_lo,ci_hi,theory_slope\n"
      << n_paths << "," << ss.grid_points << "," << format_double(ss.horizon) << ","
      << format_double(ss.sup_variance) << "," << format_double(fit.slope) << ","
      << format_double(fit.ci_lo) << "," << format_double(fit.ci_hi) << ","
      << format_double(er.true_exponent) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "sup-process tail: fitted x^2 slope " << format_double(fit.slope) << " vs theory "
     << format_double(er.true_exponent) << " (finite-x prefactor bias expected)\n";
  a.summary = os.str();
  return a;
}

Artifacts run_limit_sim(const RunConfig& cfg) {
  const double dt = cfg.extra_num("dt", 1e-3);
  const double horizon = cfg.extra_num("horizon", 20000.0);
  const TailCampaign tc =
      limit_tail_campaign(cfg.params, dt, horizon, cfg.reps, cfg.seed, -1.0, -1.0, cfg.parallel);
  const ExponentReport er =
      exponents(cfg.params.theta, cfg.params.service.mu1, cfg.params.service.mu2);
  Artifacts a;
  std::ostringstream csv;
  csv << "dt,horizon,reps,fitted_slope,ci_lo,ci_hi,true_exponent,dai_he_exponent\n"
      << format_double(dt) << "," << format_double(horizon) << "," << cfg.reps << ","
      << format_double(tc.slope) << "," << format_double(tc.ci_lo) << ","
      << format_double(tc.ci_hi) << "," << format_double(er.true_exponent) << ","
      << format_double(er.dai_he_exponent) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "stationary tail of the limit system: fitted slope " << format_double(tc.slope)
     << " (95% CI [" << format_double(tc.ci_lo) << ", " << format_double(tc.ci_hi)
     << "]), theory " << format_double(er.true_exponent) << ", conjectured "
     << format_double(er.dai_he_exponent) << ", dt refinement drift "
     << format_double(tc.refinement_drift) << "\n";
  a.summary = os.str();
  return a;
}

Artifacts run_report(const RunConfig& cfg) {
  const ExponentReport er =
      exponents(cfg.params.theta, cfg.params.service.mu1, cfg.params.service.mu2);
  const double sigma = std::sqrt(er.sup_variance);

  RunConfig sup_cfg = cfg;
  sup_cfg.extra["paths"] = cfg.extra.count("paths") ? cfg.extra.at("paths") : "20000";
  const Kernel k = Kernel::make(KernelKind::kGbar, cfg.params);
  const SupSamples ss = sample_sup(k, sigma / 50.0, HorizonPolicy{},
                                   static_cast<std::size_t>(sup_cfg.extra_int("paths", 20000)),
                                   cfg.seed, cfg.parallel, false);
  const TailFit sup_fit = tail_fit(ss.sups, 1.8 * sigma, 3.2 * sigma, 25, 200, 7, 50);

  const double dt = cfg.extra_num("dt", 2e-3);
  const double horizon = cfg.extra_num("horizon", 20000.0);
  const TailCampaign tc = limit_tail_campaign(cfg.params, dt, horizon, std::max<std::size_t>(cfg.reps, 2),
                                              cfg.seed, -1.0, -1.0, cfg.parallel);

  Artifacts a;
  std::ostringstream csv;
  csv << "source,exponent_estimate,ci_lo,ci_hi\n"
      << "theory_true," << format_double(er.true_exponent) << ",,\n"
      << "theory_conjectured," << format_double(er.dai_he_exponent) << ",,\n"
      << "gauss_sup_fit," << format_double(sup_fit.slope) << "," << format_double(sup_fit.ci_lo)
      << "," << format_double(sup_fit.ci_hi) << "\n"
      << "limit_sim_fit," << format_double(tc.slope) << "," << format_double(tc.ci_lo) << ","
      << format_double(tc.ci_hi) << "\n";
  a.results_csv = csv.str();
  std::ostringstream os;
  os << "exponent comparison (x^2 slopes)\n"
     << "  theory true:        " << format_double(er.true_exponent) << "\n"
     << "  theory conjectured: " << format_double(er.dai_he_exponent) << "\n"
     << "  gauss-sup fit:      " << format_double(sup_fit.slope) << "\n"
     << "  limit-sim fit:      " << format_double(tc.slope) << "\n";
  a.summary = os.str();
  return a;
}

}  // namespace

int run_experiment(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  json manifest{{"experiment", cfg.experiment},
                {"seed", cfg.seed},
                {"reps", cfg.reps},
                {"parallel", cfg.parallel},
                {"params", params_json(cfg.params)},
                {"version", "mh2n-1.0"}};
  for (const auto& [k, v] : cfg.extra) manifest["experiment_keys"][k] = v;
  try {
    Artifacts a;
    if (cfg.experiment == "exponent") a = run_exponent(cfg);
    else if (cfg.experiment == "counterexample") a = run_counterexample(cfg);
    else if (cfg.experiment == "simulate") a = run_simulate(cfg);
    else if (cfg.experiment == "dominance") a = run_dominance(cfg);
    else if (cfg.experiment == "skorokhod") a = run_skorokhod(cfg);
    else if (cfg.experiment == "gauss-sup") a = run_gauss_sup(cfg);
    else if (cfg.experiment == "limit-sim") a = run_limit_sim(cfg);
    else if (cfg.experiment == "report") a = run_report(cfg);
    else throw std::invalid_argument("unknown experiment: " + cfg.experiment);
    if (!a.manifest_extra.is_null()) manifest["results_meta"] = a.manifest_extra;
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    write_text_file((dir / "results.csv").string(), a.results_csv);
    write_text_file((dir / "summary.txt").string(), a.summary);
    return 0;
  } catch (const std::exception& e) {
    write_text_file((dir / "FAILED").string(), std::string(e.what()) + "\n");
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    std::fprintf(stderr, "experiment failed: %s\n", e.what());
    return 1;
  }
}

}  // namespace mh2n
