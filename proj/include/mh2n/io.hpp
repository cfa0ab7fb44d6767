#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mh2n/model.hpp"

namespace mh2n {

// Flat key-value run configuration with an optional [experiment] section.
struct RunConfig {
  SystemParams params;
  std::string experiment;  // exponent, counterexample, simulate, dominance,
                           // skorokhod, gauss-sup, limit-sim, report
  std::uint64_t seed = 1;
  std::size_t reps = 1;
  int parallel = 0;  // 0 = all cores
  std::string out_dir = "out";
  std::map<std::string, std::string> extra;  // experiment-specific keys

  double extra_num(const std::string& key, double fallback) const;
  long extra_int(const std::string& key, long fallback) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string format_double(double x);  // shortest round-trip decimal

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Runs one experiment; writes manifest.json, results.csv and summary.txt
// under cfg.out_dir. Returns the process exit status (0 ok). On failure the
// partial outputs stay in place next to a FAILED marker file.
int run_experiment(const RunConfig& cfg);

}  // namespace mh2n
