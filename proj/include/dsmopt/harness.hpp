#pragma once

// Experiment plumbing: binder generation configs, the coordinated-count
// sweep and the command-line driver.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsmopt/binder.hpp"
#include "dsmopt/spectra.hpp"

namespace dsmopt::harness {

using binder::Scenario;

// Everything needed to regenerate a synthetic scenario.
struct GenConfig {
  binder::BinderModelParams model;
  std::size_t n_lines = binder::Defaults::n_lines;
  binder::Direction direction = binder::Direction::downstream;
  binder::ConstraintMode mode = binder::ConstraintMode::per_modem_mask;
  double p_tot_dbm = binder::Defaults::p_tot_dbm;
  double gamma_db = binder::Defaults::gamma_db;
  double delta_f_hz = binder::Defaults::delta_f_hz;
  double f_max_hz = binder::Defaults::f_max_hz;
  std::string disturber = "vdsl2";  // external disturber table: vdsl2 | adsl2plus | none

  void validate() const;
};

std::string gen_config_to_json(const GenConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
GenConfig gen_config_from_json(const std::string& text);
GenConfig load_gen_config(const std::filesystem::path& path);

Scenario generate(const GenConfig& c);

// The seeded default binder (8 lines, 800 m, seed 42) in the given direction.
GenConfig default_gen_config(binder::Direction d = binder::Direction::downstream);
Scenario default_scenario(binder::Direction d = binder::Direction::downstream);

// Stand-in PSD table by name (vdsl2, adsl2plus, none).
binder::PsdTable psd_by_name(const std::string& name, binder::Direction d);

// Solver names: total, per-modem, per-modem-mask, truncation, dp, zf (with
// algo1/algo2/algo3 as aliases) and auto (follow the scenario's mode).
std::string canonical_algo(const std::string& name);
// Runs `algo` on `s`. Two-sided algorithms switch the scenario's constraint
// mode to the one they solve so that the audit checks the right set.
spectra::Allocation run_algorithm(Scenario& s, const std::string& algo, const spectra::SolverOptions& opts);

struct ExperimentConfig {
  std::optional<std::filesystem::path> scenario_path;  // else generated from `gen`
  GenConfig gen = default_gen_config();
  std::optional<binder::ConstraintMode> mode;  // overrides the scenario's mode
  std::vector<std::string> algos{"auto"};
  std::vector<std::size_t> counts;  // empty: 1..N
  std::size_t subsets = 0;           // 0: first k lines; m > 0: m seeded subsets per k
  std::uint64_t seed = 42;
  std::string fold_psd;  // in-binder disturber table; empty: VDSL2 mask of the direction
  std::optional<std::filesystem::path> out_dir;
  spectra::SolverOptions solver;
};

struct SweepRow {
  std::size_t k = 0;
  double avg_rate_mbps = 0.0;
  double min_rate_mbps = 0.0;
  double max_rate_mbps = 0.0;
  double sum_rate_mbps = 0.0;
  std::string algo;
  std::string status;  // ok | not_converged | audit_failed | error:<kind>
};

// Coordinated subsets of size k: the first k lines, or `subsets` seeded
// random draws.
std::vector<std::vector<std::size_t>> coordinated_sets(std::size_t n_lines, std::size_t k, std::size_t subsets,
                                                       std::uint64_t seed);

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Command-line entry point. Exit codes: 0 success, 2 non-convergence or
// failed audit, 3 invalid input, 1 anything else.
int cli(int argc, char** argv);

// Hook for `selftest`; set by the executable that links the acceptance suite.
using SelftestFn = int (*)();
void set_selftest(SelftestFn fn);

}  // namespace dsmopt::harness
