#include "dsmopt/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "dsmopt/errors.hpp"
#include "dsmopt/report.hpp"
#include "dsmopt/rng.hpp"
#include "dsmopt/structures.hpp"
#include "json_util.hpp"

namespace dsmopt::harness {

using binder::ConstraintMode;
using binder::Direction;
using jsonio::json;
using jsonio::json_number;

// ---------------------------------------------------------------------------
// Generation configs

void GenConfig::validate() const {
  model.validate();
  if (n_lines == 0) throw InvalidInput("n_lines must be >= 1");
  if (!(delta_f_hz > 0.0) || !(f_max_hz > 0.0)) throw InvalidInput("delta_f_hz and f_max_hz must be positive");
  if (std::isnan(p_tot_dbm) || std::isnan(gamma_db)) throw InvalidInput("p_tot_dbm and gamma_db must be numbers");
}

std::string gen_config_to_json(const GenConfig& c) {
  const auto& m = c.model;
  std::ostringstream os;
  os << "{\n  \"n_lines\": " << c.n_lines << ",\n  \"direction\": \"" << binder::to_string(c.direction)
     << "\",\n  \"constraint_mode\": \"" << binder::to_string(c.mode) << "\",\n  \"p_tot_dbm\": "
     << json_number(c.p_tot_dbm) << ",\n  \"gamma_db\": " << json_number(c.gamma_db)
     << ",\n  \"delta_f_hz\": " << json_number(c.delta_f_hz) << ",\n  \"f_max_hz\": " << json_number(c.f_max_hz)
     << ",\n  \"disturber\": " << jsonio::quoted(c.disturber) << ",\n  \"seed\": " << m.seed
     << ",\n  \"loop_length_m\": " << json_number(m.loop_length_m)
     << ",\n  \"coupling_length_m\": " << json_number(m.coupling_length_m) << ",\n  \"n_disturbers\": " << m.n_disturbers
     << ",\n  \"fext_gain\": " << json_number(m.fext_gain) << ",\n  \"alpha_prop\": " << json_number(m.alpha_prop)
     << ",\n  \"beta_prop\": " << json_number(m.beta_prop) << ",\n  \"v_p\": " << json_number(m.v_p)
     << ",\n  \"awgn_dbm_hz\": " << json_number(m.awgn_dbm_hz) << "\n}\n";
  return os.str();
}

GenConfig gen_config_from_json(const std::string& text) {
  const std::string ctx = "binder config";
  const json doc = jsonio::parse(text, ctx);
  if (!doc.is_object()) jsonio::schema_error(ctx, "expected an object");
  GenConfig c;
  auto& m = c.model;
  try {
    for (const auto& [key, v] : doc.items()) {
      const std::string kctx = ctx + ": " + key;
      auto count = [&]() {
        if (!v.is_number_unsigned()) jsonio::schema_error(kctx, "expected a non-negative integer");
        return v.get<std::uint64_t>();
      };
      if (key == "n_lines") c.n_lines = count();
      else if (key == "direction") c.direction = binder::parse_direction(jsonio::as_string(v, kctx));
      else if (key == "constraint_mode") c.mode = binder::parse_constraint_mode(jsonio::as_string(v, kctx));
      else if (key == "p_tot_dbm") c.p_tot_dbm = jsonio::as_number(v, kctx);
      else if (key == "gamma_db") c.gamma_db = jsonio::as_number(v, kctx);
      else if (key == "delta_f_hz") c.delta_f_hz = jsonio::as_number(v, kctx);
      else if (key == "f_max_hz") c.f_max_hz = jsonio::as_number(v, kctx);
      else if (key == "disturber") c.disturber = jsonio::as_string(v, kctx);
      else if (key == "seed") m.seed = count();
      else if (key == "loop_length_m") m.loop_length_m = jsonio::as_number(v, kctx);
      else if (key == "coupling_length_m") m.coupling_length_m = jsonio::as_number(v, kctx);
      else if (key == "n_disturbers") m.n_disturbers = count();
      else if (key == "fext_gain") m.fext_gain = jsonio::as_number(v, kctx);
      else if (key == "alpha_prop") m.alpha_prop = jsonio::as_number(v, kctx);
      else if (key == "beta_prop") m.beta_prop = jsonio::as_number(v, kctx);
      else if (key == "v_p") m.v_p = jsonio::as_number(v, kctx);
      else if (key == "awgn_dbm_hz") m.awgn_dbm_hz = jsonio::as_number(v, kctx);
      else jsonio::schema_error(ctx, "unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    jsonio::schema_error(ctx, e.what());
  }
  c.validate();
  return c;
}

GenConfig load_gen_config(const std::filesystem::path& path) { return gen_config_from_json(report::read_text(path)); }

binder::PsdTable psd_by_name(const std::string& name, Direction d) {
  if (name == "vdsl2") return binder::vdsl2_psd(d);
  if (name == "adsl2plus") return binder::adsl2plus_psd(d);
  if (name == "none") return {};
  if (std::filesystem::exists(name)) return binder::read_psd_table_csv(name);
  throw InvalidInput("unknown PSD table '" + name + "' (vdsl2, adsl2plus, none or a CSV path)");
}

Scenario generate(const GenConfig& c) {
  c.validate();
  binder::BinderModelParams params = c.model;
  params.disturber_psd = psd_by_name(c.disturber, c.direction);
  if (params.disturber_psd.empty()) params.n_disturbers = 0;
  Scenario s = binder::gen_binder(params, c.n_lines, binder::BandPlan::for_direction(c.direction), c.delta_f_hz,
                                  c.f_max_hz);
  s.mode = c.mode;
  s.gamma_db = c.gamma_db;
  s.p_tot_dbm.assign(c.n_lines, c.p_tot_dbm);
  s.finalize();
  return s;
}

GenConfig default_gen_config(Direction d) {
  GenConfig c;
  c.direction = d;
  return c;
}

Scenario default_scenario(Direction d) { return generate(default_gen_config(d)); }

// ---------------------------------------------------------------------------
// Algorithms

std::string canonical_algo(const std::string& name) {
  if (name == "total" || name == "algo1") return "total";
  if (name == "per-modem" || name == "algo2") return "per-modem";
  if (name == "per-modem-mask" || name == "algo3") return "per-modem-mask";
  if (name == "truncation" || name == "dp" || name == "zf" || name == "auto") return name;
  throw InvalidInput("unknown algorithm '" + name + "'");
}

spectra::Allocation run_algorithm(Scenario& s, const std::string& algo_name, const spectra::SolverOptions& opts) {
  std::string algo = canonical_algo(algo_name);
  if (algo == "auto") algo = binder::to_string(s.mode);
  auto set_mode = [&](ConstraintMode m) {
    if (s.mode != m) {
      s.mode = m;
      s.finalize();
    }
  };
  if (algo == "total") {
    set_mode(ConstraintMode::total);
    return spectra::algo1_total_power(s, opts);
  }
  if (algo == "per-modem") {
    set_mode(ConstraintMode::per_modem);
    return spectra::algo2_per_modem(s, opts);
  }
  if (algo == "per-modem-mask") {
    set_mode(ConstraintMode::per_modem_mask);
    return spectra::algo3_per_modem_mask(s, opts);
  }
  if (algo == "truncation") {
    set_mode(ConstraintMode::per_modem_mask);
    return spectra::truncation_baseline(s, opts);
  }
  if (algo == "dp") return structures::dp_baseline(s, opts);
  return structures::zf_baseline(s, opts);
}

namespace {

bool two_sided(const std::string& algo) {
  return algo == "total" || algo == "per-modem" || algo == "per-modem-mask";
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep

std::vector<std::vector<std::size_t>> coordinated_sets(std::size_t n_lines, std::size_t k, std::size_t subsets,
                                                       std::uint64_t seed) {
  if (k < 1 || k > n_lines) throw InvalidInput("coordinated count must lie in [1, N]");
  std::vector<std::vector<std::size_t>> out;
  if (subsets == 0) {
    std::vector<std::size_t> first(k);
    std::iota(first.begin(), first.end(), std::size_t{0});
    out.push_back(first);
    return out;
  }
  for (std::size_t j = 0; j < subsets; ++j) {
    SeededStream st(derive_seed(seed, {0x5357ull, k, j}));
    std::vector<std::size_t> lines(n_lines);
    std::iota(lines.begin(), lines.end(), std::size_t{0});
    // Partial Fisher-Yates on our own stream (std::shuffle is not portable
    // across standard libraries).
    for (std::size_t a = 0; a < k; ++a) {
      const auto span = static_cast<double>(n_lines - a);
      const std::size_t b = a + std::min(static_cast<std::size_t>(st.uniform() * span), n_lines - a - 1);
      std::swap(lines[a], lines[b]);
    }
    lines.resize(k);
    std::sort(lines.begin(), lines.end());
    out.push_back(lines);
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.solver.validate();
  Scenario full = cfg.scenario_path ? binder::load_scenario(*cfg.scenario_path) : generate(cfg.gen);
  if (cfg.mode) {
    full.mode = *cfg.mode;
    full.finalize();
  }
  const binder::PsdTable fold = cfg.fold_psd.empty() ? binder::vdsl2_psd(full.bands.direction)
                                                     : psd_by_name(cfg.fold_psd, full.bands.direction);
  std::vector<std::size_t> counts = cfg.counts;
  if (counts.empty()) {
    counts.resize(full.n_lines);
    std::iota(counts.begin(), counts.end(), std::size_t{1});
  }
  for (std::size_t k : counts)
    if (k < 1 || k > full.n_lines) throw InvalidInput("sweep count " + std::to_string(k) + " outside [1, N]");
  std::vector<std::string> algos;
  for (const auto& a : cfg.algos) algos.push_back(canonical_algo(a));
  if (cfg.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*cfg.out_dir / "points", ec);
    if (ec) throw Io("cannot create " + cfg.out_dir->string() + ": " + ec.message());
  }

  std::vector<SweepRow> rows;
  for (std::size_t k : counts) {
    const auto sets = coordinated_sets(full.n_lines, k, cfg.subsets, cfg.seed);
    for (const auto& algo : algos) {
      SweepRow row;
      row.k = k;
      row.algo = algo;
      row.status = "ok";
      row.min_rate_mbps = binder::kInf;
      row.max_rate_mbps = -binder::kInf;
      double avg_acc = 0.0, sum_acc = 0.0;
      for (std::size_t j = 0; j < sets.size(); ++j) {
        try {
          Scenario sub = binder::fold_uncoordinated(full, sets[j], fold);
          const spectra::Allocation a = run_algorithm(sub, algo, cfg.solver);
          row.algo = a.algorithm;
          if (!a.diagnostics.converged) {
            row.status = "not_converged";
          } else if (two_sided(a.algorithm)) {
            if (!spectra::kkt_audit(sub, a, cfg.solver).pass(cfg.solver.kkt_tol) && row.status == "ok") {
              row.status = "audit_failed";
            }
          }
          double sum = 0.0;
          for (double r : a.rates_per_line) {
            row.min_rate_mbps = std::min(row.min_rate_mbps, r / 1e6);
            row.max_rate_mbps = std::max(row.max_rate_mbps, r / 1e6);
            sum += r / 1e6;
          }
          avg_acc += sum / static_cast<double>(k);
          sum_acc += a.sum_rate / 1e6;
          if (cfg.out_dir) {
            const auto point = *cfg.out_dir / "points" /
                               ("k" + std::to_string(k) + "_" + a.algorithm + "_s" + std::to_string(j) + ".csv");
            report::write_summary_csv(sub, a, point);
          }
        } catch (const Error& e) {
          row.status = std::string("error:") + to_string(e.kind());
        }
      }
      const double m = static_cast<double>(sets.size());
      row.avg_rate_mbps = avg_acc / m;
      row.sum_rate_mbps = sum_acc / m;
      if (row.min_rate_mbps == binder::kInf) row.min_rate_mbps = 0.0;
      if (row.max_rate_mbps == -binder::kInf) row.max_rate_mbps = 0.0;
      rows.push_back(row);
    }
  }
  if (cfg.out_dir) report::write_text(*cfg.out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "k,avg_rate_mbps,min_rate_mbps,max_rate_mbps,sum_rate_mbps,algo,status\n";
  for (const auto& r : rows) {
    os << r.k << ',' << report::format_mbps(r.avg_rate_mbps * 1e6) << ',' << report::format_mbps(r.min_rate_mbps * 1e6)
       << ',' << report::format_mbps(r.max_rate_mbps * 1e6) << ',' << report::format_mbps(r.sum_rate_mbps * 1e6) << ','
       << r.algo << ',' << r.status << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Command line

namespace {

SelftestFn g_selftest = nullptr;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitInvalid = 3;

struct ScenarioSource {
  std::string scenario;
  std::string config;
  std::string direction = "downstream";
  std::string mode;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "Scenario JSON file");
    app->add_option("--config", config, "Binder generation config (JSON); used when no --scenario is given");
    app->add_option("--direction", direction, "downstream | upstream (default binder only)")
        ->check(CLI::IsMember({"downstream", "upstream"}));
    app->add_option("--mode", mode, "Override the constraint mode: total | per-modem | per-modem-mask");
  }

  GenConfig gen_config() const {
    GenConfig c = config.empty() ? default_gen_config(binder::parse_direction(direction)) : load_gen_config(config);
    if (!mode.empty()) c.mode = binder::parse_constraint_mode(mode);
    return c;
  }

  Scenario load() const {
    if (scenario.empty()) return generate(gen_config());
    Scenario s = binder::load_scenario(scenario);
    if (!mode.empty()) {
      s.mode = binder::parse_constraint_mode(mode);
      s.finalize();
    }
    return s;
  }
};

void add_solver_options(CLI::App* app, spectra::SolverOptions& o, bool& serial) {
  app->add_option("--eps-power", o.eps_power, "Relative power-budget tolerance");
  app->add_option("--eps-mask", o.eps_mask, "Relative mask tolerance");
  app->add_option("--lambda-floor", o.lambda_floor, "Smallest multiplier (marks slack budgets)");
  app->add_option("--max-outer", o.max_outer, "Outer iteration cap");
  app->add_option("--max-bisect", o.max_bisect, "Per-search iteration cap");
  app->add_option("--kkt-tol", o.kkt_tol, "KKT residual tolerance for audits");
  app->add_flag("--serial", serial, "Use the serial reference tone loop");
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  auto to_count = [&](const std::string& t) -> std::size_t {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != t.size()) throw InvalidInput("bad count '" + t + "' in --counts");
    return v;
  };
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (auto dots = item.find(".."); dots != std::string::npos) {
      const std::size_t a = to_count(item.substr(0, dots));
      const std::size_t b = to_count(item.substr(dots + 2));
      if (a > b) throw InvalidInput("empty range '" + item + "' in --counts");
      for (std::size_t k = a; k <= b; ++k) out.push_back(k);
    } else {
      out.push_back(to_count(item));
    }
  }
  return out;
}

void make_parent_dir(const std::string& file) {
  const auto parent = std::filesystem::path(file).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw Io("cannot create " + parent.string() + ": " + ec.message());
}

int cmd_gen(const ScenarioSource& src, const std::string& out, const std::string& channel_csv,
            const std::string& write_config, std::optional<std::uint64_t> seed, std::optional<std::size_t> lines,
            const std::string& disturber) {
  GenConfig c = src.gen_config();
  if (seed) c.model.seed = *seed;
  if (lines) c.n_lines = *lines;
  if (!disturber.empty()) c.disturber = disturber;
  const Scenario s = generate(c);
  for (const auto* f : {&out, &channel_csv, &write_config})
    if (!f->empty()) make_parent_dir(*f);
  binder::save_scenario(s, out);
  if (!channel_csv.empty()) binder::save_channel_csv(s, channel_csv);
  if (!write_config.empty()) report::write_text(write_config, gen_config_to_json(c));
  std::cout << "wrote " << out << ": " << s.n_lines << " lines, " << s.n_tones() << " tones\n";
  return kExitOk;
}

int cmd_solve(const ScenarioSource& src, const std::string& algo, const std::string& out,
              const spectra::SolverOptions& opts) {
  Scenario s = src.load();
  const spectra::Allocation a = run_algorithm(s, algo, opts);
  const spectra::AuditReport r = spectra::kkt_audit(s, a, opts);
  report::write_outputs(s, a, r, out);
  std::cout << a.algorithm << ": sum rate " << report::format_mbps(a.sum_rate) << " Mbps over " << s.n_tones()
            << " tones, converged=" << (a.diagnostics.converged ? "true" : "false") << '\n';
  if (!a.diagnostics.converged) {
    std::cerr << "not converged: " << a.diagnostics.message << " (best iterate written to " << out << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_audit(const ScenarioSource& src, const std::string& alloc_path, const std::string& out,
              const spectra::SolverOptions& opts) {
  Scenario s = src.load();
  const spectra::Allocation a = report::load_allocation(s, alloc_path);
  // Audit against the constraint set the allocation was solved for.
  if (two_sided(a.algorithm) && binder::parse_constraint_mode(a.algorithm) != s.mode) {
    s.mode = binder::parse_constraint_mode(a.algorithm);
    s.finalize();
  }
  const spectra::AuditReport r = spectra::kkt_audit(s, a, opts);
  if (out.empty()) {
    std::cout << report::audit_to_json(r);
  } else {
    report::write_audit_json(r, out);
  }
  return r.pass(opts.kkt_tol) && r.converged ? kExitOk : kExitNotConverged;
}

int cmd_sweep(ExperimentConfig cfg) {
  const auto rows = run_sweep(cfg);
  std::cout << sweep_csv(rows);
  for (const auto& r : rows)
    if (r.status.rfind("error:", 0) == 0) return kExitInvalid;
  for (const auto& r : rows)
    if (r.status != "ok") return kExitNotConverged;
  return kExitOk;
}

}  // namespace

void set_selftest(SelftestFn fn) { g_selftest = fn; }

int cli(int argc, char** argv) {
  CLI::App app{"Optimal spectra for fully coordinated DSL binders"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides DSMOPT_THREADS)");

  spectra::SolverOptions opts;
  bool serial = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic binder scenario");
  ScenarioSource gen_src;
  std::string gen_out, gen_csv, gen_cfg_out, gen_disturber;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_lines;
  gen->add_option("--config", gen_src.config, "Binder generation config (JSON)");
  gen->add_option("--direction", gen_src.direction, "downstream | upstream")
      ->check(CLI::IsMember({"downstream", "upstream"}));
  gen->add_option("--mode", gen_src.mode, "Constraint mode stored in the scenario");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--lines", gen_lines, "Number of lines");
  gen->add_option("--disturber", gen_disturber, "External disturber table: vdsl2 | adsl2plus | none | CSV path");
  gen->add_option("--out", gen_out, "Scenario JSON to write")->required();
  gen->add_option("--channel-csv", gen_csv, "Also write the channel matrices as CSV");
  gen->add_option("--write-config", gen_cfg_out, "Also write the effective generation config");

  auto* solve = app.add_subcommand("solve", "Solve one scenario");
  ScenarioSource solve_src;
  solve_src.add(solve);
  std::string algo = "auto", solve_out;
  solve->add_option("--algo", algo, "total | per-modem | per-modem-mask | truncation | dp | zf | auto");
  solve->add_option("--out", solve_out, "Output directory")->required();
  add_solver_options(solve, opts, serial);

  auto* sweep = app.add_subcommand("sweep", "Vary the number of coordinated lines");
  ScenarioSource sweep_src;
  sweep_src.add(sweep);
  std::vector<std::string> sweep_algos;
  std::string counts_text, sweep_out, fold_psd;
  std::size_t subsets = 0;
  std::uint64_t sweep_seed = 42;
  sweep->add_option("--algo", sweep_algos, "Algorithms (repeatable); default follows the scenario mode");
  sweep->add_option("--counts", counts_text, "Coordinated counts, e.g. 1..8 or 1,2,4,8 (default 1..N)");
  sweep->add_option("--subsets", subsets, "Average over this many seeded coordinated subsets per count");
  sweep->add_option("--seed", sweep_seed, "Seed for subset selection");
  sweep->add_option("--fold-psd", fold_psd, "PSD of uncoordinated binder lines (default: VDSL2 mask)");
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  add_solver_options(sweep, opts, serial);

  auto* audit = app.add_subcommand("audit", "KKT audit of a stored allocation");
  ScenarioSource audit_src;
  audit_src.add(audit);
  std::string alloc_path, audit_out;
  audit->add_option("--allocation", alloc_path, "allocation.json from solve")->required();
  audit->add_option("--out", audit_out, "Write the report here instead of standard output");
  add_solver_options(audit, opts, serial);

  auto* selftest = app.add_subcommand("selftest", "Run the acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  kernels::set_worker_count(threads > 0 ? threads : kernels::threads_from_env());
  if (serial) opts.execution = kernels::Execution::serial;

  try {
    if (*gen) return cmd_gen(gen_src, gen_out, gen_csv, gen_cfg_out, gen_seed, gen_lines, gen_disturber);
    if (*solve) return cmd_solve(solve_src, algo, solve_out, opts);
    if (*audit) return cmd_audit(audit_src, alloc_path, audit_out, opts);
    if (*sweep) {
      ExperimentConfig cfg;
      if (!sweep_src.scenario.empty()) cfg.scenario_path = sweep_src.scenario;
      cfg.gen = sweep_src.gen_config();
      if (!sweep_algos.empty()) cfg.algos = sweep_algos;
      if (!counts_text.empty()) cfg.counts = parse_counts(counts_text);
      cfg.subsets = subsets;
      cfg.seed = sweep_seed;
      cfg.fold_psd = fold_psd;
      cfg.out_dir = sweep_out;
      cfg.solver = opts;
      if (!sweep_src.mode.empty()) cfg.mode = binder::parse_constraint_mode(sweep_src.mode);
      return cmd_sweep(cfg);
    }
    if (*selftest) {
      if (g_selftest == nullptr) {
        std::cerr << "selftest is not available in this build\n";
        return kExitFailure;
      }
      return g_selftest() == 0 ? kExitOk : kExitNotConverged;
    }
  } catch (const NoConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace dsmopt::harness
