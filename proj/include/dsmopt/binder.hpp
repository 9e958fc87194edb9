#pragma once

// Problem instances for a coordinated DSL binder: the DMT tone grid, band
// plans, per-tone channel and noise covariance matrices, power budgets and
// spectral masks, plus a deterministic synthetic binder generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dsmopt/numlin.hpp"

namespace dsmopt::binder {

using numlin::CMatrix;
using numlin::HermitianPSD;

enum class Direction { downstream, upstream };
enum class ConstraintMode { total, per_modem, per_modem_mask };

const char* to_string(Direction d);
const char* to_string(ConstraintMode m);
Direction parse_direction(const std::string& s);
ConstraintMode parse_constraint_mode(const std::string& s);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Reference operating point of a bonded VDSL2 deployment.
struct Defaults {
  static constexpr double delta_f_hz = 4312.5;
  static constexpr double f_sym_hz = 4000.0;
  static constexpr double f_max_hz = 12e6;
  static constexpr double awgn_dbm_hz = -140.0;
  static constexpr double p_tot_dbm = 14.5;
  static constexpr double gamma_db = 10.8;
  static constexpr std::size_t n_lines = 8;
  static constexpr double loop_length_m = 800.0;
  static constexpr double coupling_length_m = 400.0;
};

// dBm/Hz level to watts on one tone of width delta_f.
double dbm_hz_to_w_per_tone(double dbm_hz, double delta_f_hz);
double dbm_to_w(double dbm);
double w_to_dbm(double w);
double db_to_linear(double db);

struct Band {
  double f_lo = 0.0;
  double f_hi = 0.0;
  friend bool operator==(const Band&, const Band&) = default;
};

struct BandPlan {
  std::vector<Band> bands;
  Direction direction = Direction::downstream;

  static BandPlan vdsl2_downstream();  // 138 kHz-3.75 MHz, 5.2-8.5 MHz
  static BandPlan vdsl2_upstream();    // 25-138 kHz, 3.75-5.2 MHz, 8.5-12 MHz
  static BandPlan for_direction(Direction d);

  bool contains(double f) const;
  // Throws InvalidInput unless bands are ordered, disjoint and non-empty.
  void validate() const;

  friend bool operator==(const BandPlan&, const BandPlan&) = default;
};

struct ActiveTone {
  std::size_t index = 0;  // k, frequency (k+1) * delta_f
  double freq = 0.0;
};

// Tones k with (k+1)*delta_f <= f_max that fall inside a band of the plan.
// Throws EmptyBand when none does.
std::vector<ActiveTone> dmt_grid(double f_max, double delta_f, const BandPlan& plan);

// Piecewise-constant spectral level in dBm/Hz.
struct PsdSegment {
  double f_lo = 0.0;
  double f_hi = 0.0;
  double level_dbm_hz = 0.0;
  friend bool operator==(const PsdSegment&, const PsdSegment&) = default;
};
using PsdTable = std::vector<PsdSegment>;

// Level at f, or `outside` when no segment covers f.
double psd_level_at(const PsdTable& table, double f, double outside);

// Non-normative stand-ins for the ADSL2+ and VDSL2 transmit masks. They
// only need the right order of magnitude and band edges.
PsdTable adsl2plus_psd(Direction d);
PsdTable vdsl2_psd(Direction d);
PsdTable read_psd_table_csv(const std::filesystem::path& path);

struct ToneChannel {
  std::size_t index = 0;
  double freq = 0.0;
  CMatrix H;
  HermitianPSD R;

  bool dead() const;  // ||H|| = 0
  friend bool operator==(const ToneChannel&, const ToneChannel&) = default;
};

struct MaskSpec {
  enum class Mode { none, dbm_hz, w_per_tone };
  Mode mode = Mode::none;
  std::vector<PsdTable> per_line;               // dbm_hz; uncovered tones are unconstrained
  std::vector<std::vector<double>> per_tone_w;  // w_per_tone: [line][tone]
  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

// A complete problem instance. The fields above `finalize()` are the
// canonical (serialized) description; the linear-unit caches below are
// derived from them by finalize(), which every constructor path calls.
struct Scenario {
  std::size_t n_lines = 0;
  double delta_f_hz = Defaults::delta_f_hz;
  double f_sym_hz = Defaults::f_sym_hz;
  double gamma_db = Defaults::gamma_db;
  ConstraintMode mode = ConstraintMode::per_modem;
  std::vector<double> p_tot_dbm;
  MaskSpec mask;
  BandPlan bands;
  std::vector<ToneChannel> tones;

  // Validates invariants and recomputes the derived caches.
  void finalize();

  double gamma = 1.0;                     // linear SNR gap
  std::vector<double> p_tot_w;            // per modem
  std::vector<std::vector<double>> mask_w;  // [line][tone], +inf when unconstrained

  std::size_t n_tones() const { return tones.size(); }
  double total_budget_w() const;

  friend bool operator==(const Scenario& a, const Scenario& b);
};

struct BinderModelParams {
  double loop_length_m = Defaults::loop_length_m;
  double coupling_length_m = Defaults::coupling_length_m;
  std::size_t n_disturbers = 2;
  PsdTable disturber_psd;  // empty: VDSL2 stand-in of the generated direction
  double fext_gain = 2.54e-20;  // per metre per Hz^2
  double alpha_prop = 2.36e-6;  // Np / (m sqrt(Hz))
  double beta_prop = 5.7e-11;   // Np / (m Hz)
  double v_p = 2.0e8;           // m/s
  double awgn_dbm_hz = Defaults::awgn_dbm_hz;
  std::uint64_t seed = 42;

  void validate() const;
};

// Direct-path insertion transfer of one loop at frequency f.
numlin::cplx direct_transfer(double f, const BinderModelParams& params);

// sigma^2 I + sum_d P_d(f) a_d a_d^H for the configured external disturbers
// (an empty disturber table means no disturber power).
HermitianPSD alien_covariance(double freq, double delta_f, const BinderModelParams& params, std::size_t n_lines);

// Synthetic binder on the DMT grid of `plan`. Deterministic in params.seed;
// each tone draws only from streams keyed by (seed, tone). The scenario
// gets the default budget (14.5 dBm per line), gap and per-modem mode;
// callers adjust those fields and call finalize() again.
Scenario gen_binder(const BinderModelParams& params, std::size_t n_lines, const BandPlan& plan,
                    double delta_f = Defaults::delta_f_hz, double f_max = Defaults::f_max_hz);

// Restricts a binder to the `coordinated` lines. Every other binder line is
// folded into the noise covariance as a disturber transmitting `psd` through
// its column of H (rank-1 term per disturber).
Scenario fold_uncoordinated(const Scenario& full, std::span<const std::size_t> coordinated,
                            const PsdTable& disturber_psd);

void save_scenario(const Scenario& s, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

// Bulk channel CSV: header `kind,tone,row,col,re,im`, kind in {H,R}.
void save_channel_csv(const Scenario& s, const std::filesystem::path& path);
// Replaces H and R of the tones of `s` (matched by tone index).
void load_channel_csv(Scenario& s, const std::filesystem::path& path);

// %.17g, with "inf"/"-inf"/"nan" spelled out.
std::string format_double(double x);

}  // namespace dsmopt::binder
