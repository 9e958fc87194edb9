#include "dsmopt/binder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dsmopt/errors.hpp"
#include "dsmopt/rng.hpp"

namespace dsmopt::binder {

using numlin::cplx;

namespace {

constexpr std::uint64_t kSelfFextTag = 0x5e1f;
constexpr std::uint64_t kAlienTag = 0xa11e;

}  // namespace

const char* to_string(Direction d) { return d == Direction::downstream ? "downstream" : "upstream"; }

const char* to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::total: return "total";
    case ConstraintMode::per_modem: return "per-modem";
    case ConstraintMode::per_modem_mask: return "per-modem-mask";
  }
  return "per-modem";
}

Direction parse_direction(const std::string& s) {
  if (s == "downstream" || s == "down") return Direction::downstream;
  if (s == "upstream" || s == "up") return Direction::upstream;
  throw InvalidInput("unknown direction '" + s + "'");
}

ConstraintMode parse_constraint_mode(const std::string& s) {
  if (s == "total") return ConstraintMode::total;
  if (s == "per-modem" || s == "per_modem") return ConstraintMode::per_modem;
  if (s == "per-modem-mask" || s == "per_modem_mask") return ConstraintMode::per_modem_mask;
  throw InvalidInput("unknown constraint mode '" + s + "'");
}

double dbm_hz_to_w_per_tone(double dbm_hz, double delta_f_hz) {
  return std::pow(10.0, (dbm_hz - 30.0) / 10.0) * delta_f_hz;
}
double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double w_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Band plans and the tone grid

BandPlan BandPlan::vdsl2_downstream() {
  return {{{138e3, 3.75e6}, {5.2e6, 8.5e6}}, Direction::downstream};
}

BandPlan BandPlan::vdsl2_upstream() {
  return {{{25e3, 138e3}, {3.75e6, 5.2e6}, {8.5e6, 12e6}}, Direction::upstream};
}

BandPlan BandPlan::for_direction(Direction d) {
  return d == Direction::downstream ? vdsl2_downstream() : vdsl2_upstream();
}

bool BandPlan::contains(double f) const {
  return std::any_of(bands.begin(), bands.end(), [f](const Band& b) { return f >= b.f_lo && f <= b.f_hi; });
}

void BandPlan::validate() const {
  if (bands.empty()) throw InvalidInput("band plan has no bands");
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const Band& b = bands[k];
    if (!(b.f_lo >= 0.0) || !(b.f_hi > b.f_lo)) throw InvalidInput("band " + std::to_string(k) + " is empty");
    if (k > 0 && !(b.f_lo > bands[k - 1].f_hi)) throw InvalidInput("bands must be ordered and disjoint");
  }
}

std::vector<ActiveTone> dmt_grid(double f_max, double delta_f, const BandPlan& plan) {
  if (!(delta_f > 0.0)) throw InvalidInput("delta_f must be positive");
  if (!(f_max >= delta_f)) throw InvalidInput("f_max must be >= delta_f");
  plan.validate();
  std::vector<ActiveTone> tones;
  for (std::size_t k = 0;; ++k) {
    const double f = static_cast<double>(k + 1) * delta_f;
    if (f > f_max) break;
    if (plan.contains(f)) tones.push_back({k, f});
  }
  if (tones.empty()) throw EmptyBand("no tone of the grid falls inside the band plan");
  return tones;
}

// ---------------------------------------------------------------------------
// Spectral tables

double psd_level_at(const PsdTable& table, double f, double outside) {
  for (const PsdSegment& s : table)
    if (f >= s.f_lo && f <= s.f_hi) return s.level_dbm_hz;
  return outside;
}

PsdTable adsl2plus_psd(Direction d) {
  if (d == Direction::downstream) return {{138e3, 2.208e6, -40.0}, {2.208e6, 3.0e6, -60.0}};
  return {{25.875e3, 138e3, -38.0}};
}

PsdTable vdsl2_psd(Direction d) {
  if (d == Direction::downstream) return {{138e3, 3.75e6, -49.5}, {5.2e6, 8.5e6, -56.0}};
  return {{25e3, 138e3, -38.0}, {3.75e6, 5.2e6, -53.0}, {8.5e6, 12e6, -56.0}};
}

PsdTable read_psd_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Io("cannot open " + path.string());
  PsdTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("f_lo", 0) == 0) continue;  // header
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
      throw ParseError("expected f_lo,f_hi,dbm_hz", lineno, 1);
    }
    try {
      table.push_back({std::stod(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw ParseError("bad number in PSD table", lineno, 1);
    }
  }
  if (table.empty()) throw ParseError("empty PSD table " + path.string());
  return table;
}

// ---------------------------------------------------------------------------
// ToneChannel / Scenario

bool ToneChannel::dead() const { return numlin::frobenius_norm(H) == 0.0; }

void Scenario::finalize() {
  if (n_lines == 0) throw InvalidInput("scenario needs at least one line");
  if (!(delta_f_hz > 0.0) || !(f_sym_hz > 0.0)) throw InvalidInput("delta_f and f_sym must be positive");
  if (!(gamma_db >= 0.0) || !std::isfinite(gamma_db)) throw InvalidInput("SNR gap must be >= 0 dB");
  if (p_tot_dbm.size() != n_lines) throw DimensionMismatch("p_tot_dbm length != n_lines");
  for (double p : p_tot_dbm)
    if (std::isnan(p) || p == kInf) throw InvalidInput("per-modem budget must be finite or -inf dBm");

  for (const ToneChannel& t : tones) {
    if (t.H.rows() != n_lines || t.H.cols() != n_lines) {
      throw DimensionMismatch("tone " + std::to_string(t.index) + ": H is not n_lines x n_lines");
    }
    if (t.R.dim() != n_lines) throw DimensionMismatch("tone " + std::to_string(t.index) + ": R dimension");
  }

  gamma = db_to_linear(gamma_db);
  p_tot_w.resize(n_lines);
  for (std::size_t n = 0; n < n_lines; ++n) p_tot_w[n] = dbm_to_w(p_tot_dbm[n]);

  mask_w.assign(n_lines, std::vector<double>(tones.size(), kInf));
  switch (mask.mode) {
    case MaskSpec::Mode::none:
      break;
    case MaskSpec::Mode::dbm_hz:
      if (mask.per_line.size() != n_lines) throw DimensionMismatch("mask table count != n_lines");
      for (std::size_t n = 0; n < n_lines; ++n)
        for (std::size_t i = 0; i < tones.size(); ++i) {
          const double lvl = psd_level_at(mask.per_line[n], tones[i].freq, kInf);
          mask_w[n][i] = lvl == kInf ? kInf : dbm_hz_to_w_per_tone(lvl, delta_f_hz);
        }
      break;
    case MaskSpec::Mode::w_per_tone:
      if (mask.per_tone_w.size() != n_lines) throw DimensionMismatch("mask table count != n_lines");
      for (std::size_t n = 0; n < n_lines; ++n) {
        if (mask.per_tone_w[n].size() != tones.size()) throw DimensionMismatch("mask row length != tone count");
        for (std::size_t i = 0; i < tones.size(); ++i) {
          if (std::isnan(mask.per_tone_w[n][i])) throw InvalidInput("NaN mask entry");
          mask_w[n][i] = mask.per_tone_w[n][i];
        }
      }
      break;
  }
}

double Scenario::total_budget_w() const {
  double s = 0.0;
  for (double p : p_tot_w) s += p;
  return s;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.n_lines == b.n_lines && a.delta_f_hz == b.delta_f_hz && a.f_sym_hz == b.f_sym_hz &&
         a.gamma_db == b.gamma_db && a.mode == b.mode && a.p_tot_dbm == b.p_tot_dbm && a.mask == b.mask &&
         a.bands == b.bands && a.tones == b.tones;
}

// ---------------------------------------------------------------------------
// Synthetic binder

void BinderModelParams::validate() const {
  if (!(loop_length_m > 0.0)) throw InvalidInput("loop_length_m must be positive");
  if (!(coupling_length_m >= 0.0)) throw InvalidInput("coupling_length_m must be >= 0");
  if (!(fext_gain >= 0.0)) throw InvalidInput("fext_gain must be >= 0");
  if (!(alpha_prop >= 0.0) || !(beta_prop >= 0.0) || !(v_p > 0.0)) throw InvalidInput("propagation constants");
  if (!std::isfinite(awgn_dbm_hz)) throw InvalidInput("awgn level must be finite");
}

cplx direct_transfer(double f, const BinderModelParams& p) {
  const double loss = (p.alpha_prop * std::sqrt(f) + p.beta_prop * f) * p.loop_length_m;
  const double phase = -2.0 * std::numbers::pi * f * p.loop_length_m / p.v_p;
  return std::polar(std::exp(-loss), phase);
}

HermitianPSD alien_covariance(double freq, double delta_f, const BinderModelParams& params, std::size_t n_lines) {
  const double sigma2 = dbm_hz_to_w_per_tone(params.awgn_dbm_hz, delta_f);
  CMatrix r = CMatrix::identity(n_lines);
  for (cplx& z : r.entries()) z *= sigma2;

  if (params.n_disturbers > 0 && params.coupling_length_m > 0.0) {
    const double lvl = psd_level_at(params.disturber_psd, freq, -kInf);
    const double p_d = lvl == -kInf ? 0.0 : dbm_hz_to_w_per_tone(lvl, delta_f);
    const double mag =
        std::sqrt(params.fext_gain * params.coupling_length_m * freq * freq) * std::abs(direct_transfer(freq, params));
    SeededStream st(derive_seed(params.seed, {kAlienTag, std::bit_cast<std::uint64_t>(freq)}));
    std::vector<cplx> a(n_lines);
    for (std::size_t d = 0; d < params.n_disturbers; ++d) {
      for (std::size_t n = 0; n < n_lines; ++n) a[n] = std::polar(mag, st.phase());
      for (std::size_t i = 0; i < n_lines; ++i)
        for (std::size_t j = 0; j <= i; ++j) r(i, j) += p_d * a[i] * std::conj(a[j]);
    }
  }
  return HermitianPSD::from_lower_unchecked(r);
}

Scenario gen_binder(const BinderModelParams& model, std::size_t n_lines, const BandPlan& plan, double delta_f,
                    double f_max) {
  model.validate();
  BinderModelParams params = model;
  if (params.disturber_psd.empty()) params.disturber_psd = vdsl2_psd(plan.direction);
  if (n_lines == 0) throw InvalidInput("n_lines must be >= 1");
  const auto grid = dmt_grid(f_max, delta_f, plan);

  // One phase per ordered pair, fixed over frequency.
  std::vector<double> pair_phase(n_lines * n_lines, 0.0);
  SeededStream st(derive_seed(params.seed, {kSelfFextTag}));
  for (std::size_t n = 0; n < n_lines; ++n)
    for (std::size_t m = 0; m < n_lines; ++m)
      if (n != m) pair_phase[n * n_lines + m] = st.phase();

  Scenario s;
  s.n_lines = n_lines;
  s.delta_f_hz = delta_f;
  s.f_sym_hz = Defaults::f_sym_hz;
  s.gamma_db = Defaults::gamma_db;
  s.mode = ConstraintMode::per_modem;
  s.p_tot_dbm.assign(n_lines, Defaults::p_tot_dbm);
  s.mask.mode = MaskSpec::Mode::dbm_hz;
  s.mask.per_line.assign(n_lines, vdsl2_psd(plan.direction));
  s.bands = plan;
  s.tones.resize(grid.size());

  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double f = grid[t].freq;
    const cplx hd = direct_transfer(f, params);
    const double xt = std::sqrt(params.fext_gain * params.loop_length_m * f * f);
    if (static_cast<double>(n_lines - 1) * xt >= 1.0) {
      throw ModelDegenerate("FEXT coupling breaks diagonal dominance at " + std::to_string(f) + " Hz");
    }
    CMatrix h(n_lines, n_lines);
    for (std::size_t n = 0; n < n_lines; ++n)
      for (std::size_t m = 0; m < n_lines; ++m)
        h(n, m) = n == m ? hd : xt * hd * std::polar(1.0, pair_phase[n * n_lines + m]);
    s.tones[t] = ToneChannel{grid[t].index, f, std::move(h), alien_covariance(f, delta_f, params, n_lines)};
  }
  s.finalize();
  return s;
}

Scenario fold_uncoordinated(const Scenario& full, std::span<const std::size_t> coordinated,
                            const PsdTable& disturber_psd) {
  const std::size_t k = coordinated.size();
  if (k == 0 || k > full.n_lines) throw InvalidInput("coordinated set must have 1..N lines");
  std::vector<bool> is_coord(full.n_lines, false);
  for (std::size_t c : coordinated) {
    if (c >= full.n_lines || is_coord[c]) throw InvalidInput("coordinated set has a bad or repeated line");
    is_coord[c] = true;
  }

  Scenario s;
  s.n_lines = k;
  s.delta_f_hz = full.delta_f_hz;
  s.f_sym_hz = full.f_sym_hz;
  s.gamma_db = full.gamma_db;
  s.mode = full.mode;
  s.bands = full.bands;
  for (std::size_t c : coordinated) s.p_tot_dbm.push_back(full.p_tot_dbm[c]);
  s.mask.mode = full.mask.mode;
  for (std::size_t c : coordinated) {
    if (full.mask.mode == MaskSpec::Mode::dbm_hz) s.mask.per_line.push_back(full.mask.per_line[c]);
    if (full.mask.mode == MaskSpec::Mode::w_per_tone) s.mask.per_tone_w.push_back(full.mask.per_tone_w[c]);
  }

  s.tones.reserve(full.tones.size());
  for (const ToneChannel& t : full.tones) {
    CMatrix h(k, k);
    CMatrix r(k, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        h(a, b) = t.H(coordinated[a], coordinated[b]);
        r(a, b) = t.R(coordinated[a], coordinated[b]);
      }
    const double lvl = psd_level_at(disturber_psd, t.freq, -kInf);
    const double p_d = lvl == -kInf ? 0.0 : dbm_hz_to_w_per_tone(lvl, full.delta_f_hz);
    if (p_d > 0.0) {
      for (std::size_t d = 0; d < full.n_lines; ++d) {
        if (is_coord[d]) continue;
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b <= a; ++b)
            r(a, b) += p_d * t.H(coordinated[a], d) * std::conj(t.H(coordinated[b], d));
      }
    }
    s.tones.push_back({t.index, t.freq, std::move(h), HermitianPSD::from_lower_unchecked(r)});
  }
  s.finalize();
  return s;
}

}  // namespace dsmopt::binder
