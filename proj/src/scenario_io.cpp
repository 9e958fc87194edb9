#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dsmopt/binder.hpp"
#include "dsmopt/errors.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace dsmopt::binder {

using numlin::cplx;
using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

using jsonio::json_number;

void write_matrix(std::ostringstream& os, const CMatrix& m) {
  os << '[';
  bool first = true;
  for (const cplx& z : m.entries()) {
    if (!first) os << ',';
    first = false;
    os << '[' << json_number(z.real()) << ',' << json_number(z.imag()) << ']';
  }
  os << ']';
}

void write_table(std::ostringstream& os, const PsdTable& t) {
  os << '[';
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k) os << ',';
    os << "{\"f_lo\":" << json_number(t[k].f_lo) << ",\"f_hi\":" << json_number(t[k].f_hi)
       << ",\"level\":" << json_number(t[k].level_dbm_hz) << '}';
  }
  os << ']';
}

[[noreturn]] void schema_error(const std::string& what) { jsonio::schema_error("scenario", what); }

const json& field(const json& obj, const char* key) { return jsonio::field(obj, key, "scenario"); }

double as_number(const json& v, const char* what) { return jsonio::as_number(v, std::string("scenario: ") + what); }

CMatrix read_matrix(const json& v, std::size_t n, const char* what, std::size_t tone) {
  if (!v.is_array()) schema_error(std::string(what) + " must be an array");
  if (v.size() != n * n) {
    throw DimensionMismatch("tone " + std::to_string(tone) + ": " + what + " has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(n * n));
  }
  std::vector<cplx> e(n * n);
  for (std::size_t k = 0; k < e.size(); ++k) {
    const json& z = v[k];
    if (!z.is_array() || z.size() != 2) schema_error(std::string(what) + " entries must be [re, im]");
    e[k] = {as_number(z[0], what), as_number(z[1], what)};
  }
  return CMatrix(n, n, std::move(e));
}

PsdTable read_table(const json& v) {
  if (!v.is_array()) schema_error("mask table must be an array");
  PsdTable t;
  for (const json& seg : v) {
    t.push_back({as_number(field(seg, "f_lo"), "f_lo"), as_number(field(seg, "f_hi"), "f_hi"),
                 as_number(field(seg, "level"), "level")});
  }
  return t;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  std::ostringstream os;
  os << "{\"meta\":{\"n_lines\":" << s.n_lines << ",\"delta_f_hz\":" << json_number(s.delta_f_hz)
     << ",\"f_sym_hz\":" << json_number(s.f_sym_hz) << ",\"gamma_db\":" << json_number(s.gamma_db)
     << ",\"constraint_mode\":\"" << to_string(s.mode) << "\",\"direction\":\"" << to_string(s.bands.direction)
     << "\"},\n";
  os << "\"power\":{\"p_tot_dbm\":[";
  for (std::size_t n = 0; n < s.p_tot_dbm.size(); ++n) os << (n ? "," : "") << json_number(s.p_tot_dbm[n]);
  os << "]},\n\"mask\":";
  switch (s.mask.mode) {
    case MaskSpec::Mode::none:
      os << "\"none\"";
      break;
    case MaskSpec::Mode::dbm_hz:
      os << "{\"mode\":\"dbm_hz\",\"table\":[";
      for (std::size_t n = 0; n < s.mask.per_line.size(); ++n) {
        if (n) os << ',';
        write_table(os, s.mask.per_line[n]);
      }
      os << "]}";
      break;
    case MaskSpec::Mode::w_per_tone:
      os << "{\"mode\":\"w_per_tone\",\"table\":[";
      for (std::size_t n = 0; n < s.mask.per_tone_w.size(); ++n) {
        os << (n ? "," : "") << '[';
        for (std::size_t i = 0; i < s.mask.per_tone_w[n].size(); ++i)
          os << (i ? "," : "") << json_number(s.mask.per_tone_w[n][i]);
        os << ']';
      }
      os << "]}";
      break;
  }
  os << ",\n\"bands\":[";
  for (std::size_t k = 0; k < s.bands.bands.size(); ++k)
    os << (k ? "," : "") << '[' << json_number(s.bands.bands[k].f_lo) << ',' << json_number(s.bands.bands[k].f_hi)
       << ']';
  os << "],\n\"tones\":[";
  for (std::size_t t = 0; t < s.tones.size(); ++t) {
    const ToneChannel& tc = s.tones[t];
    os << (t ? ",\n" : "\n") << "{\"i\":" << tc.index << ",\"f_hz\":" << json_number(tc.freq) << ",\"H\":";
    write_matrix(os, tc.H);
    os << ",\"R\":";
    write_matrix(os, tc.R.matrix());
    os << '}';
  }
  os << "]}\n";
  return os.str();
}

Scenario scenario_from_json(const std::string& text) {
  const json doc = jsonio::parse(text, "scenario");

  try {
    Scenario s;
    const json& meta = field(doc, "meta");
    const json& nl = field(meta, "n_lines");
    if (!nl.is_number_unsigned() || nl.get<std::size_t>() == 0) schema_error("n_lines must be a positive integer");
    s.n_lines = nl.get<std::size_t>();
    s.delta_f_hz = as_number(field(meta, "delta_f_hz"), "delta_f_hz");
    s.f_sym_hz = as_number(field(meta, "f_sym_hz"), "f_sym_hz");
    s.gamma_db = as_number(field(meta, "gamma_db"), "gamma_db");
    const json& mode = field(meta, "constraint_mode");
    if (!mode.is_string()) schema_error("constraint_mode must be a string");
    s.mode = parse_constraint_mode(mode.get<std::string>());
    if (auto it = meta.find("direction"); it != meta.end() && it->is_string()) {
      s.bands.direction = parse_direction(it->get<std::string>());
    }

    const json& ptot = field(field(doc, "power"), "p_tot_dbm");
    if (!ptot.is_array()) schema_error("p_tot_dbm must be an array");
    for (const json& p : ptot) s.p_tot_dbm.push_back(as_number(p, "p_tot_dbm"));
    if (s.p_tot_dbm.size() != s.n_lines) throw DimensionMismatch("p_tot_dbm length != n_lines");

    const json& mask = field(doc, "mask");
    if (mask.is_string() && mask.get<std::string>() == "none") {
      s.mask.mode = MaskSpec::Mode::none;
    } else {
      const json& mm = field(mask, "mode");
      const std::string m = mm.is_string() ? mm.get<std::string>() : "";
      const json& table = field(mask, "table");
      if (!table.is_array()) schema_error("mask table must be an array");
      if (m == "none") {
        s.mask.mode = MaskSpec::Mode::none;
      } else if (m == "dbm_hz") {
        s.mask.mode = MaskSpec::Mode::dbm_hz;
        // Either one table per line, or a single table shared by every line.
        if (!table.empty() && table[0].is_object()) {
          s.mask.per_line.assign(s.n_lines, read_table(table));
        } else {
          for (const json& t : table) s.mask.per_line.push_back(read_table(t));
        }
        if (s.mask.per_line.size() != s.n_lines) throw DimensionMismatch("mask table count != n_lines");
      } else if (m == "w_per_tone") {
        s.mask.mode = MaskSpec::Mode::w_per_tone;
        for (const json& row : table) {
          if (!row.is_array()) schema_error("w_per_tone rows must be arrays");
          std::vector<double> r;
          for (const json& v : row) r.push_back(as_number(v, "mask"));
          s.mask.per_tone_w.push_back(std::move(r));
        }
      } else {
        schema_error("unknown mask mode '" + m + "'");
      }
    }

    const json& bands = field(doc, "bands");
    if (!bands.is_array()) schema_error("bands must be an array");
    for (const json& b : bands) {
      if (!b.is_array() || b.size() != 2) schema_error("bands entries must be [f_lo, f_hi]");
      s.bands.bands.push_back({as_number(b[0], "band"), as_number(b[1], "band")});
    }

    const json& tones = field(doc, "tones");
    if (!tones.is_array()) schema_error("tones must be an array");
    s.tones.reserve(tones.size());
    for (const json& t : tones) {
      const json& idx = field(t, "i");
      if (!idx.is_number_unsigned()) schema_error("tone index must be a non-negative integer");
      const std::size_t i = idx.get<std::size_t>();
      CMatrix h = read_matrix(field(t, "H"), s.n_lines, "H", i);
      CMatrix r = read_matrix(field(t, "R"), s.n_lines, "R", i);
      s.tones.push_back({i, as_number(field(t, "f_hz"), "f_hz"), std::move(h), HermitianPSD::from_lower(r)});
    }
    s.finalize();
    return s;
  } catch (const json::exception& e) {
    schema_error(e.what());
  }
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Io("cannot write " + path.string());
  out << scenario_to_json(s);
  if (!out) throw Io("write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Io("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

void save_channel_csv(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Io("cannot write " + path.string());
  out << "kind,tone,row,col,re,im\n";
  for (const ToneChannel& t : s.tones) {
    for (int which = 0; which < 2; ++which) {
      const CMatrix& m = which == 0 ? t.H : t.R.matrix();
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
          out << (which == 0 ? 'H' : 'R') << ',' << t.index << ',' << r << ',' << c << ','
              << format_double(m(r, c).real()) << ',' << format_double(m(r, c).imag()) << '\n';
    }
  }
}

void load_channel_csv(Scenario& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Io("cannot open " + path.string());
  const std::size_t n = s.n_lines;
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t t = 0; t < s.tones.size(); ++t) pos[s.tones[t].index] = t;
  std::vector<CMatrix> hs(s.tones.size(), CMatrix(n, n)), rs(s.tones.size(), CMatrix(n, n));
  std::vector<std::size_t> seen_h(s.tones.size(), 0), seen_r(s.tones.size(), 0);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != "kind,tone,row,col,re,im") throw ParseError("bad channel CSV header", 1, 1);
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (int k = 0; k < 6; ++k)
      if (!std::getline(ls, f[k], k < 5 ? ',' : '\n')) throw ParseError("expected 6 fields", lineno, 1);
    std::size_t tone = 0, row = 0, col = 0;
    double re = 0.0, im = 0.0;
    try {
      tone = std::stoul(f[1]);
      row = std::stoul(f[2]);
      col = std::stoul(f[3]);
      re = std::stod(f[4]);
      im = std::stod(f[5]);
    } catch (const std::exception&) {
      throw ParseError("bad number", lineno, 1);
    }
    if (row >= n || col >= n) throw DimensionMismatch("entry outside n_lines x n_lines at line " + std::to_string(lineno));
    auto it = pos.find(tone);
    if (it == pos.end()) throw DimensionMismatch("tone " + std::to_string(tone) + " is not in the scenario");
    if (f[0] == "H") {
      hs[it->second](row, col) = {re, im};
      ++seen_h[it->second];
    } else if (f[0] == "R") {
      rs[it->second](row, col) = {re, im};
      ++seen_r[it->second];
    } else {
      throw ParseError("kind must be H or R", lineno, 1);
    }
  }
  for (std::size_t t = 0; t < s.tones.size(); ++t) {
    if (seen_h[t] != n * n || seen_r[t] != n * n) {
      throw DimensionMismatch("tone " + std::to_string(s.tones[t].index) + " is incomplete in the CSV");
    }
    s.tones[t].H = std::move(hs[t]);
    s.tones[t].R = HermitianPSD::from_lower(rs[t]);
  }
  s.finalize();
}

}  // namespace dsmopt::binder
