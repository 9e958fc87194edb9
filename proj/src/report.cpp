#include "dsmopt/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dsmopt/errors.hpp"
#include "json_util.hpp"

namespace dsmopt::report {

using binder::format_double;
using jsonio::json;
using jsonio::json_number;
using numlin::CMatrix;
using numlin::cplx;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Io("cannot write " + path.string());
  out << text;
  if (!out) throw Io("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Io("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_mbps(double bps) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", bps / 1e6);
  return buf;
}

void write_allocation_csv(const Scenario& s, const Allocation& a, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "tone,freq_hz,line,psd_w,b_nats\n";
  for (std::size_t i = 0; i < s.n_tones(); ++i)
    for (std::size_t n = 0; n < s.n_lines; ++n) {
      os << s.tones[i].index << ',' << format_double(s.tones[i].freq) << ',' << n << ','
         << format_double(a.psd[n][i]) << ',' << format_double(a.line_b_nats[n][i]) << '\n';
    }
  write_text(path, os.str());
}

void write_summary_csv(const Scenario& s, const Allocation& a, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "line,rate_mbps,power_dbm,lambda\n";
  for (std::size_t n = 0; n < s.n_lines; ++n) {
    os << n << ',' << format_mbps(a.rates_per_line[n]) << ',' << format_double(binder::w_to_dbm(a.per_modem_power[n]))
       << ',' << format_double(a.multipliers.lambda[n]) << '\n';
  }
  write_text(path, os.str());
}

std::string audit_to_json(const AuditReport& r) {
  std::ostringstream os;
  os << "{\"feasibility\":" << json_number(r.feasibility) << ",\"dual_feasibility\":" << json_number(r.dual_feasibility)
     << ",\"comp_slack\":" << json_number(r.comp_slack) << ",\"stationarity\":" << json_number(r.stationarity)
     << ",\"converged\":" << (r.converged ? "true" : "false") << ",\"details\":{\"power_violation\":"
     << json_number(r.power_violation) << ",\"mask_violation\":" << json_number(r.mask_violation)
     << ",\"psd_violation\":" << json_number(r.psd_violation) << ",\"duality_gap\":" << json_number(r.duality_gap)
     << "}}\n";
  return os.str();
}

void write_audit_json(const AuditReport& r, const std::filesystem::path& path) { write_text(path, audit_to_json(r)); }

namespace {

void write_row(std::ostringstream& os, const std::vector<double>& v) {
  os << '[';
  for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << json_number(v[k]);
  os << ']';
}

void write_rows(std::ostringstream& os, const std::vector<std::vector<double>>& rows) {
  os << '[';
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k) os << ',';
    write_row(os, rows[k]);
  }
  os << ']';
}

std::vector<double> read_row(const json& v, std::size_t expect, const std::string& what) {
  if (!v.is_array()) jsonio::schema_error("allocation", what + " must be an array");
  if (v.size() != expect) {
    throw DimensionMismatch("allocation: " + what + " has " + std::to_string(v.size()) + " entries, expected " +
                            std::to_string(expect));
  }
  std::vector<double> out(expect);
  for (std::size_t k = 0; k < expect; ++k) out[k] = jsonio::as_number(v[k], "allocation: " + what);
  return out;
}

std::vector<std::vector<double>> read_rows(const json& v, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!v.is_array() || v.size() != rows) {
    throw DimensionMismatch("allocation: " + what + " must have " + std::to_string(rows) + " rows");
  }
  std::vector<std::vector<double>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = read_row(v[r], cols, what);
  return out;
}

}  // namespace

std::string allocation_to_json(const Allocation& a) {
  const std::size_t n_tones = a.cov.size();
  const std::size_t n_lines = a.multipliers.lambda.size();
  std::ostringstream os;
  os << "{\"algorithm\":" << jsonio::quoted(a.algorithm) << ",\"n_lines\":" << n_lines << ",\"n_tones\":" << n_tones
     << ",\n\"lambda\":";
  write_row(os, a.multipliers.lambda);
  os << ",\n\"mu\":";
  write_rows(os, a.multipliers.mu);
  os << ",\n\"b_nats\":";
  write_row(os, a.b_nats);
  os << ",\n\"line_b_nats\":";
  write_rows(os, a.line_b_nats);
  // Lower triangle of each covariance, row-major, as [re, im] pairs.
  os << ",\n\"cov\":[";
  for (std::size_t i = 0; i < n_tones; ++i) {
    os << (i ? ",\n[" : "\n[");
    bool first = true;
    for (std::size_t r = 0; r < n_lines; ++r)
      for (std::size_t c = 0; c <= r; ++c) {
        const cplx z = a.cov[i](r, c);
        os << (first ? "" : ",") << json_number(z.real()) << ',' << json_number(z.imag());
        first = false;
      }
    os << ']';
  }
  const auto& d = a.diagnostics;
  os << "],\n\"diagnostics\":{\"iterations\":" << d.iterations << ",\"evaluations\":" << d.evaluations
     << ",\"converged\":" << (d.converged ? "true" : "false") << ",\"power_residual\":" << json_number(d.power_residual)
     << ",\"mask_residual\":" << json_number(d.mask_residual) << ",\"skipped_tones\":" << d.skipped_tones
     << ",\"message\":" << jsonio::quoted(d.message) << "}}\n";
  return os.str();
}

Allocation allocation_from_json(const Scenario& s, const std::string& text) {
  const json doc = jsonio::parse(text, "allocation");
  const std::string ctx = "allocation";
  try {
    const std::size_t n_lines = s.n_lines;
    const std::size_t n_tones = s.n_tones();
    const json& nl = jsonio::field(doc, "n_lines", ctx);
    const json& nt = jsonio::field(doc, "n_tones", ctx);
    if (!nl.is_number_unsigned() || !nt.is_number_unsigned()) jsonio::schema_error(ctx, "sizes must be integers");
    if (nl.get<std::size_t>() != n_lines || nt.get<std::size_t>() != n_tones) {
      throw DimensionMismatch("allocation does not match the scenario's line or tone count");
    }
    Allocation a;
    a.algorithm = jsonio::as_string(jsonio::field(doc, "algorithm", ctx), ctx);
    a.multipliers.lambda = read_row(jsonio::field(doc, "lambda", ctx), n_lines, "lambda");
    a.multipliers.mu = read_rows(jsonio::field(doc, "mu", ctx), n_lines, n_tones, "mu");
    a.b_nats = read_row(jsonio::field(doc, "b_nats", ctx), n_tones, "b_nats");
    a.line_b_nats = read_rows(jsonio::field(doc, "line_b_nats", ctx), n_lines, n_tones, "line_b_nats");
    const json& cov = jsonio::field(doc, "cov", ctx);
    if (!cov.is_array() || cov.size() != n_tones) throw DimensionMismatch("allocation: cov must have one entry per tone");
    const std::size_t tri = n_lines * (n_lines + 1) / 2;
    a.cov.reserve(n_tones);
    for (std::size_t i = 0; i < n_tones; ++i) {
      const auto flat = read_row(cov[i], 2 * tri, "cov");
      CMatrix m(n_lines, n_lines);
      std::size_t k = 0;
      for (std::size_t r = 0; r < n_lines; ++r)
        for (std::size_t c = 0; c <= r; ++c, k += 2) m(r, c) = {flat[k], flat[k + 1]};
      a.cov.push_back(numlin::HermitianPSD::from_lower_unchecked(m));
    }
    const json& d = jsonio::field(doc, "diagnostics", ctx);
    a.diagnostics.iterations = jsonio::field(d, "iterations", ctx).get<int>();
    a.diagnostics.evaluations = jsonio::field(d, "evaluations", ctx).get<long long>();
    a.diagnostics.converged = jsonio::field(d, "converged", ctx).get<bool>();
    a.diagnostics.power_residual = jsonio::as_number(jsonio::field(d, "power_residual", ctx), ctx);
    a.diagnostics.mask_residual = jsonio::as_number(jsonio::field(d, "mask_residual", ctx), ctx);
    a.diagnostics.skipped_tones = jsonio::field(d, "skipped_tones", ctx).get<std::size_t>();
    a.diagnostics.message = jsonio::as_string(jsonio::field(d, "message", ctx), ctx);
    spectra::finish_allocation(s, a);
    return a;
  } catch (const json::exception& e) {
    jsonio::schema_error(ctx, e.what());
  }
}

void save_allocation(const Allocation& a, const std::filesystem::path& path) { write_text(path, allocation_to_json(a)); }

Allocation load_allocation(const Scenario& s, const std::filesystem::path& path) {
  return allocation_from_json(s, read_text(path));
}

void emit_plotdata(const Scenario& s, const Allocation& a, const std::filesystem::path& dir) {
  std::ostringstream rates;
  rates << "line,rate_mbps\n";
  std::ostringstream psd;
  psd << "tone,freq_hz,line,psd_dbm_hz\n";
  if (s.n_tones() > 0) {
    for (std::size_t n = 0; n < s.n_lines; ++n) rates << n << ',' << format_mbps(a.rates_per_line[n]) << '\n';
    for (std::size_t i = 0; i < s.n_tones(); ++i)
      for (std::size_t n = 0; n < s.n_lines; ++n) {
        const double w = a.psd[n][i];
        const double dbm_hz = w > 0.0 ? 10.0 * std::log10(w / s.delta_f_hz) + 30.0 : -binder::kInf;
        psd << s.tones[i].index << ',' << format_double(s.tones[i].freq) << ',' << n << ',' << format_double(dbm_hz)
            << '\n';
      }
  }
  write_text(dir / "rates.csv", rates.str());
  write_text(dir / "psd.csv", psd.str());
}

void write_outputs(const Scenario& s, const Allocation& a, const AuditReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Io("cannot create " + dir.string() + ": " + ec.message());
  write_allocation_csv(s, a, dir / "allocation.csv");
  write_summary_csv(s, a, dir / "summary.csv");
  write_audit_json(r, dir / "audit.json");
  save_allocation(a, dir / "allocation.json");
  emit_plotdata(s, a, dir);
}

}  // namespace dsmopt::report
