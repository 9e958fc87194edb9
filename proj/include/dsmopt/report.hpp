#pragma once

// Flat-file outputs of a solved allocation. All files are written with
// fixed formatting so identical inputs give byte-identical files.
//
//   allocation.csv  tone,freq_hz,line,psd_w,b_nats        (one row per tone and line)
//   summary.csv     line,rate_mbps,power_dbm,lambda
//   audit.json      {feasibility, dual_feasibility, comp_slack, stationarity, converged, details}
//   allocation.json full allocation state, reloadable for `audit`
//   rates.csv       line,rate_mbps                          (plot data)
//   psd.csv         tone,freq_hz,line,psd_dbm_hz            (plot data)

#include <filesystem>
#include <string>

#include "dsmopt/binder.hpp"
#include "dsmopt/spectra.hpp"

namespace dsmopt::report {

using binder::Scenario;
using spectra::Allocation;
using spectra::AuditReport;

void write_allocation_csv(const Scenario& s, const Allocation& a, const std::filesystem::path& path);
void write_summary_csv(const Scenario& s, const Allocation& a, const std::filesystem::path& path);

std::string audit_to_json(const AuditReport& r);
void write_audit_json(const AuditReport& r, const std::filesystem::path& path);

std::string allocation_to_json(const Allocation& a);
// Throws ParseError or DimensionMismatch when the file does not describe an
// allocation of scenario `s`.
Allocation allocation_from_json(const Scenario& s, const std::string& text);
void save_allocation(const Allocation& a, const std::filesystem::path& path);
Allocation load_allocation(const Scenario& s, const std::filesystem::path& path);

// rates.csv and psd.csv in `dir`. With no tones both files hold only their
// header.
void emit_plotdata(const Scenario& s, const Allocation& a, const std::filesystem::path& dir);

// All of the above into `dir` (created if needed).
void write_outputs(const Scenario& s, const Allocation& a, const AuditReport& r, const std::filesystem::path& dir);

// "%.4f" of bit/s in Mbps.
std::string format_mbps(double bps);

// Writes `text` to `path`, throwing Io on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dsmopt::report
