#pragma once

// Table rendering for metrics reports and the cross-check between published
// APCER-accuracy and HTER tables.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "padbench/error.hpp"
#include "padbench/metrics.hpp"
#include "padbench/scores.hpp"

namespace padbench {

enum class TableStyle { error_rates, accuracy };

inline TableStyle table_style_from_string(const std::string& s) {
  if (s == "error" || s == "error_rates") return TableStyle::error_rates;
  if (s == "accuracy") return TableStyle::accuracy;
  throw domain_error("unknown table style '" + s + "'");
}

// Percent with two decimals, ties rounded away from zero. The value is first
// snapped to 1e-6 to absorb binary representation error (0.085 -> 0.09).
inline std::string format_percent(double percent) {
  const double snapped = std::round(percent * 1e6) / 1e6;
  const double hundredths = std::floor(std::abs(snapped) * 100.0 + 0.5);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%.2f", snapped < 0 && hundredths > 0 ? "-" : "", hundredths / 100.0);
  return buf;
}

struct RenderedTables {
  std::string text;
  std::string csv;
};

// error_rates: APCER/BPCER as error percentages. accuracy: 100(1 - rate).
// HTER is always an error. CSV holds raw fractions, one row per PAIS plus one
// bona fide row.
inline RenderedTables render_tables(const MetricsReport& r, TableStyle style) {
  const bool acc = style == TableStyle::accuracy;
  auto shown = [&](double rate) { return format_percent(100.0 * (acc ? 1.0 - rate : rate)); };
  const std::string rate_col = acc ? "APCER acc (%)" : "APCER (%)";

  std::size_t name_w = 12;
  for (const auto& [name, m] : r.per_pais) name_w = std::max(name_w, name.size());
  auto pad = [](std::string s, std::size_t w) { return s.size() < w ? s + std::string(w - s.size(), ' ') : s; };
  auto lpad = [](std::string s, std::size_t w) { return s.size() < w ? std::string(w - s.size(), ' ') + s : s; };

  RenderedTables out;
  char tau[32];
  std::snprintf(tau, sizeof tau, "%g", r.tau);
  out.text = "threshold " + std::string(tau) + "\n";
  out.text += pad("PAIS", name_w) + "  " + lpad("N", 6) + "  " + lpad(rate_col, 14) + "  " + lpad("HTER (%)", 9) + "\n";
  for (const auto& [name, m] : r.per_pais)
    out.text += pad(name, name_w) + "  " + lpad(std::to_string(m.n_pais), 6) + "  " + lpad(shown(m.apcer), 14) +
                "  " + lpad(format_percent(100.0 * m.hter), 9) + "\n";
  out.text += pad("bona fide", name_w) + "  " + lpad(std::to_string(r.n_bf), 6) + "  " +
              lpad((acc ? "BPCER acc " : "BPCER ") + shown(r.bpcer), 14) + "\n";
  out.text += pad("APCER max", name_w) + "  " + lpad("", 6) + "  " + lpad(shown(r.apcer_max), 14) + "\n";

  out.csv = "kind,name,count,rate,hter\n";
  for (const auto& [name, m] : r.per_pais)
    out.csv += "apcer," + detail::csv_field(name) + "," + std::to_string(m.n_pais) + "," + detail::format_real(m.apcer) +
               "," + detail::format_real(m.hter) + "\n";
  out.csv += "bpcer,bona_fide," + std::to_string(r.n_bf) + "," + detail::format_real(r.bpcer) + ",\n";
  return out;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, m] : r.per_pais) per[name] = {{"apcer", m.apcer}, {"hter", m.hter}, {"n", m.n_pais}};
  return {{"tau", r.tau}, {"bpcer", r.bpcer}, {"n_bona_fide", r.n_bf}, {"apcer_max", r.apcer_max}, {"per_pais", per}};
}

// ---- published-table audit --------------------------------------------------

struct AuditFinding {
  std::string pais;
  double apcer_accuracy = 0.0;
  double printed_hter = 0.0;
  double implied_hter = 0.0;  // (100 - apcer_accuracy) / 2, bona fide error taken as 0
  double residual = 0.0;
  bool pass = false;

  bool operator==(const AuditFinding&) const = default;
};

inline constexpr double audit_tolerance = 0.05;

inline std::vector<AuditFinding> audit_table_consistency(const std::map<std::string, double>& apcer_accuracy,
                                                         const std::map<std::string, double>& hter,
                                                         double tolerance = audit_tolerance) {
  std::set<std::string> a, h;
  for (const auto& [k, v] : apcer_accuracy) a.insert(k);
  for (const auto& [k, v] : hter) h.insert(k);
  if (a != h) {
    std::string only;
    for (const auto& k : a)
      if (!h.contains(k)) only += " " + k + " (APCER only)";
    for (const auto& k : h)
      if (!a.contains(k)) only += " " + k + " (HTER only)";
    throw domain_error("audit tables have different PAIS keys:" + only);
  }
  std::vector<AuditFinding> out;
  for (const auto& [pais, acc] : apcer_accuracy) {
    AuditFinding f;
    f.pais = pais;
    f.apcer_accuracy = acc;
    f.printed_hter = hter.at(pais);
    f.implied_hter = (100.0 - acc) / 2.0;
    f.residual = std::abs(f.implied_hter - f.printed_hter);
    // 1e-9 absorbs decimal-to-binary error at the boundary
    f.pass = f.residual <= tolerance + 1e-9;
    out.push_back(f);
  }
  return out;
}

inline nlohmann::json to_json(const AuditFinding& f) {
  return {{"pais", f.pais},
          {"apcer_accuracy", f.apcer_accuracy},
          {"printed_hter", f.printed_hter},
          {"implied_hter", f.implied_hter},
          {"residual", f.residual},
          {"pass", f.pass}};
}

// CSV with header pais,variant,value. Returns variant -> (pais -> value).
inline std::map<std::string, std::map<std::string, double>> read_table_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != "pais,variant,value")
    throw format_error("'" + path.string() + "' lacks the header 'pais,variant,value'");
  std::map<std::string, std::map<std::string, double>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::csv_split(lines[i], i + 1);
    if (f.size() != 3) throw format_error("line " + std::to_string(i + 1) + ": expected 3 fields");
    if (!out[f[1]].emplace(f[0], detail::parse_real(f[2], i + 1)).second)
      throw format_error("line " + std::to_string(i + 1) + ": duplicate row " + f[0] + "/" + f[1]);
  }
  return out;
}

}  // namespace padbench
