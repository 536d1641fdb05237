#pragma once

// Score files: UTF-8 CSV, LF line ends, header
//   sample_id,ground_truth,pais,score
// ground_truth is "bonafide" or "attack"; pais is empty for bona fide rows.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "padbench/error.hpp"
#include "padbench/metrics.hpp"

namespace padbench {

struct ScoreLine {
  std::string sample_id;
  GroundTruth ground_truth = GroundTruth::bona_fide;
  std::optional<std::string> pais;
  double score = 0.5;

  Decision decision(double tau = default_tau) const { return {sample_id, score, ground_truth, pais, tau}; }

  bool operator==(const ScoreLine&) const = default;
};

inline constexpr const char* score_file_header = "sample_id,ground_truth,pais,score";

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// RFC 4180 fields of one line (no embedded newlines).
inline std::vector<std::string> csv_split(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw format_error("line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

inline double parse_real(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty())
    throw format_error("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  return v;
}

inline std::string format_real(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Reads every line of a text file, accepting CRLF. Strips a UTF-8 BOM.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (!lines.empty() && lines[0].starts_with("\xEF\xBB\xBF")) lines[0].erase(0, 3);
  return lines;
}

}  // namespace detail

inline std::vector<ScoreLine> read_scores(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty() || lines[0] != score_file_header)
    throw format_error("'" + path.string() + "' lacks the header '" + score_file_header + "'");
  std::vector<ScoreLine> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::csv_split(lines[i], i + 1);
    if (f.size() != 4) throw format_error("line " + std::to_string(i + 1) + ": expected 4 fields");
    ScoreLine s;
    s.sample_id = f[0];
    if (f[1] == "bonafide")
      s.ground_truth = GroundTruth::bona_fide;
    else if (f[1] == "attack")
      s.ground_truth = GroundTruth::attack;
    else
      throw format_error("line " + std::to_string(i + 1) + ": unknown ground truth '" + f[1] + "'");
    if (!f[2].empty()) s.pais = f[2];
    s.score = detail::parse_real(f[3], i + 1);
    if (!(s.score >= 0.0 && s.score <= 1.0))
      throw format_error("line " + std::to_string(i + 1) + ": score outside [0, 1]");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string format_scores(std::span<const ScoreLine> scores) {
  std::string out = std::string(score_file_header) + "\n";
  for (const auto& s : scores)
    out += detail::csv_field(s.sample_id) + "," + (s.ground_truth == GroundTruth::attack ? "attack" : "bonafide") +
           "," + detail::csv_field(s.pais.value_or("")) + "," + detail::format_real(s.score) + "\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw io_error("failed writing '" + path.string() + "'");
}

inline void write_scores(const std::filesystem::path& path, std::span<const ScoreLine> scores) {
  write_text(path, format_scores(scores));
}

inline std::vector<Decision> to_decisions(std::span<const ScoreLine> scores, double tau = default_tau) {
  std::vector<Decision> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.decision(tau));
  return out;
}

}  // namespace padbench
