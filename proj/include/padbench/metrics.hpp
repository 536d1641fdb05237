#pragma once

// ISO/IEC 30107-3 style error rates for presentation attack detection.
//
// Scores are attack likelihoods in [0, 1]. A presentation is classified as an
// attack when score >= tau (ties go to "attack"). All rates are fractions in
// [0, 1]; percent formatting lives in report.hpp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "padbench/error.hpp"

namespace padbench {

enum class GroundTruth { bona_fide, attack };

inline constexpr double default_tau = 0.5;

inline void check_tau(double tau) {
  if (!std::isfinite(tau) || tau <= 0.0 || tau >= 1.0)
    throw domain_error("threshold tau must lie in (0, 1), got " + std::to_string(tau));
}

inline void check_rate(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0)
    throw domain_error(std::string(what) + " must lie in [0, 1], got " + std::to_string(v));
}

// 1 = classified as attack presentation, 0 = classified as bona fide.
inline int classify(double score, double tau = default_tau) {
  check_rate(score, "score");
  check_tau(tau);
  return score >= tau ? 1 : 0;
}

// One scored presentation. `res` is always derived from score and tau.
class Decision {
 public:
  Decision(std::string sample_id, double score, GroundTruth truth,
           std::optional<std::string> pais, double tau = default_tau)
      : sample_id_(std::move(sample_id)),
        score_(score),
        truth_(truth),
        pais_(std::move(pais)),
        tau_(tau),
        res_(classify(score, tau)) {
    if (truth_ == GroundTruth::attack && (!pais_ || pais_->empty()))
      throw domain_error("attack decision '" + sample_id_ + "' has no PAIS");
    if (truth_ == GroundTruth::bona_fide && pais_ && !pais_->empty())
      throw domain_error("bona fide decision '" + sample_id_ + "' carries a PAIS");
    if (truth_ == GroundTruth::bona_fide) pais_.reset();
  }

  const std::string& sample_id() const { return sample_id_; }
  double score() const { return score_; }
  GroundTruth ground_truth() const { return truth_; }
  const std::optional<std::string>& pais() const { return pais_; }
  double tau() const { return tau_; }
  int res() const { return res_; }

  Decision at_threshold(double tau) const { return {sample_id_, score_, truth_, pais_, tau}; }

  bool operator==(const Decision&) const = default;

 private:
  std::string sample_id_;
  double score_;
  GroundTruth truth_;
  std::optional<std::string> pais_;
  double tau_;
  int res_;
};

// Fraction of attacks of a single PAIS that were accepted as bona fide.
inline double apcer(std::span<const Decision> decisions) {
  if (decisions.empty()) throw domain_error("APCER undefined: no attack presentations");
  const auto& first = decisions.front();
  if (first.ground_truth() != GroundTruth::attack)
    throw domain_error("APCER input contains bona fide sample '" + first.sample_id() + "'");
  std::size_t missed = 0;
  for (const auto& d : decisions) {
    if (d.ground_truth() != GroundTruth::attack)
      throw domain_error("APCER input contains bona fide sample '" + d.sample_id() + "'");
    if (d.pais() != first.pais())
      throw domain_error("APCER input mixes PAIS '" + *first.pais() + "' and '" + *d.pais() + "'");
    missed += static_cast<std::size_t>(1 - d.res());
  }
  return static_cast<double>(missed) / static_cast<double>(decisions.size());
}

// Fraction of bona fide presentations rejected as attacks.
inline double bpcer(std::span<const Decision> decisions) {
  if (decisions.empty()) throw domain_error("BPCER undefined: no bona fide presentations");
  std::size_t rejected = 0;
  for (const auto& d : decisions) {
    if (d.ground_truth() != GroundTruth::bona_fide)
      throw domain_error("BPCER input contains attack sample '" + d.sample_id() + "'");
    rejected += static_cast<std::size_t>(d.res());
  }
  return static_cast<double>(rejected) / static_cast<double>(decisions.size());
}

inline double hter(double apcer_value, double bpcer_value) {
  check_rate(apcer_value, "APCER");
  check_rate(bpcer_value, "BPCER");
  return (apcer_value + bpcer_value) / 2.0;
}

struct PaisMetrics {
  double apcer = 0.0;
  double hter = 0.0;
  std::size_t n_pais = 0;

  bool operator==(const PaisMetrics&) const = default;
};

struct MetricsReport {
  double tau = default_tau;
  double bpcer = 0.0;
  std::map<std::string, PaisMetrics> per_pais;  // keyed by PAIS abbreviation
  std::size_t n_bf = 0;
  double apcer_max = 0.0;  // worst-case PAIS

  bool operator==(const MetricsReport&) const = default;
};

// Re-thresholds every decision at `tau`, then partitions attacks by PAIS.
inline MetricsReport metrics_report(std::span<const Decision> decisions, double tau = default_tau) {
  check_tau(tau);
  std::vector<Decision> bona_fide;
  std::map<std::string, std::vector<Decision>> attacks;
  for (const auto& d : decisions) {
    auto r = d.at_threshold(tau);
    if (r.ground_truth() == GroundTruth::bona_fide)
      bona_fide.push_back(std::move(r));
    else
      attacks[*r.pais()].push_back(std::move(r));
  }
  if (bona_fide.empty()) throw domain_error("BPCER undefined: no bona fide presentations");
  if (attacks.empty()) throw domain_error("APCER undefined: no attack presentations");

  MetricsReport report;
  report.tau = tau;
  report.n_bf = bona_fide.size();
  report.bpcer = bpcer(bona_fide);
  for (const auto& [abbreviation, group] : attacks) {
    PaisMetrics m;
    m.apcer = apcer(group);
    m.hter = hter(m.apcer, report.bpcer);
    m.n_pais = group.size();
    report.apcer_max = std::max(report.apcer_max, m.apcer);
    report.per_pais.emplace(abbreviation, m);
  }
  return report;
}

}  // namespace padbench
