#pragma once

// Point-estimate E-values, Cornfield thresholds and the bias-factor bound
// for a single binary unmeasured confounder.
//
// All functions are pure. Ratios below one are inverted before any
// computation, so a protective estimate and its reciprocal are treated as
// the same strength of association.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "evsens/error.hpp"

namespace evsens {

enum class EffectMeasure { RiskRatio, OddsRatio, HazardRatio };

constexpr std::string_view to_short_string(EffectMeasure m) noexcept {
  switch (m) {
    case EffectMeasure::RiskRatio: return "rr";
    case EffectMeasure::OddsRatio: return "or";
    case EffectMeasure::HazardRatio: return "hr";
  }
  return "rr";
}

constexpr std::string_view to_long_string(EffectMeasure m) noexcept {
  switch (m) {
    case EffectMeasure::RiskRatio: return "risk ratio (RR)";
    case EffectMeasure::OddsRatio: return "odds ratio (OR)";
    case EffectMeasure::HazardRatio: return "hazard ratio (HR)";
  }
  return "risk ratio (RR)";
}

inline std::optional<EffectMeasure> parse_measure(std::string_view text) {
  if (text == "rr" || text == "RR") return EffectMeasure::RiskRatio;
  if (text == "or" || text == "OR") return EffectMeasure::OddsRatio;
  if (text == "hr" || text == "HR") return EffectMeasure::HazardRatio;
  return std::nullopt;
}

/// An observed association for one exposure-outcome pair. OR and HR are
/// handled exactly like RR; the measure is kept for reporting only.
struct EffectEstimate {
  EffectMeasure measure = EffectMeasure::RiskRatio;
  double value = 1.0;
  std::string label;

  friend bool operator==(const EffectEstimate&, const EffectEstimate&) = default;
};

enum class MagnitudeBand { Low, Moderate, High };

constexpr std::string_view to_string(MagnitudeBand band) noexcept {
  switch (band) {
    case MagnitudeBand::Low: return "Low";
    case MagnitudeBand::Moderate: return "Moderate";
    case MagnitudeBand::High: return "High";
  }
  return "Low";
}

inline std::optional<MagnitudeBand> parse_band(std::string_view text) {
  if (text == "Low") return MagnitudeBand::Low;
  if (text == "Moderate") return MagnitudeBand::Moderate;
  if (text == "High") return MagnitudeBand::High;
  return std::nullopt;
}

/// Heuristic cut points on the E-value scale. These are a reporting aid for
/// comparing against model conclusions, not a ground truth.
struct BandThresholds {
  double moderate_from = 1.5;
  double high_from = 3.0;
};

struct SensitivityResult {
  double evalue = 1.0;
  double effective_rr = 1.0;
  double cornfield_exposure_threshold = 1.0;
  MagnitudeBand band = MagnitudeBand::Low;

  friend bool operator==(const SensitivityResult&,
                         const SensitivityResult&) = default;
};

/// Joint association of a binary confounder U with exposure (rr_eu) and
/// outcome (rr_ud), both on the risk-ratio scale.
struct ConfounderStrength {
  double rr_eu = 1.0;
  double rr_ud = 1.0;
};

namespace detail {

inline void check_effect(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::NonFiniteEffect, "effect value must be finite");
  }
  if (value <= 0.0) {
    throw Error(ErrorKind::NonPositiveEffect,
                "effect value must be > 0, got " + std::to_string(value));
  }
}

inline void check_probability(double p, std::string_view name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::InvalidProbability,
                std::string(name) + " must lie in [0, 1], got " +
                    std::to_string(p));
  }
}

}  // namespace detail

/// max(v, 1/v): the ratio after the protective-effect inversion.
inline double effective_ratio(double value) {
  detail::check_effect(value);
  return value < 1.0 ? 1.0 / value : value;
}

/// E-value of an already-inverted ratio (rr >= 1).
inline double evalue_from_ratio(double rr) noexcept {
  return rr + std::sqrt(rr * (rr - 1.0));
}

inline MagnitudeBand classify_band(double evalue,
                                   const BandThresholds& thresholds = {}) {
  if (evalue < thresholds.moderate_from) return MagnitudeBand::Low;
  if (evalue < thresholds.high_from) return MagnitudeBand::Moderate;
  return MagnitudeBand::High;
}

inline SensitivityResult evalue_point(const EffectEstimate& estimate,
                                      const BandThresholds& thresholds = {}) {
  const double rr = effective_ratio(estimate.value);
  SensitivityResult result;
  result.effective_rr = rr;
  result.evalue = evalue_from_ratio(rr);
  result.cornfield_exposure_threshold = rr;
  result.band = classify_band(result.evalue, thresholds);
  return result;
}

/// Minimum confounder-exposure risk ratio needed to explain away the
/// estimate entirely (Cornfield's condition).
inline double cornfield_required_strength(const EffectEstimate& estimate) {
  return effective_ratio(estimate.value);
}

/// Largest observed risk ratio a confounder of the given strength can
/// produce when the true exposure effect is null.
inline double bias_factor(const ConfounderStrength& strength) {
  const auto valid = [](double x) { return std::isfinite(x) && x >= 1.0; };
  if (!valid(strength.rr_eu) || !valid(strength.rr_ud)) {
    throw Error(ErrorKind::InvalidStrength,
                "confounder risk ratios must be finite and >= 1");
  }
  return (strength.rr_eu * strength.rr_ud) /
         (strength.rr_eu + strength.rr_ud - 1.0);
}

/// Observed exposure-outcome risk ratio in a population where the exposure
/// has no effect, a binary confounder has prevalence p1 among the exposed
/// and p0 among the unexposed, and multiplies outcome risk by rr_ud.
inline double collapsed_rr(double p1, double p0, double rr_ud) {
  detail::check_probability(p1, "p1");
  detail::check_probability(p0, "p0");
  if (p0 > p1) {
    throw Error(ErrorKind::InvalidProbability, "p0 must not exceed p1");
  }
  if (!(std::isfinite(rr_ud) && rr_ud >= 1.0)) {
    throw Error(ErrorKind::InvalidStrength, "rr_ud must be finite and >= 1");
  }
  return (p1 * (rr_ud - 1.0) + 1.0) / (p0 * (rr_ud - 1.0) + 1.0);
}

struct GridOptimum {
  double rr = 1.0;
  double p1 = 0.0;
  double p0 = 0.0;
};

/// Exhaustive search for the largest collapsed_rr over a grid_steps x
/// grid_steps prevalence grid on [0, 1]^2, restricted to p0 <= p1 and
/// p1 / p0 <= rr_eu. The analytic optimum (1, 1/rr_eu) is always seeded.
inline GridOptimum max_collapsed_rr(const ConfounderStrength& strength,
                                    int grid_steps = 200) {
  if (grid_steps < 2) {
    throw Error(ErrorKind::InvalidStrength, "grid_steps must be >= 2");
  }
  (void)bias_factor(strength);  // validates both components

  GridOptimum best{collapsed_rr(1.0, 1.0 / strength.rr_eu, strength.rr_ud),
                   1.0, 1.0 / strength.rr_eu};
  const double step = 1.0 / static_cast<double>(grid_steps - 1);
  for (int i = 0; i < grid_steps; ++i) {
    const double p1 = i == grid_steps - 1 ? 1.0 : i * step;
    for (int j = 0; j <= i; ++j) {
      const double p0 = j == grid_steps - 1 ? 1.0 : j * step;
      // p1 / p0 <= rr_eu, written without division so p0 == 0 is handled.
      if (p1 > strength.rr_eu * p0) continue;
      const double rr = collapsed_rr(p1, p0, strength.rr_ud);
      if (rr > best.rr) best = {rr, p1, p0};
    }
  }
  return best;
}

}  // namespace evsens
