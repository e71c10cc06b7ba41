#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "segbias/cl_audit.hpp"

namespace segbias {

/// Rows: clean group, biased group. Columns: omission, commission, correct.
struct ErrorContingency {
  std::array<std::array<std::int64_t, 3>, 2> counts{};

  std::int64_t row_total(int row) const { return counts[row][0] + counts[row][1] + counts[row][2]; }
};

/// Builds the table from per-group joint distributions.
ErrorContingency make_contingency(const JointDistribution& clean, const JointDistribution& biased);

struct ChiSquare {
  double chi2 = 0.0;
  int df = 2;
  double p_value = 1.0;
};

/// Pearson test of independence between group and error type. Throws
/// ExpectedZero if any expected cell count is zero.
ChiSquare chi_square(const ErrorContingency& table);

struct RelativeRisk {
  double rr_om = 0.0;
  double rr_co = 0.0;
};

/// Smoothing used by default: 1 / (2 min(N_clean, N_biased)).
double rr_smoothing(std::int64_t n_clean, std::int64_t n_biased);

RelativeRisk relative_risk(const ErrorRates& biased, const ErrorRates& clean, double epsilon);

struct Symmetry {
  std::optional<double> s_om;
  std::optional<double> s_co;
  std::optional<double> s;  // min of the defined components
};

/// Throws NoErrors when neither error type occurs in either group.
Symmetry symmetry_score(std::int64_t om_biased, std::int64_t om_clean, std::int64_t co_biased,
                        std::int64_t co_clean, std::int64_t n_biased, std::int64_t n_clean);

struct BiasIndicators {
  ChiSquare chi;
  bool chi_defined = true;
  RelativeRisk rr;
  double rr_epsilon = 0.0;
  Symmetry symmetry;
  bool significant = false;  // p < 0.05
};

BiasIndicators bias_indicators(const JointDistribution& clean, const JointDistribution& biased);

}  // namespace segbias
