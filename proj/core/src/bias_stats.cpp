#include "segbias/bias_stats.hpp"

#include <algorithm>
#include <cmath>

#include "segbias/error.hpp"

namespace segbias {

namespace {
constexpr const char* kModule = "bias_stats";
}

ErrorContingency make_contingency(const JointDistribution& clean, const JointDistribution& biased) {
  ErrorContingency t;
  const JointDistribution* rows[2] = {&clean, &biased};
  for (int r = 0; r < 2; ++r) {
    const auto& c = rows[r]->counts;
    t.counts[r] = {c[0][1], c[1][0], c[0][0] + c[1][1]};
  }
  return t;
}

ChiSquare chi_square(const ErrorContingency& table) {
  double row[2] = {0.0, 0.0};
  double col[3] = {0.0, 0.0, 0.0};
  double total = 0.0;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double v = static_cast<double>(table.counts[r][c]);
      if (v < 0.0) throw Error(ErrorCode::InvalidArgument, kModule, "negative count");
      row[r] += v;
      col[c] += v;
      total += v;
    }
  }
  ChiSquare out;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double expected = total > 0.0 ? row[r] * col[c] / total : 0.0;
      if (!(expected > 0.0)) throw Error(ErrorCode::ExpectedZero, kModule, "an expected cell count is zero");
      const double d = static_cast<double>(table.counts[r][c]) - expected;
      out.chi2 += d * d / expected;
    }
  }
  out.df = 2;
  out.p_value = std::exp(-out.chi2 / 2.0);
  return out;
}

double rr_smoothing(std::int64_t n_clean, std::int64_t n_biased) {
  const std::int64_t n = std::min(n_clean, n_biased);
  if (n <= 0) throw Error(ErrorCode::InvalidArgument, kModule, "group pixel totals must be positive");
  return 1.0 / (2.0 * static_cast<double>(n));
}

RelativeRisk relative_risk(const ErrorRates& biased, const ErrorRates& clean, double epsilon) {
  if (biased.omission < 0.0 || biased.commission < 0.0 || clean.omission < 0.0 || clean.commission < 0.0) {
    throw Error(ErrorCode::InvalidArgument, kModule, "rates must be >= 0");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, kModule, "smoothing must be > 0");
  RelativeRisk rr;
  rr.rr_om = std::log((biased.omission + epsilon) / (clean.omission + epsilon));
  rr.rr_co = std::log((biased.commission + epsilon) / (clean.commission + epsilon));
  return rr;
}

Symmetry symmetry_score(std::int64_t om_biased, std::int64_t om_clean, std::int64_t co_biased,
                        std::int64_t co_clean, std::int64_t n_biased, std::int64_t n_clean) {
  if (n_biased + n_clean <= 0) throw Error(ErrorCode::InvalidArgument, kModule, "no pixels");
  const double pixel_share = static_cast<double>(n_biased) / static_cast<double>(n_biased + n_clean);
  auto component = [&](std::int64_t b, std::int64_t c) -> std::optional<double> {
    if (b + c <= 0) return std::nullopt;
    const double share = static_cast<double>(b) / static_cast<double>(b + c);
    return 1.0 - 2.0 * std::abs(share - pixel_share);
  };
  Symmetry s;
  s.s_om = component(om_biased, om_clean);
  s.s_co = component(co_biased, co_clean);
  if (!s.s_om && !s.s_co) throw Error(ErrorCode::NoErrors, kModule, "no omission or commission errors");
  if (s.s_om && s.s_co) {
    s.s = std::min(*s.s_om, *s.s_co);
  } else {
    s.s = s.s_om ? s.s_om : s.s_co;
  }
  return s;
}

BiasIndicators bias_indicators(const JointDistribution& clean, const JointDistribution& biased) {
  BiasIndicators out;
  const ErrorContingency table = make_contingency(clean, biased);
  try {
    out.chi = chi_square(table);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ExpectedZero) throw;
    out.chi_defined = false;
  }
  out.significant = out.chi_defined && out.chi.p_value < 0.05;
  out.rr_epsilon = rr_smoothing(clean.total, biased.total);
  out.rr = relative_risk(error_rates(biased), error_rates(clean), out.rr_epsilon);
  try {
    out.symmetry = symmetry_score(table.counts[1][0], table.counts[0][0], table.counts[1][1], table.counts[0][1],
                                  biased.total, clean.total);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoErrors) throw;
  }
  return out;
}

}  // namespace segbias
