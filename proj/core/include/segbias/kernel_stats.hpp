#pragma once

#include <array>

#include <Eigen/Dense>

namespace segbias {

/// Bandwidth multipliers 2^s for s in {-2, ..., 2}.
inline constexpr std::array<double, 5> kMmdScales = {0.25, 0.5, 1.0, 2.0, 4.0};

struct MmdResult {
  double value = 0.0;
  double sigma0 = 1.0;              // median pairwise distance over X u Y
  bool degenerate_bandwidth = false;  // median was 0; sigma0 fell back to 1
  Eigen::MatrixXd grad_x;           // d value / d X (same shape), when requested
  Eigen::MatrixXd grad_y;
};

/// Biased (V-statistic) squared MMD summed over the Gaussian bandwidths
/// sigma0 * 2^s. Rows are points. The gradient includes the dependence of
/// the median-heuristic bandwidth on the points.
MmdResult mmd2_multiscale(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, bool with_grad = false);

}  // namespace segbias
