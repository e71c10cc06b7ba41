#include "segbias/kernel_stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "segbias/error.hpp"

namespace segbias {

namespace {

struct Pair {
  double dist;
  Eigen::Index a;
  Eigen::Index b;
};

}  // namespace

MmdResult mmd2_multiscale(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, bool with_grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  if (n < 1 || m < 1 || x.cols() != y.cols()) {
    throw Error(ErrorCode::InvalidArgument, "kernel_stats", "MMD needs non-empty samples of equal dimension");
  }
  Eigen::MatrixXd z(n + m, x.cols());
  z << x, y;
  const Eigen::Index total = n + m;

  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(total * (total - 1) / 2));
  for (Eigen::Index a = 0; a < total; ++a) {
    for (Eigen::Index b = a + 1; b < total; ++b) {
      pairs.push_back({(z.row(a) - z.row(b)).norm(), a, b});
    }
  }

  MmdResult out;
  // Median over pairs; ties ordered by index so the chosen pair is stable.
  std::vector<Pair> sorted = pairs;
  std::sort(sorted.begin(), sorted.end(), [](const Pair& l, const Pair& r) {
    if (l.dist != r.dist) return l.dist < r.dist;
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });
  std::vector<Pair> median_pairs;
  if (!sorted.empty()) {
    const std::size_t mid = sorted.size() / 2;
    if (sorted.size() % 2 == 1) {
      median_pairs = {sorted[mid]};
    } else {
      median_pairs = {sorted[mid - 1], sorted[mid]};
    }
    double s = 0.0;
    for (const Pair& p : median_pairs) s += p.dist;
    out.sigma0 = s / static_cast<double>(median_pairs.size());
  } else {
    out.sigma0 = 0.0;
  }
  if (!(out.sigma0 > 0.0)) {
    out.sigma0 = 1.0;
    out.degenerate_bandwidth = true;
  }

  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  auto coeff = [&](Eigen::Index a, Eigen::Index b) {
    const bool ax = a < n;
    const bool bx = b < n;
    if (ax && bx) return 1.0 / (nn * nn);
    if (!ax && !bx) return 1.0 / (mm * mm);
    return -1.0 / (nn * mm);
  };

  // Diagonal self-terms: k(z, z) = 1 at every scale.
  const double diag = 1.0 / nn + 1.0 / mm;
  double value = diag * static_cast<double>(kMmdScales.size());

  Eigen::MatrixXd grad_z;
  double d_sigma0 = 0.0;
  if (with_grad) grad_z = Eigen::MatrixXd::Zero(total, x.cols());

  for (const Pair& p : pairs) {
    const double w = 2.0 * coeff(p.a, p.b);  // (a,b) and (b,a)
    const double d2 = p.dist * p.dist;
    double k_sum = 0.0;
    double dk_dd2 = 0.0;
    double dk_dsigma0 = 0.0;
    for (const double scale : kMmdScales) {
      const double sigma = out.sigma0 * scale;
      const double s2 = sigma * sigma;
      const double k = std::exp(-d2 / (2.0 * s2));
      k_sum += k;
      if (with_grad) {
        dk_dd2 += -k / (2.0 * s2);
        dk_dsigma0 += k * d2 / (s2 * out.sigma0);
      }
    }
    value += w * k_sum;
    if (with_grad) {
      // d(d2)/dz_a = 2 (z_a - z_b)
      const Eigen::RowVectorXd diff = z.row(p.a) - z.row(p.b);
      grad_z.row(p.a) += w * dk_dd2 * 2.0 * diff;
      grad_z.row(p.b) -= w * dk_dd2 * 2.0 * diff;
      d_sigma0 += w * dk_dsigma0;
    }
  }
  out.value = value;

  if (with_grad) {
    if (!out.degenerate_bandwidth) {
      const double share = 1.0 / static_cast<double>(median_pairs.size());
      for (const Pair& p : median_pairs) {
        const Eigen::RowVectorXd dir = (z.row(p.a) - z.row(p.b)) / p.dist;
        grad_z.row(p.a) += d_sigma0 * share * dir;
        grad_z.row(p.b) -= d_sigma0 * share * dir;
      }
    }
    out.grad_x = grad_z.topRows(n);
    out.grad_y = grad_z.bottomRows(m);
  }
  return out;
}

}  // namespace segbias
