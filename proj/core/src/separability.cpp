#include "segbias/separability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "segbias/error.hpp"
#include "segbias/kernel_stats.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "separability";

constexpr int kProbeIterations = 500;
constexpr double kProbeRate = 0.1;
constexpr double kProbeL2 = 1e-4;

std::array<std::size_t, 2> group_counts(const EmbeddingSet& e) {
  if (static_cast<Eigen::Index>(e.groups.size()) != e.vectors.rows()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one group id per embedding row is required");
  }
  std::array<std::size_t, 2> n{0, 0};
  for (int g : e.groups) {
    if (g != 0 && g != 1) throw Error(ErrorCode::UnknownGroup, kModule, "group must be 0 or 1");
    ++n[static_cast<std::size_t>(g)];
  }
  return n;
}

void require_min_group(const EmbeddingSet& e, std::size_t min) {
  const auto n = group_counts(e);
  if (n[0] < min || n[1] < min) {
    throw Error(ErrorCode::GroupTooSmall, kModule, "each group needs at least " + std::to_string(min) + " members");
  }
}

Eigen::MatrixXd rows_of(const EmbeddingSet& e, int group) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < e.groups.size(); ++i) {
    if (e.groups[i] == group) idx.push_back(static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), e.vectors.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = e.vectors.row(idx[k]);
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double t = std::exp(z);
  return t / (1.0 + t);
}

struct Logistic {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::VectorXd w;
  double b = 0.0;

  double score(const Eigen::RowVectorXd& x) const {
    const Eigen::VectorXd z = ((x.transpose() - mean).array() / scale.array()).matrix();
    return sigmoid(w.dot(z) + b);
  }
};

Logistic fit_logistic(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Logistic m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  m.scale = (centered.array().square().colwise().sum() / static_cast<double>(n)).sqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(m.scale[j] > 1e-12)) m.scale[j] = 1.0;
  }
  const Eigen::MatrixXd z = (centered.array().rowwise() / m.scale.transpose().array()).matrix();
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = y[static_cast<std::size_t>(i)];
  m.w = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < kProbeIterations; ++it) {
    Eigen::VectorXd logits = z * m.w;
    logits.array() += m.b;
    const Eigen::VectorXd r = logits.unaryExpr([](double v) { return sigmoid(v); }) - t;
    const Eigen::VectorXd gw = z.transpose() * r / static_cast<double>(n) + kProbeL2 * m.w;
    const double gb = r.mean();
    m.w -= kProbeRate * gw;
    m.b -= kProbeRate * gb;
  }
  return m;
}

}  // namespace

EmbeddingSet embed(const TrainResult& model, const Corpus& corpus) {
  EmbeddingSet e;
  e.vectors.resize(static_cast<Eigen::Index>(corpus.samples.size()), model.model.hidden_dim);
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    e.vectors.row(static_cast<Eigen::Index>(i)) = gap_features(model.model, s.image, s.group).transpose();
    e.groups.push_back(s.group);
    e.ids.push_back(s.id);
  }
  return e;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, kModule, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  double n_neg = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  for (int l : labels) (l == 1 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(ErrorCode::GroupTooSmall, kModule, "AUROC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

ProbeResult linear_probe(const EmbeddingSet& e, int k, std::uint64_t seed) {
  const auto counts = group_counts(e);
  if (k < 2) throw Error(ErrorCode::ConfigError, kModule, "probe needs K >= 2");
  if (e.vectors.rows() < 2 * k) throw Error(ErrorCode::FoldDegenerate, kModule, "probe needs N >= 2K");
  if (counts[0] < 2 || counts[1] < 2) throw Error(ErrorCode::FoldDegenerate, kModule, "probe needs both groups");

  // Stratified assignment as in the audit folds.
  std::vector<int> fold(e.groups.size(), 0);
  Rng rng = make_stream(seed, "separability/probe_folds");
  int next = 0;
  for (int g = 0; g <= 1; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < e.groups.size(); ++i) {
      if (e.groups[i] == g) members.push_back(i);
    }
    shuffle(rng, members);
    for (std::size_t i : members) {
      fold[i] = next;
      next = (next + 1) % k;
    }
  }

  std::vector<double> scores(e.groups.size(), 0.0);
  double acc_sum = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr;
    std::vector<std::size_t> te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
    std::vector<int> y;
    bool seen[2] = {false, false};
    Eigen::MatrixXd x(static_cast<Eigen::Index>(tr.size()), e.vectors.cols());
    for (std::size_t r = 0; r < tr.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = e.vectors.row(static_cast<Eigen::Index>(tr[r]));
      y.push_back(e.groups[tr[r]]);
      seen[e.groups[tr[r]]] = true;
    }
    if (!seen[0] || !seen[1]) throw Error(ErrorCode::FoldDegenerate, kModule, "a probe training fold misses a group");
    const Logistic model = fit_logistic(x, y);
    std::size_t correct = 0;
    for (std::size_t i : te) {
      scores[i] = model.score(e.vectors.row(static_cast<Eigen::Index>(i)));
      const int pred = scores[i] > 0.5 ? 1 : 0;
      if (pred == e.groups[i]) ++correct;
    }
    acc_sum += te.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(te.size());
  }
  ProbeResult out;
  out.accuracy = acc_sum / k;
  out.auroc = auroc(scores, e.groups);
  return out;
}

double silhouette(const EmbeddingSet& e) {
  require_min_group(e, 2);
  const Eigen::Index n = e.vectors.rows();
  const auto counts = group_counts(e);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double same = 0.0;
    double other = 0.0;
    const int gi = e.groups[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (e.vectors.row(i) - e.vectors.row(j)).norm();
      (e.groups[static_cast<std::size_t>(j)] == gi ? same : other) += d;
    }
    const double a = same / static_cast<double>(counts[static_cast<std::size_t>(gi)] - 1);
    const double b = other / static_cast<double>(counts[static_cast<std::size_t>(1 - gi)]);
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

double fisher_statistic(const EmbeddingSet& e) {
  require_min_group(e, 2);
  const Eigen::RowVectorXd mu = e.vectors.colwise().mean();
  double between = 0.0;
  double within = 0.0;
  for (int g = 0; g <= 1; ++g) {
    const Eigen::MatrixXd xs = rows_of(e, g);
    const Eigen::RowVectorXd mg = xs.colwise().mean();
    between += static_cast<double>(xs.rows()) * (mg - mu).squaredNorm();
    within += (xs.rowwise() - mg).squaredNorm();
  }
  if (!(within > 0.0)) return between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return between / within;
}

FisherResult fisher_ratio(const EmbeddingSet& e, int n_perm, std::uint64_t seed) {
  if (n_perm < 1) throw Error(ErrorCode::ConfigError, kModule, "n_perm must be >= 1");
  FisherResult out;
  out.ratio = fisher_statistic(e);
  out.zero_within = std::isinf(out.ratio);
  EmbeddingSet shuffled = e;
  Rng rng = make_stream(seed, "separability/fisher_perm");
  int exceed = 0;
  for (int p = 0; p < n_perm; ++p) {
    shuffle(rng, shuffled.groups);
    if (fisher_statistic(shuffled) >= out.ratio) ++exceed;
  }
  out.p_value = (1.0 + exceed) / (1.0 + n_perm);
  return out;
}

Mmd2Result mmd2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() < 2 || y.rows() < 2) throw Error(ErrorCode::GroupTooSmall, kModule, "MMD needs >= 2 points per side");
  const MmdResult r = mmd2_multiscale(x, y, false);
  return Mmd2Result{r.value, r.sigma0, r.degenerate_bandwidth};
}

Mmd2Result mmd2(const EmbeddingSet& e) {
  group_counts(e);
  return mmd2(rows_of(e, 0), rows_of(e, 1));
}

double centroid_distance(const EmbeddingSet& e) {
  require_min_group(e, 1);
  return (rows_of(e, 1).colwise().mean() - rows_of(e, 0).colwise().mean()).norm();
}

Projection pca_2d(const EmbeddingSet& e) {
  const Eigen::Index n = e.vectors.rows();
  const Eigen::Index d = e.vectors.cols();
  if (n < 3 || d < 2) throw Error(ErrorCode::InvalidArgument, kModule, "PCA needs N >= 3 and d >= 2");
  const Eigen::MatrixXd centered = e.vectors.rowwise() - e.vectors.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double scale = cov.trace();

  Projection out;
  out.coords = Eigen::MatrixXd::Zero(n, 2);
  Rng rng = make_stream(0, "separability/pca_init");
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::VectorXd v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = standard_normal(rng);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
      Eigen::VectorXd next = cov * v;
      const double norm = next.norm();
      if (!(norm > 0.0)) {
        lambda = 0.0;
        break;
      }
      next /= norm;
      const double change = std::min((next - v).norm(), (next + v).norm());
      v = next;
      lambda = v.dot(cov * v);
      if (change < 1e-15) break;
    }
    if (!(scale > 0.0) || lambda <= 1e-12 * scale) {
      out.rank_deficient = true;
      break;
    }
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.coords.col(axis) = centered * v;
    out.variance[axis] = lambda;
    cov -= lambda * v * v.transpose();
  }
  return out;
}

SeparabilityReport analyze(const EmbeddingSet& e, const SeparabilityOptions& o) {
  SeparabilityReport r;
  r.probe = linear_probe(e, o.probe_folds, o.seed);
  r.silhouette = silhouette(e);
  r.fisher = fisher_ratio(e, o.n_perm, o.seed);
  r.mmd = mmd2(e);
  r.centroid_distance = centroid_distance(e);
  r.pca = pca_2d(e);
  return r;
}

}  // namespace segbias
