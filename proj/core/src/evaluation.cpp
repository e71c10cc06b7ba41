#include "segbias/evaluation.hpp"

#include <cmath>

#include "segbias/error.hpp"
#include "segbias/parallel.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "evaluation";

struct Overlap {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t both = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, kModule, "masks differ in size");
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.a += a.data[i];
    o.b += b.data[i];
    o.both += a.data[i] & b.data[i];
  }
  return o;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  const std::int64_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

std::string to_string(Reference r) { return r == Reference::Observed ? "observed" : "clean"; }

Reference parse_reference(const std::string& name) {
  if (name == "observed") return Reference::Observed;
  if (name == "clean") return Reference::Clean;
  throw Error(ErrorCode::ConfigError, kModule, "unknown reference '" + name + "'");
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

EvalReport evaluate_masks(const Corpus& corpus, std::span<const BinaryMask> predicted, Reference reference) {
  if (predicted.size() != corpus.samples.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one prediction per sample is required");
  }
  std::array<GroupScores, 2> scores;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Sample& s = corpus.samples[i];
    if (s.group != 0 && s.group != 1) throw Error(ErrorCode::UnknownGroup, kModule, "group must be 0 or 1", s.id);
    const BinaryMask* ref = &s.mask_obs;
    if (reference == Reference::Clean) {
      if (s.has_clean()) {
        ref = &s.clean();
      } else if (s.corrupted) {
        throw Error(ErrorCode::MissingCleanMask, kModule, "corrupted sample has no clean mask", s.id);
      }
    }
    if (!predicted[i].same_shape(*ref)) {
      throw Error(ErrorCode::ShapeMismatch, kModule, "prediction size differs from reference", s.id);
    }
    scores[s.group].dice.push_back(100.0 * dice(predicted[i], *ref));
    scores[s.group].iou.push_back(100.0 * iou(predicted[i], *ref));
  }
  EvalReport r;
  r.reference = reference;
  r.clean_group = corpus.clean_group;
  for (int g = 0; g <= 1; ++g) {
    r.dice[g] = mean_std(scores[g].dice);
    r.iou[g] = mean_std(scores[g].iou);
  }
  return r;
}

std::vector<BinaryMask> predict_masks(const TrainResult& model, const Corpus& corpus) {
  std::vector<BinaryMask> out(corpus.samples.size());
  parallel_for(corpus.samples.size(), [&](std::size_t i) { out[i] = infer(model, corpus.samples[i]).binarize(0.5); });
  return out;
}

EvalReport evaluate(const TrainResult& model, const Corpus& corpus, Reference reference) {
  const std::vector<BinaryMask> masks = predict_masks(model, corpus);
  return evaluate_masks(corpus, masks, reference);
}

EvalReport aggregate(std::span<const EvalReport> runs) {
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "nothing to aggregate");
  EvalReport out;
  out.reference = runs.front().reference;
  out.clean_group = runs.front().clean_group;
  out.n_seeds = runs.size();
  for (int g = 0; g <= 1; ++g) {
    std::vector<double> d;
    std::vector<double> u;
    for (const EvalReport& r : runs) {
      d.push_back(r.dice[g].mean);
      u.push_back(r.iou[g].mean);
    }
    out.dice[g] = mean_std(d);
    out.iou[g] = mean_std(u);
  }
  return out;
}

}  // namespace segbias
