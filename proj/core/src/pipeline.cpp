#include "segbias/pipeline.hpp"

#include "segbias/error.hpp"

namespace segbias {

namespace {
constexpr const char* kModule = "pipeline";
}

AuditResult run_audit(const Corpus& corpus, int k, const TrainConfig& config) {
  AuditResult r;
  r.clean_group = corpus.clean_group;
  r.oof = crossval_probs(corpus, k, config);
  r.thresholds = class_thresholds(r.oof.probs, corpus);
  r.confident.reserve(corpus.samples.size());
  for (const ProbMap& p : r.oof.probs) r.confident.push_back(confident_labels(p, r.thresholds));
  r.global = joint_distribution(corpus, r.confident);
  for (int g = 0; g <= 1; ++g) {
    r.per_group[g] = joint_distribution(corpus, r.confident, g);
    r.rates[g] = error_rates(r.per_group[g]);
  }
  r.indicators = bias_indicators(r.per_group[corpus.clean_group], r.per_group[corpus.biased_group()]);
  return r;
}

void validate(const RunConfig& c) {
  validate(c.gen);
  validate(c.train);
  if (c.seeds.empty()) throw Error(ErrorCode::ConfigError, kModule, "at least one seed is required");
  if (c.audit_k < 2) throw Error(ErrorCode::ConfigError, kModule, "audit.k must be >= 2");
  if (!(c.bias.beta >= 0.0 && c.bias.beta <= 1.0)) throw Error(ErrorCode::ConfigError, kModule, "beta must lie in [0, 1]");
  if (c.bias.radius < 0) throw Error(ErrorCode::ConfigError, kModule, "r_d must be >= 0");
  if (c.bias.harmonics < 1) throw Error(ErrorCode::ConfigError, kModule, "harmonics must be >= 1");
  if (c.bias.target_group != 0 && c.bias.target_group != 1) {
    throw Error(ErrorCode::ConfigError, kModule, "bias target group must be 0 or 1");
  }
  if (!(c.penalty_weight >= 0.0)) throw Error(ErrorCode::ConfigError, kModule, "penalty weight must be >= 0");
  if (c.test_samples < 2) throw Error(ErrorCode::ConfigError, kModule, "test corpus needs >= 2 samples");
  if (c.separability.n_perm < 1) throw Error(ErrorCode::ConfigError, kModule, "n_perm must be >= 1");
  if (c.separability.probe_folds < 2) throw Error(ErrorCode::ConfigError, kModule, "probe folds must be >= 2");
}

RunConfig seeded(const RunConfig& config, std::uint64_t seed) {
  RunConfig c = config;
  c.gen.seed = make_stream(seed, "run/gen")();
  c.bias.seed = make_stream(seed, "run/bias")();
  c.train.seed = make_stream(seed, "run/train")();
  c.separability.seed = make_stream(seed, "run/separability")();
  c.seeds = {seed};
  return c;
}

SeedArtifacts prepare_seed(const RunConfig& config, std::uint64_t seed) {
  const RunConfig c = seeded(config, seed);
  SeedArtifacts a;
  a.seed = seed;
  InjectionResult train_inj = inject(generate(c.gen), c.bias);
  a.train_corpus = std::move(train_inj.corpus);
  a.injection = std::move(train_inj.record);

  GenConfig test_gen = c.gen;
  test_gen.n_samples = c.test_samples;
  test_gen.id_prefix = "t";
  test_gen.seed = make_stream(seed, "run/gen/test")();
  BiasSpec test_bias = c.bias;
  test_bias.seed = make_stream(seed, "run/bias/test")();
  a.test_corpus = inject(generate(test_gen), test_bias).corpus;
  return a;
}

namespace {

TrainConfig condition_config(const RunConfig& c, Mitigation mode, PenaltyKind penalty) {
  TrainConfig t = c.train;
  t.mitigation = mode;
  t.penalty = penalty;
  t.penalty_weight = penalty == PenaltyKind::None ? 0.0 : c.penalty_weight;
  t.biased_group = c.bias.target_group;
  return t;
}

std::string condition_name(Mitigation mode, PenaltyKind penalty) {
  if (penalty != PenaltyKind::None) return "penalty_" + to_string(penalty);
  return to_string(mode);
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
  validate(config);
  PipelineResult result;
  result.config = config;

  struct Condition {
    Mitigation mode;
    PenaltyKind penalty;
  };
  std::vector<Condition> conditions;
  for (Mitigation m : config.modes) conditions.push_back({m, PenaltyKind::None});
  for (PenaltyKind p : config.penalties) {
    if (p != PenaltyKind::None) conditions.push_back({Mitigation::None, p});
  }
  for (const Condition& cond : conditions) {
    ConditionResult cr;
    cr.name = condition_name(cond.mode, cond.penalty);
    result.conditions.push_back(std::move(cr));
  }

  for (std::uint64_t seed : config.seeds) {
    const RunConfig c = seeded(config, seed);
    SeedArtifacts a = prepare_seed(config, seed);
    if (config.run_audit) a.audit = run_audit(a.train_corpus, config.audit_k, c.train);

    std::optional<TrainResult> baseline;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      TrainResult model = train(a.train_corpus, condition_config(c, conditions[i].mode, conditions[i].penalty));
      ConditionResult& cr = result.conditions[i];
      cr.observed.push_back(evaluate(model, a.test_corpus, Reference::Observed));
      cr.clean.push_back(evaluate(model, a.test_corpus, Reference::Clean));
      cr.discovered_clean.push_back(model.discovered_clean_group);
      cr.low_confidence.push_back(model.low_confidence);
      if (conditions[i].mode == Mitigation::None && conditions[i].penalty == PenaltyKind::None) baseline = model;
      cr.models.push_back(std::move(model));
    }
    if (config.run_separability) {
      if (!baseline) baseline = train(a.train_corpus, condition_config(c, Mitigation::None, PenaltyKind::None));
      a.embeddings = embed(*baseline, a.train_corpus);
      a.separability = analyze(a.embeddings, c.separability);
    }
    result.seeds.push_back(std::move(a));
  }
  return result;
}

}  // namespace segbias
