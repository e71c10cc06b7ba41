#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segbias/config.hpp"
#include "segbias/error.hpp"
#include "segbias/reports.hpp"
#include "segbias/tone_grouping.hpp"

namespace fs = std::filesystem;
using namespace segbias;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

// Options shared by every subcommand: a JSON config file, dotted leaf
// overrides, and a few shorthands.
struct Common {
  std::string config_path;
  std::string out = ".";
  std::map<std::string, std::string> overrides;
  std::optional<double> beta;
  std::optional<std::string> op;
  std::optional<std::string> seeds;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::vector<std::string>& keys) {
  cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--beta", c.beta, "Shorthand for --bias.beta");
  cmd->add_option("--op", c.op, "Shorthand for --bias.op (erosion, dilation, hbd)");
  cmd->add_option("--seeds", c.seeds, "Comma-separated run seeds");
  cmd->add_option("--seed", c.seed, "Seed for single-stage commands");
  auto group = cmd->add_option_group("config keys", "Override any config leaf");
  for (const std::string& key : keys) {
    group->add_option_function<std::string>(
        "--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; }, "");
  }
}

RunConfig resolve(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  for (const auto& [key, value] : c.overrides) apply_override(config, key, value);
  if (c.beta) config.bias.beta = *c.beta;
  if (c.op) config.bias.op = parse_bias_operator(*c.op);
  if (c.seeds) config.seeds = parse_seed_list(*c.seeds);
  if (c.seed) {
    config.gen.seed = *c.seed;
    config.bias.seed = *c.seed;
    config.train.seed = *c.seed;
    config.separability.seed = *c.seed;
  }
  return config;
}

TrainConfig train_config_for(const RunConfig& config, const Corpus& corpus) {
  TrainConfig t = config.train;
  t.biased_group = corpus.biased_group();
  validate(t);
  return t;
}

void log(const std::string& line) { std::cerr << line << '\n'; }

int cmd_synth(const Common& c) {
  RunConfig config = resolve(c);
  validate(config.gen);
  const Corpus corpus = generate(config.gen);
  const fs::path path = write_manifest(corpus, c.out);
  log("wrote " + path.string());
  return 0;
}

int cmd_inject(const Common& c, const std::string& manifest) {
  RunConfig config = resolve(c);
  const Corpus corpus = read_manifest(manifest);
  InjectionResult r = inject(corpus, config.bias);
  const fs::path path = write_manifest(r.corpus, c.out);
  write_injection_record(r.record, fs::path(c.out) / "injection.json");
  log("wrote " + path.string() + " (" + std::to_string(r.record.corrupted_ids.size()) + " corrupted)");
  return 0;
}

int cmd_train(const Common& c, const std::string& manifest) {
  RunConfig config = resolve(c);
  const Corpus corpus = read_manifest(manifest);
  const TrainResult r = train(corpus, train_config_for(config, corpus));
  fs::create_directories(c.out);
  save_train_result(r, fs::path(c.out) / "model.json");
  write_history_csv(r.history, fs::path(c.out) / "history.csv");
  if (r.discovered_clean_group) {
    log("discovered clean group " + std::to_string(*r.discovered_clean_group) +
        (r.low_confidence ? " (low confidence)" : ""));
  }
  log("wrote " + (fs::path(c.out) / "model.json").string());
  return 0;
}

int cmd_audit(const Common& c, const std::string& manifest) {
  RunConfig config = resolve(c);
  if (config.audit_k < 2) throw Error(ErrorCode::ConfigError, "cli", "audit.k must be >= 2");
  const Corpus corpus = read_manifest(manifest);
  const AuditResult a = run_audit(corpus, config.audit_k, train_config_for(config, corpus));
  write_audit(a, corpus, c.out);
  log("wrote " + (fs::path(c.out) / "audit.json").string());
  return 0;
}

int cmd_separability(const Common& c, const std::string& manifest, const std::string& model) {
  RunConfig config = resolve(c);
  const Corpus corpus = read_manifest(manifest);
  const TrainResult r = load_train_result(model);
  const EmbeddingSet e = embed(r, corpus);
  write_separability(analyze(e, config.separability), e, c.out);
  log("wrote " + (fs::path(c.out) / "separability.json").string());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& manifest, const std::string& model,
                 const std::string& reference) {
  RunConfig config = resolve(c);
  const Corpus corpus = read_manifest(manifest);
  const TrainResult r = load_train_result(model);
  const Reference ref = parse_reference(reference);
  ConditionResult cond;
  cond.name = fs::path(model).stem().string();
  const EvalReport report = evaluate(r, corpus, ref);
  if (ref == Reference::Observed) {
    cond.observed.push_back(report);
  } else {
    cond.observed.push_back(evaluate(r, corpus, Reference::Observed));
    cond.clean.push_back(report);
  }
  cond.discovered_clean.push_back(r.discovered_clean_group);
  cond.low_confidence.push_back(r.low_confidence);
  const std::vector<std::uint64_t> seeds{config.train.seed};
  write_eval(std::span<const ConditionResult>(&cond, 1), seeds, c.out);
  log("wrote " + (fs::path(c.out) / "eval.json").string());
  return 0;
}

int cmd_tone(const Common& c, const std::vector<std::string>& images, const std::vector<std::string>& lesions) {
  if (images.size() != lesions.size()) {
    throw Error(ErrorCode::InvalidArgument, "cli", "give one --lesion per --image");
  }
  const RunConfig config = resolve(c);
  fs::create_directories(c.out);
  const fs::path out = fs::path(c.out) / "tone.csv";
  std::ofstream os(out);
  if (!os) throw Error(ErrorCode::IoError, "cli", "cannot write " + out.string());
  os << "id,L,a,b,ITA,group\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const RgbImage img = read_rgb_ppm(images[i]);
    const BinaryMask lesion = read_mask_pgm(lesions[i]);
    const ToneResult t = tone_of(img, lesion, config.gen.seed);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f", t.dominant.L, t.dominant.a, t.dominant.b, t.ita);
    os << fs::path(images[i]).stem().string() << ',' << buf << ',' << to_string(t.group) << '\n';
  }
  log("wrote " + out.string());
  return 0;
}

int cmd_pipeline(const Common& c) {
  RunConfig config = resolve(c);
  validate(config);
  const PipelineResult result = run_pipeline(config);
  write_pipeline_outputs(result, c.out);
  log("wrote " + (fs::path(c.out) / "report.md").string());
  return 0;
}

int cmd_report(const Common& c) {
  render_report(c.out);
  log("wrote " + (fs::path(c.out) / "report.md").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-conditional label bias in segmentation: synthesis, audit, training and reporting"};
  app.require_subcommand(1);
  const std::vector<std::string> keys = run_config_keys();

  Common common;
  std::string manifest;
  std::string model;
  std::string reference = "observed";
  std::vector<std::string> images;
  std::vector<std::string> lesions;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  auto* inj = app.add_subcommand("inject", "Corrupt one group's masks");
  auto* trn = app.add_subcommand("train", "Train the pixel learner");
  auto* aud = app.add_subcommand("audit", "Cross-validated confident-learning audit");
  auto* sep = app.add_subcommand("separability", "Group separability of learned features");
  auto* evl = app.add_subcommand("evaluate", "Dice and IoU per group");
  auto* tone = app.add_subcommand("tone", "Skin-tone group from RGB images");
  auto* pipe = app.add_subcommand("pipeline", "Run every stage end to end");
  auto* rep = app.add_subcommand("report", "Rebuild report.md and report.csv from a pipeline output directory");

  for (CLI::App* cmd : {synth, inj, trn, aud, sep, evl, tone, pipe, rep}) add_common(cmd, common, keys);
  for (CLI::App* cmd : {inj, trn, aud, sep, evl}) {
    cmd->add_option("--manifest", manifest, "Input manifest.json")->required()->check(CLI::ExistingFile);
  }
  for (CLI::App* cmd : {sep, evl}) {
    cmd->add_option("--model", model, "Model checkpoint JSON")->required()->check(CLI::ExistingFile);
  }
  evl->add_option("--reference", reference, "observed or clean");
  tone->add_option("--image", images, "RGB PPM image")->required()->check(CLI::ExistingFile);
  tone->add_option("--lesion", lesions, "Lesion mask PGM")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return 0;
    std::cerr << app.help();
    return kExitValidation;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*inj) return cmd_inject(common, manifest);
    if (*trn) return cmd_train(common, manifest);
    if (*aud) return cmd_audit(common, manifest);
    if (*sep) return cmd_separability(common, manifest, model);
    if (*evl) return cmd_evaluate(common, manifest, model, reference);
    if (*tone) return cmd_tone(common, images, lesions);
    if (*pipe) return cmd_pipeline(common);
    if (*rep) return cmd_report(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
