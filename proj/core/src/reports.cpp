#include "segbias/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "segbias/config.hpp"
#include "segbias/error.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "reports";
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return num(v);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, kModule, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoError, kModule, "write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, path.string() + ": " + e.what());
  }
}

Json joint_json(const JointDistribution& q) {
  Json j;
  if (q.group) j["group"] = *q.group;
  j["counts"] = {{q.counts[0][0], q.counts[0][1]}, {q.counts[1][0], q.counts[1][1]}};
  j["total"] = q.total;
  j["q"] = {{q.q(0, 0), q.q(0, 1)}, {q.q(1, 0), q.q(1, 1)}};
  const ErrorRates r = error_rates(q);
  j["rates"] = {{"omission", r.omission}, {"commission", r.commission}, {"error", r.error}};
  return j;
}

void joint_csv(std::ostream& os, const std::string& scope, const JointDistribution& q) {
  const char* names[2][2] = {{"bg_bg", "bg_fg"}, {"fg_bg", "fg_fg"}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) os << scope << ",count_" << names[a][b] << ',' << q.counts[a][b] << '\n';
  }
  os << scope << ",total," << q.total << '\n';
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) os << scope << ",q_" << names[a][b] << ',' << num(q.q(a, b)) << '\n';
  }
  const ErrorRates r = error_rates(q);
  os << scope << ",omission_rate," << num(r.omission) << '\n';
  os << scope << ",commission_rate," << num(r.commission) << '\n';
  os << scope << ",error_rate," << num(r.error) << '\n';
}

Json indicators_json(const BiasIndicators& b) {
  Json j;
  j["chi2"] = b.chi_defined ? Json(b.chi.chi2) : Json(nullptr);
  j["df"] = b.chi.df;
  j["p_value"] = b.chi_defined ? Json(b.chi.p_value) : Json(nullptr);
  j["significant_at_0.05"] = b.significant;
  j["rr_om"] = b.rr.rr_om;
  j["rr_co"] = b.rr.rr_co;
  j["rr_epsilon"] = b.rr_epsilon;
  j["s_om"] = opt(b.symmetry.s_om);
  j["s_co"] = opt(b.symmetry.s_co);
  j["s"] = opt(b.symmetry.s);
  return j;
}

Json mean_std_json(const MeanStd& m) { return Json{{"mean", m.mean}, {"std", m.std}}; }

MeanStd gap_stats(std::span<const EvalReport> runs, bool use_dice) {
  std::vector<double> gaps;
  for (const EvalReport& r : runs) gaps.push_back(use_dice ? r.delta_dice() : r.delta_iou());
  return mean_std(gaps);
}

Json reference_json(std::span<const EvalReport> runs, std::span<const std::uint64_t> seeds) {
  const EvalReport agg = aggregate(runs);
  Json j;
  j["n_seeds"] = agg.n_seeds;
  j["clean_group"] = agg.clean_group;
  Json groups = Json::array();
  for (int g = 0; g <= 1; ++g) {
    groups.push_back(Json{{"group", g}, {"dice", mean_std_json(agg.dice[g])}, {"iou", mean_std_json(agg.iou[g])}});
  }
  j["groups"] = groups;
  j["delta_dice"] = mean_std_json(gap_stats(runs, true));
  j["delta_iou"] = mean_std_json(gap_stats(runs, false));
  Json per_seed = Json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    Json row;
    if (i < seeds.size()) row["seed"] = seeds[i];
    row["dice"] = {runs[i].dice[0].mean, runs[i].dice[1].mean};
    row["iou"] = {runs[i].iou[0].mean, runs[i].iou[1].mean};
    row["delta_dice"] = runs[i].delta_dice();
    row["delta_iou"] = runs[i].delta_iou();
    per_seed.push_back(row);
  }
  j["per_seed"] = per_seed;
  return j;
}

void eval_csv_rows(std::ostream& os, const std::string& name, const std::string& suffix,
                   std::span<const EvalReport> runs) {
  const EvalReport agg = aggregate(runs);
  for (int g = 0; g <= 1; ++g) {
    os << name << ',' << g << ",dice_" << suffix << ',' << num(agg.dice[g].mean) << ',' << num(agg.dice[g].std) << ','
       << agg.n_seeds << '\n';
    os << name << ',' << g << ",iou_" << suffix << ',' << num(agg.iou[g].mean) << ',' << num(agg.iou[g].std) << ','
       << agg.n_seeds << '\n';
  }
  const MeanStd dd = gap_stats(runs, true);
  const MeanStd di = gap_stats(runs, false);
  os << name << ",gap,dice_" << suffix << ',' << num(dd.mean) << ',' << num(dd.std) << ',' << agg.n_seeds << '\n';
  os << name << ",gap,iou_" << suffix << ',' << num(di.mean) << ',' << num(di.std) << ',' << agg.n_seeds << '\n';
}

std::string condition_file_stem(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (c == '+') c = '_';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Report rendering from the JSON artifacts.

std::string pct(const Json& v) { return v.is_number() ? fixed(100.0 * v.get<double>(), 2) : "n/a"; }
std::string val(const Json& v, int digits) { return v.is_number() ? fixed(v.get<double>(), digits) : "n/a"; }

std::string pm(const Json& ms) {
  return fixed(ms.at("mean").get<double>(), 2) + " ± " + fixed(ms.at("std").get<double>(), 2);
}

std::string p_text(const Json& v) {
  if (!v.is_number()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v.get<double>());
  return buf;
}

}  // namespace

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

void write_audit(const AuditResult& audit, const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "error_masks");
  Json j;
  j["k"] = audit.oof.plan.k;
  j["clean_group"] = audit.clean_group;
  j["biased_group"] = 1 - audit.clean_group;
  j["thresholds"] = {{"t_bg", audit.thresholds.t_bg}, {"t_fg", audit.thresholds.t_fg}};
  j["global"] = joint_json(audit.global);
  j["groups"] = {joint_json(audit.per_group[0]), joint_json(audit.per_group[1])};
  j["bias_indicators"] = indicators_json(audit.indicators);
  Json folds = Json::array();
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    folds.push_back(Json{{"id", corpus.samples[i].id}, {"fold", audit.oof.predicted_by_fold[i]}});
  }
  j["folds"] = folds;
  write_json(dir / "audit.json", j);

  std::ostringstream csv;
  csv << "scope,quantity,value\n";
  csv << "thresholds,t_bg," << num(audit.thresholds.t_bg) << '\n';
  csv << "thresholds,t_fg," << num(audit.thresholds.t_fg) << '\n';
  joint_csv(csv, "global", audit.global);
  for (int g = 0; g <= 1; ++g) joint_csv(csv, "group_" + std::to_string(g), audit.per_group[g]);
  const BiasIndicators& b = audit.indicators;
  auto opt_num = [](const std::optional<double>& v) { return v ? num(*v) : std::string("nan"); };
  csv << "bias_indicators,chi2," << (b.chi_defined ? num(b.chi.chi2) : "nan") << '\n';
  csv << "bias_indicators,df," << b.chi.df << '\n';
  csv << "bias_indicators,p_value," << (b.chi_defined ? num(b.chi.p_value) : "nan") << '\n';
  csv << "bias_indicators,significant_at_0.05," << (b.significant ? "true" : "false") << '\n';
  csv << "bias_indicators,rr_om," << num(b.rr.rr_om) << '\n';
  csv << "bias_indicators,rr_co," << num(b.rr.rr_co) << '\n';
  csv << "bias_indicators,rr_epsilon," << num(b.rr_epsilon) << '\n';
  csv << "bias_indicators,s_om," << opt_num(b.symmetry.s_om) << '\n';
  csv << "bias_indicators,s_co," << opt_num(b.symmetry.s_co) << '\n';
  csv << "bias_indicators,s," << opt_num(b.symmetry.s) << '\n';
  write_text(dir / "audit.csv", csv.str());

  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    BinaryMask err(s.mask_obs.width, s.mask_obs.height);
    for (std::size_t p = 0; p < err.data.size(); ++p) err.data[p] = audit.confident[i].data[p] != s.mask_obs.data[p];
    write_mask_pgm(dir / "error_masks" / (s.id + ".pgm"), err);
  }
}

void write_separability(const SeparabilityReport& r, const EmbeddingSet& e, const fs::path& dir) {
  fs::create_directories(dir);
  Json j;
  j["n"] = e.size();
  j["dim"] = e.vectors.cols();
  j["linear_probe"] = {{"accuracy", r.probe.accuracy}, {"auroc", r.probe.auroc}};
  j["silhouette"] = r.silhouette;
  j["fisher_ratio"] = {{"ratio", finite_or_null(r.fisher.ratio)},
                       {"p_value", r.fisher.p_value},
                       {"zero_within", r.fisher.zero_within}};
  j["mmd2"] = {{"value", r.mmd.value}, {"sigma0", r.mmd.sigma0}, {"degenerate_bandwidth", r.mmd.degenerate_bandwidth}};
  j["centroid_distance"] = r.centroid_distance;
  j["pca"] = {{"variance", {r.pca.variance[0], r.pca.variance[1]}}, {"rank_deficient", r.pca.rank_deficient}};
  write_json(dir / "separability.json", j);

  std::ostringstream csv;
  csv << "id,group,pc1,pc2\n";
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const std::string id = static_cast<std::size_t>(i) < e.ids.size() ? e.ids[static_cast<std::size_t>(i)] : std::to_string(i);
    csv << id << ',' << e.groups[static_cast<std::size_t>(i)] << ',' << num(r.pca.coords(i, 0)) << ','
        << num(r.pca.coords(i, 1)) << '\n';
  }
  write_text(dir / "pca_projection.csv", csv.str());
}

void write_eval(std::span<const ConditionResult> conditions, std::span<const std::uint64_t> seeds,
                const fs::path& dir) {
  fs::create_directories(dir);
  Json j;
  j["seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.end());
  Json conds = Json::array();
  std::ostringstream csv;
  csv << "condition,group,metric,mean,std,n_seeds\n";
  for (const ConditionResult& c : conditions) {
    Json cj;
    cj["name"] = c.name;
    cj["observed"] = reference_json(c.observed, seeds);
    if (!c.clean.empty()) cj["clean"] = reference_json(c.clean, seeds);
    Json discovered = Json::array();
    for (const auto& d : c.discovered_clean) discovered.push_back(d ? Json(*d) : Json(nullptr));
    cj["discovered_clean_group"] = discovered;
    cj["low_confidence"] = c.low_confidence;
    conds.push_back(cj);
    eval_csv_rows(csv, c.name, "observed", c.observed);
    if (!c.clean.empty()) eval_csv_rows(csv, c.name, "clean", c.clean);
  }
  j["conditions"] = conds;
  write_json(dir / "eval.json", j);
  write_text(dir / "eval.csv", csv.str());
}

void write_pipeline_outputs(const PipelineResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "config.json", run_config_to_json(result.config));
  write_eval(result.conditions, result.config.seeds, out_dir);

  for (std::size_t si = 0; si < result.seeds.size(); ++si) {
    const SeedArtifacts& a = result.seeds[si];
    const fs::path dir = out_dir / seed_dir_name(a.seed);
    fs::create_directories(dir);
    write_manifest(a.train_corpus, dir / "corpus");
    write_injection_record(a.injection, dir / "corpus" / "injection.json");
    write_manifest(a.test_corpus, dir / "test_corpus");
    if (a.audit) write_audit(*a.audit, a.train_corpus, dir / "audit");
    if (a.separability) write_separability(*a.separability, a.embeddings, dir / "separability");
    fs::create_directories(dir / "models");
    for (const ConditionResult& c : result.conditions) {
      if (si >= c.models.size()) continue;
      const std::string stem = condition_file_stem(c.name);
      save_train_result(c.models[si], dir / "models" / (stem + ".json"));
      write_history_csv(c.models[si].history, dir / "models" / (stem + "_history.csv"));
    }
  }
  render_report(out_dir);
}

void render_report(const fs::path& out_dir) {
  const RunConfig config = load_run_config(out_dir / "config.json");
  const Json eval = read_json(out_dir / "eval.json");

  std::ostringstream md;
  std::ostringstream csv;
  csv << "part,row,column,value\n";

  md << "# Segmentation label-bias report\n\n";
  md << "Bias: operator " << to_string(config.bias.op) << ", beta " << fixed(config.bias.beta, 2) << ", r_d "
     << config.bias.radius << ", target group " << config.bias.target_group << ". Corpus: " << config.gen.n_samples
     << " samples, " << config.gen.width << "x" << config.gen.height << ", group cue " << num(config.gen.group_cue_shift)
     << ".\n\n";

  md << "## Part I: bias detection\n\n";
  if (!config.run_audit) {
    md << "Audit disabled.\n\n";
  } else {
    md << "| seed | ErrR g_c (%) | ErrR g_b (%) | OmR g_c / g_b (%) | CoR g_c / g_b (%) | RR_Om | RR_Co | S | chi2 | p | "
          "significant_at_0.05 |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (std::uint64_t seed : config.seeds) {
      const fs::path path = out_dir / seed_dir_name(seed) / "audit" / "audit.json";
      if (!fs::exists(path)) continue;
      const Json a = read_json(path);
      const int gc = a.at("clean_group").get<int>();
      const int gb = a.at("biased_group").get<int>();
      const Json& rc = a.at("groups").at(gc).at("rates");
      const Json& rb = a.at("groups").at(gb).at("rates");
      const Json& bi = a.at("bias_indicators");
      const std::string row = std::to_string(seed);
      md << "| " << row << " | " << pct(rc.at("error")) << " | " << pct(rb.at("error")) << " | "
         << pct(rc.at("omission")) << " / " << pct(rb.at("omission")) << " | " << pct(rc.at("commission")) << " / "
         << pct(rb.at("commission")) << " | " << val(bi.at("rr_om"), 2) << " | " << val(bi.at("rr_co"), 2) << " | "
         << val(bi.at("s"), 2) << " | " << val(bi.at("chi2"), 1) << " | " << p_text(bi.at("p_value")) << " | "
         << (bi.at("significant_at_0.05").get<bool>() ? "true" : "false") << " |\n";
      auto put = [&](const std::string& col, const Json& v) {
        csv << "detection," << row << ',' << col << ',' << (v.is_number() ? num(v.get<double>()) : "nan") << '\n';
      };
      put("errr_clean", rc.at("error"));
      put("errr_biased", rb.at("error"));
      put("omr_clean", rc.at("omission"));
      put("omr_biased", rb.at("omission"));
      put("cor_clean", rc.at("commission"));
      put("cor_biased", rb.at("commission"));
      put("rr_om", bi.at("rr_om"));
      put("rr_co", bi.at("rr_co"));
      put("s", bi.at("s"));
      put("chi2", bi.at("chi2"));
      put("p_value", bi.at("p_value"));
      csv << "detection," << row << ",significant_at_0.05,"
          << (bi.at("significant_at_0.05").get<bool>() ? "true" : "false") << '\n';
    }
    md << '\n';
  }

  md << "## Part II: segmentation by condition\n\n";
  md << "Dice in percent, mean ± std over " << eval.at("seeds").size()
     << " seed(s). Gap = Dice(g_c) - Dice(g_b).\n\n";
  md << "| condition | obs Dice g_c | obs Dice g_b | obs gap | clean Dice g_c | clean Dice g_b | clean gap |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const Json& c : eval.at("conditions")) {
    const std::string name = c.at("name").get<std::string>();
    const int gc = c.at("observed").at("clean_group").get<int>();
    const int gb = 1 - gc;
    md << "| " << name;
    for (const char* ref : {"observed", "clean"}) {
      if (!c.contains(ref)) {
        md << " | n/a | n/a | n/a";
        continue;
      }
      const Json& r = c.at(ref);
      const Json& dc = r.at("groups").at(gc).at("dice");
      const Json& db = r.at("groups").at(gb).at("dice");
      md << " | " << pm(dc) << " | " << pm(db) << " | " << pm(r.at("delta_dice"));
      const std::string tag = std::string(ref) == "observed" ? "obs" : "clean";
      csv << "segmentation," << name << ",dice_clean_group_" << tag << ',' << num(dc.at("mean").get<double>()) << '\n';
      csv << "segmentation," << name << ",dice_biased_group_" << tag << ',' << num(db.at("mean").get<double>()) << '\n';
      csv << "segmentation," << name << ",gap_" << tag << ',' << num(r.at("delta_dice").at("mean").get<double>()) << '\n';
      csv << "segmentation," << name << ",gap_" << tag << "_std," << num(r.at("delta_dice").at("std").get<double>())
          << '\n';
    }
    md << " |\n";
    const Json& disc = c.at("discovered_clean_group");
    bool any = false;
    for (const Json& d : disc) any = any || !d.is_null();
    if (any) {
      std::string list;
      for (const Json& d : disc) list += (list.empty() ? "" : " ") + (d.is_null() ? std::string("-") : std::to_string(d.get<int>()));
      csv << "segmentation," << name << ",discovered_clean_group," << list << '\n';
    }
  }
  md << '\n';

  bool printed_header = false;
  for (const Json& c : eval.at("conditions")) {
    const Json& disc = c.at("discovered_clean_group");
    for (std::size_t i = 0; i < disc.size(); ++i) {
      if (disc[i].is_null()) continue;
      if (!printed_header) {
        md << "Discovered clean group (auto mode):\n\n";
        printed_header = true;
      }
      const bool low = c.at("low_confidence").at(i).get<bool>();
      md << "- " << c.at("name").get<std::string>() << ", seed " << eval.at("seeds").at(i).get<std::uint64_t>()
         << ": group " << disc[i].get<int>() << (low ? " (low confidence)" : "") << '\n';
    }
  }
  if (printed_header) md << '\n';

  write_text(out_dir / "report.md", md.str());
  write_text(out_dir / "report.csv", csv.str());
}

}  // namespace segbias
