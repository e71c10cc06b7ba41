#include "segbias/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "segbias/error.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "config";
using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ConfigError, kModule, what); }

Json encode(const RunConfig& c) {
  Json j;
  j["seeds"] = c.seeds;

  Json& g = j["gen"];
  g["n_samples"] = c.gen.n_samples;
  g["width"] = c.gen.width;
  g["height"] = c.gen.height;
  g["shape"] = to_string(c.gen.shape);
  g["contrast"] = c.gen.contrast;
  g["noise_sigma"] = c.gen.noise_sigma;
  g["edge_blur"] = c.gen.edge_blur;
  g["group_cue_shift"] = c.gen.group_cue_shift;
  g["group_balance"] = c.gen.group_balance;
  g["clean_group"] = c.gen.clean_group;
  g["id_prefix"] = c.gen.id_prefix;
  g["seed"] = c.gen.seed;

  Json& b = j["bias"];
  b["target_group"] = c.bias.target_group;
  b["beta"] = c.bias.beta;
  b["op"] = to_string(c.bias.op);
  b["r_d"] = c.bias.radius;
  b["harmonics"] = c.bias.harmonics;
  b["seed"] = c.bias.seed;

  Json& t = j["train"];
  t["epochs"] = c.train.epochs;
  t["warmup_epochs"] = c.train.warmup_epochs;
  t["learning_rate"] = c.train.learning_rate;
  t["batch"] = c.train.batch;
  t["boundary_width"] = c.train.boundary_width;
  t["mitigation"] = to_string(c.train.mitigation);
  t["penalty"] = to_string(c.train.penalty);
  t["penalty_weight"] = c.train.penalty_weight;
  t["penalty_ramp"] = c.train.penalty_ramp;
  t["dice_weight"] = c.train.dice_weight;
  t["hidden_dim"] = c.train.hidden_dim;
  t["patch_radius"] = c.train.patch_radius;
  t["seed"] = c.train.seed;

  Json& a = j["audit"];
  a["enabled"] = c.run_audit;
  a["k"] = c.audit_k;

  Json& s = j["separability"];
  s["enabled"] = c.run_separability;
  s["probe_folds"] = c.separability.probe_folds;
  s["n_perm"] = c.separability.n_perm;
  s["seed"] = c.separability.seed;

  Json& p = j["pipeline"];
  std::vector<std::string> modes;
  for (Mitigation m : c.modes) modes.push_back(to_string(m));
  p["modes"] = modes;
  std::vector<std::string> penalties;
  for (PenaltyKind k : c.penalties) penalties.push_back(to_string(k));
  p["penalties"] = penalties;
  p["penalty_weight"] = c.penalty_weight;
  p["test_samples"] = c.test_samples;
  return j;
}

template <class T>
T get(const Json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(std::string("bad value for ") + section + "." + key);
  }
}

RunConfig decode(const Json& j) {
  RunConfig c;
  try {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception&) {
    fail("seeds must be a list of non-negative integers");
  }

  c.gen.n_samples = get<int>(j, "gen", "n_samples");
  c.gen.width = get<int>(j, "gen", "width");
  c.gen.height = get<int>(j, "gen", "height");
  c.gen.shape = parse_shape_family(get<std::string>(j, "gen", "shape"));
  c.gen.contrast = get<double>(j, "gen", "contrast");
  c.gen.noise_sigma = get<double>(j, "gen", "noise_sigma");
  c.gen.edge_blur = get<double>(j, "gen", "edge_blur");
  c.gen.group_cue_shift = get<double>(j, "gen", "group_cue_shift");
  c.gen.group_balance = get<double>(j, "gen", "group_balance");
  c.gen.clean_group = get<int>(j, "gen", "clean_group");
  c.gen.id_prefix = get<std::string>(j, "gen", "id_prefix");
  c.gen.seed = get<std::uint64_t>(j, "gen", "seed");

  c.bias.target_group = get<int>(j, "bias", "target_group");
  c.bias.beta = get<double>(j, "bias", "beta");
  c.bias.op = parse_bias_operator(get<std::string>(j, "bias", "op"));
  c.bias.radius = get<int>(j, "bias", "r_d");
  c.bias.harmonics = get<int>(j, "bias", "harmonics");
  c.bias.seed = get<std::uint64_t>(j, "bias", "seed");

  c.train.epochs = get<int>(j, "train", "epochs");
  c.train.warmup_epochs = get<int>(j, "train", "warmup_epochs");
  c.train.learning_rate = get<double>(j, "train", "learning_rate");
  c.train.batch = get<int>(j, "train", "batch");
  c.train.boundary_width = get<int>(j, "train", "boundary_width");
  c.train.mitigation = parse_mitigation(get<std::string>(j, "train", "mitigation"));
  c.train.penalty = parse_penalty(get<std::string>(j, "train", "penalty"));
  c.train.penalty_weight = get<double>(j, "train", "penalty_weight");
  c.train.penalty_ramp = get<bool>(j, "train", "penalty_ramp");
  c.train.dice_weight = get<double>(j, "train", "dice_weight");
  c.train.hidden_dim = get<int>(j, "train", "hidden_dim");
  c.train.patch_radius = get<int>(j, "train", "patch_radius");
  c.train.seed = get<std::uint64_t>(j, "train", "seed");

  c.run_audit = get<bool>(j, "audit", "enabled");
  c.audit_k = get<int>(j, "audit", "k");

  c.run_separability = get<bool>(j, "separability", "enabled");
  c.separability.probe_folds = get<int>(j, "separability", "probe_folds");
  c.separability.n_perm = get<int>(j, "separability", "n_perm");
  c.separability.seed = get<std::uint64_t>(j, "separability", "seed");

  c.modes.clear();
  for (const std::string& m : get<std::vector<std::string>>(j, "pipeline", "modes")) c.modes.push_back(parse_mitigation(m));
  c.penalties.clear();
  for (const std::string& p : get<std::vector<std::string>>(j, "pipeline", "penalties")) {
    c.penalties.push_back(parse_penalty(p));
  }
  c.penalty_weight = get<double>(j, "pipeline", "penalty_weight");
  c.test_samples = get<int>(j, "pipeline", "test_samples");
  return c;
}

bool compatible(const Json& target, const Json& value) {
  if (target.is_boolean()) return value.is_boolean();
  if (target.is_number_float()) return value.is_number();
  if (target.is_number()) return value.is_number_integer();
  if (target.is_string()) return value.is_string();
  if (target.is_array()) return value.is_array();
  return false;
}

void merge(Json& base, const Json& doc, const std::string& prefix) {
  if (!doc.is_object()) fail(prefix.empty() ? "config must be a JSON object" : prefix + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) fail("unknown config key '" + path + "'");
    Json& target = base[key];
    if (target.is_object()) {
      merge(target, value, path);
    } else {
      if (!compatible(target, value)) fail("wrong type for '" + path + "'");
      target = value;
    }
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail("cannot parse '" + text + "' for " + key);
  return v;
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) { return encode(config).dump(2) + "\n"; }

RunConfig run_config_from_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, e.what());
  }
  Json base = encode(RunConfig{});
  merge(base, doc, "");
  return decode(base);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  const Json j = encode(RunConfig{});
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) {
      keys.push_back(section);
      continue;
    }
    for (const auto& [key, value] : body.items()) keys.push_back(section + "." + key);
  }
  return keys;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  Json j = encode(config);
  const auto dot = key.find('.');
  Json* node = nullptr;
  if (dot == std::string::npos) {
    if (!j.contains(key) || j[key].is_object()) fail("unknown config key '" + key + "'");
    node = &j[key];
  } else {
    const std::string section = key.substr(0, dot);
    const std::string leaf = key.substr(dot + 1);
    if (!j.contains(section) || !j[section].is_object() || !j[section].contains(leaf)) {
      fail("unknown config key '" + key + "'");
    }
    node = &j[section][leaf];
  }

  if (node->is_boolean()) {
    if (value == "true" || value == "1") {
      *node = true;
    } else if (value == "false" || value == "0") {
      *node = false;
    } else {
      fail("expected true or false for " + key);
    }
  } else if (node->is_number_float()) {
    *node = parse_number<double>(key, value);
  } else if (node->is_number_unsigned()) {
    *node = parse_number<std::uint64_t>(key, value);
  } else if (node->is_number_integer()) {
    *node = parse_number<long long>(key, value);
  } else if (node->is_string()) {
    *node = value;
  } else if (node->is_array()) {
    if (key == "seeds") {
      *node = parse_seed_list(value);
    } else {
      *node = split_list(value);
    }
  }
  config = decode(j);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& item : split_list(text)) seeds.push_back(parse_number<std::uint64_t>("seeds", item));
  if (seeds.empty()) fail("at least one seed is required");
  return seeds;
}

}  // namespace segbias
