#include "segbias/bias_injection.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "segbias/error.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "bias_injection";

}  // namespace

std::string to_string(BiasOperator op) {
  switch (op) {
    case BiasOperator::Erosion: return "erosion";
    case BiasOperator::Dilation: return "dilation";
    case BiasOperator::Hbd: return "hbd";
  }
  return "unknown";
}

BiasOperator parse_bias_operator(const std::string& name) {
  if (name == "erosion") return BiasOperator::Erosion;
  if (name == "dilation") return BiasOperator::Dilation;
  if (name == "hbd") return BiasOperator::Hbd;
  throw Error(ErrorCode::ConfigError, kModule, "unknown bias operator '" + name + "'");
}

bool InjectionRecord::operator==(const InjectionRecord& o) const {
  auto same_skips = [&] {
    if (skipped.size() != o.skipped.size()) return false;
    for (std::size_t i = 0; i < skipped.size(); ++i) {
      if (skipped[i].id != o.skipped[i].id || skipped[i].reason != o.skipped[i].reason) return false;
    }
    return true;
  };
  return spec.target_group == o.spec.target_group && spec.beta == o.spec.beta && spec.op == o.spec.op &&
         spec.radius == o.spec.radius && spec.harmonics == o.spec.harmonics && spec.seed == o.spec.seed &&
         corrupted_ids == o.corrupted_ids && same_skips();
}

BinaryMask apply_bias_operator(const BinaryMask& mask, const BiasSpec& spec, Rng& rng) {
  switch (spec.op) {
    case BiasOperator::Erosion: return erode(mask, spec.radius);
    case BiasOperator::Dilation: return dilate(mask, spec.radius);
    case BiasOperator::Hbd: return harmonic_deform(mask, static_cast<double>(spec.radius), spec.harmonics, rng);
  }
  throw Error(ErrorCode::InvalidArgument, kModule, "unknown operator");
}

InjectionResult inject(const Corpus& corpus, const BiasSpec& spec) {
  if (!(spec.beta >= 0.0 && spec.beta <= 1.0)) throw Error(ErrorCode::ConfigError, kModule, "beta must be in [0, 1]");
  if (spec.radius < 0) throw Error(ErrorCode::ConfigError, kModule, "radius must be >= 0");
  if (spec.op == BiasOperator::Hbd && spec.harmonics < 1) {
    throw Error(ErrorCode::ConfigError, kModule, "harmonics must be >= 1");
  }

  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    if (s.group != spec.target_group) continue;
    if (s.corrupted) throw Error(ErrorCode::AlreadyBiased, kModule, "sample already corrupted", s.id);
    members.push_back(i);
  }
  if (members.empty()) {
    throw Error(ErrorCode::ConfigError, kModule,
                "target group " + std::to_string(spec.target_group) + " not present in corpus");
  }

  const auto n_select = static_cast<std::size_t>(std::lround(spec.beta * static_cast<double>(members.size())));
  Rng select_rng = make_stream(spec.seed, "inject/select");
  shuffle(select_rng, members);
  members.resize(n_select);

  InjectionResult result{corpus, InjectionRecord{spec, {}, {}}};
  for (std::size_t rank = 0; rank < members.size(); ++rank) {
    Sample& s = result.corpus.samples[members[rank]];
    // One stream per selected sample so HBD draws do not depend on skips.
    Rng op_rng = make_stream(spec.seed, "inject/op", rank);
    BinaryMask biased;
    try {
      biased = apply_bias_operator(s.mask_obs, spec, op_rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMask) throw;
      result.record.skipped.push_back({s.id, std::string(to_string(e.code()))});
      continue;
    }
    s.set_clean(s.mask_obs);
    s.mask_obs = std::move(biased);
    s.corrupted = true;
    result.record.corrupted_ids.push_back(s.id);
  }
  return result;
}

void write_injection_record(const InjectionRecord& record, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["target_group"] = record.spec.target_group;
  doc["beta"] = record.spec.beta;
  doc["operator"] = to_string(record.spec.op);
  doc["r_d"] = record.spec.radius;
  doc["harmonics"] = record.spec.harmonics;
  doc["seed"] = record.spec.seed;
  doc["corrupted_ids"] = record.corrupted_ids;
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : record.skipped) skipped.push_back({{"id", s.id}, {"reason", s.reason}});
  doc["skipped"] = std::move(skipped);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, kModule, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

InjectionRecord read_injection_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open " + path.string());
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    InjectionRecord r;
    r.spec.target_group = doc.at("target_group").get<int>();
    r.spec.beta = doc.at("beta").get<double>();
    r.spec.op = parse_bias_operator(doc.at("operator").get<std::string>());
    r.spec.radius = doc.at("r_d").get<int>();
    r.spec.harmonics = doc.at("harmonics").get<int>();
    r.spec.seed = doc.at("seed").get<std::uint64_t>();
    r.corrupted_ids = doc.at("corrupted_ids").get<std::vector<std::string>>();
    for (const auto& s : doc.at("skipped")) {
      r.skipped.push_back({s.at("id").get<std::string>(), s.at("reason").get<std::string>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, path.string() + ": " + e.what());
  }
}

}  // namespace segbias
