#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "json.hpp"
#include "segbias/error.hpp"
#include "segbias/train.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "checkpoint";

void put_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void write_checkpoint(const LearnerModel& model, const std::filesystem::path& json_path,
                      const nlohmann::ordered_json* inference) {
  std::filesystem::path blob = json_path;
  blob.replace_extension(".bin");
  nlohmann::ordered_json j;
  j["hidden_dim"] = model.hidden_dim;
  j["patch_radius"] = model.patch_radius;
  j["feat_dim"] = model.feat_dim();
  j["level_center"] = model.level_center;
  std::vector<int> groups;
  for (const auto& [g, f] : model.film) groups.push_back(g);
  j["groups"] = groups;
  j["parameter_count"] = model.parameter_count();
  j["layout"] = "W1(col-major),b1,{gamma,beta} per group,w2,b2";
  j["parameters"] = blob.filename().string();
  if (inference != nullptr) j["inference"] = *inference;

  std::ofstream js(json_path);
  if (!js) throw Error(ErrorCode::IoError, kModule, "cannot write " + json_path.string());
  js << j.dump(2) << '\n';

  std::ofstream bs(blob, std::ios::binary);
  if (!bs) throw Error(ErrorCode::IoError, kModule, "cannot write " + blob.string());
  for (double v : model.flatten()) put_le(bs, v);
  if (!bs) throw Error(ErrorCode::IoError, kModule, "write failed for " + blob.string());
}

nlohmann::json read_json(const std::filesystem::path& json_path) {
  std::ifstream js(json_path);
  if (!js) throw Error(ErrorCode::IoError, kModule, "cannot open " + json_path.string());
  try {
    return nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, e.what());
  }
}

LearnerModel model_from_json(const nlohmann::json& j, const std::filesystem::path& json_path) {
  LearnerModel m;
  std::string blob_name;
  try {
    blob_name = j.at("parameters").get<std::string>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.patch_radius = j.at("patch_radius").get<int>();
    m.level_center = j.at("level_center").get<double>();
    if (m.hidden_dim < 1 || m.patch_radius < 0) throw Error(ErrorCode::ParseError, kModule, "bad dimensions");
    m.W1 = Eigen::MatrixXd::Zero(m.hidden_dim, m.feat_dim());
    m.b1 = Eigen::VectorXd::Zero(m.hidden_dim);
    m.w2 = Eigen::VectorXd::Zero(m.hidden_dim);
    for (int g : j.at("groups").get<std::vector<int>>()) {
      m.film[g] = FilmParams{Eigen::VectorXd::Zero(m.hidden_dim), Eigen::VectorXd::Zero(m.hidden_dim)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, e.what());
  }
  const std::filesystem::path blob = json_path.parent_path() / blob_name;
  std::ifstream bs(blob, std::ios::binary);
  if (!bs) throw Error(ErrorCode::IoError, kModule, "cannot open " + blob.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
  const std::size_t n = m.parameter_count();
  if (bytes.size() != 8 * n) throw Error(ErrorCode::ParseError, kModule, "parameter blob has wrong length");
  std::vector<double> flat(n);
  for (std::size_t i = 0; i < n; ++i) flat[i] = get_le(bytes.data() + 8 * i);
  m.assign(flat);
  return m;
}

}  // namespace

void save_checkpoint(const LearnerModel& model, const std::filesystem::path& json_path) {
  write_checkpoint(model, json_path, nullptr);
}

LearnerModel load_checkpoint(const std::filesystem::path& json_path) {
  return model_from_json(read_json(json_path), json_path);
}

void save_train_result(const TrainResult& result, const std::filesystem::path& json_path) {
  nlohmann::ordered_json inf;
  inf["conditioned"] = result.conditioned;
  inf["inference_group"] = result.inference_group ? nlohmann::ordered_json(*result.inference_group) : nullptr;
  inf["discovered_clean_group"] =
      result.discovered_clean_group ? nlohmann::ordered_json(*result.discovered_clean_group) : nullptr;
  inf["low_confidence"] = result.low_confidence;
  write_checkpoint(result.model, json_path, &inf);
}

TrainResult load_train_result(const std::filesystem::path& json_path) {
  const nlohmann::json j = read_json(json_path);
  TrainResult r;
  r.model = model_from_json(j, json_path);
  if (!j.contains("inference")) return r;
  try {
    const nlohmann::json& inf = j.at("inference");
    r.conditioned = inf.at("conditioned").get<bool>();
    if (!inf.at("inference_group").is_null()) r.inference_group = inf.at("inference_group").get<int>();
    if (!inf.at("discovered_clean_group").is_null()) {
      r.discovered_clean_group = inf.at("discovered_clean_group").get<int>();
    }
    r.low_confidence = inf.at("low_confidence").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, e.what());
  }
  return r;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, kModule, "cannot write " + path.string());
  os << "epoch,group,mean_loss,phase\n";
  os << std::setprecision(10);
  for (const HistoryRow& r : history) os << r.epoch << ',' << r.group << ',' << r.mean_loss << ',' << r.phase << '\n';
}

}  // namespace segbias
