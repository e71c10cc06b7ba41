#include <fstream>

#include "json.hpp"

#include "segbias/error.hpp"
#include "segbias/synth_corpus.hpp"

namespace segbias {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModule = "manifest";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, kModule, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

fs::path write_manifest(const Corpus& corpus, const fs::path& dir) {
  ensure_dir(dir / "images");
  ensure_dir(dir / "masks_obs");
  bool any_clean = false;
  for (const Sample& s : corpus.samples) any_clean = any_clean || s.has_clean();
  if (any_clean) ensure_dir(dir / "masks_clean");

  json samples = json::array();
  for (const Sample& s : corpus.samples) {
    json entry;
    entry["id"] = s.id;
    entry["group"] = s.group;
    entry["image"] = "images/" + s.id + ".pgm";
    entry["mask_obs"] = "masks_obs/" + s.id + ".pgm";
    entry["corrupted"] = s.corrupted;
    write_image_pgm(dir / entry["image"].get<std::string>(), s.image);
    write_mask_pgm(dir / entry["mask_obs"].get<std::string>(), s.mask_obs);
    if (s.has_clean()) {
      entry["mask_clean"] = "masks_clean/" + s.id + ".pgm";
      write_mask_pgm(dir / entry["mask_clean"].get<std::string>(), s.clean());
    }
    samples.push_back(std::move(entry));
  }
  json doc;
  doc["width"] = corpus.width;
  doc["height"] = corpus.height;
  doc["clean_group"] = corpus.clean_group;
  doc["samples"] = std::move(samples);

  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, kModule, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  return path;
}

Corpus read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();

  Corpus corpus;
  std::string current_id;
  try {
    corpus.width = doc.at("width").get<int>();
    corpus.height = doc.at("height").get<int>();
    corpus.clean_group = doc.at("clean_group").get<int>();
    for (const json& entry : doc.at("samples")) {
      current_id = entry.contains("id") && entry["id"].is_string() ? entry["id"].get<std::string>() : "";
      Sample s;
      s.id = entry.at("id").get<std::string>();
      s.group = entry.at("group").get<int>();
      s.corrupted = entry.at("corrupted").get<bool>();
      s.image = read_image_pgm(base / entry.at("image").get<std::string>());
      s.mask_obs = read_mask_pgm(base / entry.at("mask_obs").get<std::string>());
      if (entry.contains("mask_clean")) {
        s.set_clean(read_mask_pgm(base / entry.at("mask_clean").get<std::string>()));
      }
      const bool mismatch = s.image.width != s.mask_obs.width || s.image.height != s.mask_obs.height ||
                            (s.has_clean() && !s.clean_has_shape(s.image.width, s.image.height)) ||
                            s.image.width != corpus.width || s.image.height != corpus.height;
      if (mismatch) throw Error(ErrorCode::DimensionMismatch, kModule, "image and mask sizes disagree", s.id);
      corpus.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, kModule, std::string("malformed manifest entry: ") + e.what(), current_id);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError && e.sample_id().empty()) {
      throw Error(ErrorCode::ParseError, kModule, e.what(), current_id);
    }
    throw;
  }
  corpus.check_invariants();
  return corpus;
}

}  // namespace segbias
