#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "segbias/image.hpp"
#include "segbias/mask_ops.hpp"

namespace fs = std::filesystem;

#ifdef SEGBIAS_CLI_PATH

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "segbias_cli_test.log";
  const std::string cmd = std::string("\"") + SEGBIAS_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("segbias_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

const std::string kTiny =
    " --gen.n_samples 12 --gen.width 20 --gen.height 20 --train.epochs 2 --train.hidden_dim 4";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    const Run unknown = run("synth --no-such-flag");
    CHECK(unknown.code == 2);
    CHECK(unknown.output.find("Usage") != std::string::npos);
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train --manifest /nonexistent/manifest.json").code == 2);
    const Run small = run("synth --gen.n_samples 1 --out " + scratch("n1").string());
    CHECK(small.code == 2);
    CHECK(small.output.find("synth") != std::string::npos);
    CHECK(run("synth --train.epochs x").code == 2);
  }

  TEST_CASE("runtime errors exit with 1") {
    const fs::path dir = scratch("runtime");
    std::ofstream(dir / "blocker") << "x";
    CHECK(run("synth --gen.n_samples 4 --gen.width 8 --gen.height 8 --out " + (dir / "blocker" / "sub").string()).code == 1);
  }

  TEST_CASE("stage by stage") {
    const fs::path dir = scratch("stages");
    REQUIRE(run("synth" + kTiny + " --out " + (dir / "clean").string()).code == 0);
    REQUIRE(fs::exists(dir / "clean" / "manifest.json"));
    REQUIRE(run("inject --beta 1 --op dilation --manifest " + (dir / "clean" / "manifest.json").string() + " --out " +
                (dir / "biased").string())
                .code == 0);
    CHECK(fs::exists(dir / "biased" / "injection.json"));
    const std::string manifest = (dir / "biased" / "manifest.json").string();
    REQUIRE(run("train" + kTiny + " --train.mitigation combined --manifest " + manifest + " --out " +
                (dir / "model").string())
                .code == 0);
    CHECK(fs::exists(dir / "model" / "model.json"));
    CHECK(fs::exists(dir / "model" / "history.csv"));
    const std::string model = (dir / "model" / "model.json").string();
    CHECK(run("evaluate --reference clean --manifest " + manifest + " --model " + model + " --out " +
              (dir / "eval").string())
              .code == 0);
    CHECK(slurp(dir / "eval" / "eval.csv").find("dice_clean") != std::string::npos);
    CHECK(run("separability --separability.n_perm 20 --manifest " + manifest + " --model " + model + " --out " +
              (dir / "sep").string())
              .code == 0);
    CHECK(fs::exists(dir / "sep" / "pca_projection.csv"));
    CHECK(run("audit" + kTiny + " --audit.k 2 --manifest " + manifest + " --out " + (dir / "audit").string()).code == 0);
    CHECK(slurp(dir / "audit" / "audit.json").find("bias_indicators") != std::string::npos);
    CHECK(fs::exists(dir / "audit" / "error_masks"));
  }

  TEST_CASE("tone command") {
    const fs::path dir = scratch("tone");
    segbias::RgbImage img;
    img.width = 6;
    img.height = 6;
    for (int i = 0; i < 36; ++i) {
      img.rgb.push_back(225);
      img.rgb.push_back(190);
      img.rgb.push_back(165);
    }
    segbias::write_rgb_ppm(dir / "skin.ppm", img);
    segbias::BinaryMask lesion(6, 6);
    lesion(2, 2) = 1;
    segbias::write_mask_pgm(dir / "lesion.pgm", lesion);
    REQUIRE(run("tone --image " + (dir / "skin.ppm").string() + " --lesion " + (dir / "lesion.pgm").string() +
                " --out " + dir.string())
                .code == 0);
    const std::string csv = slurp(dir / "tone.csv");
    CHECK(csv.rfind("id,L,a,b,ITA,group\n", 0) == 0);
    CHECK(csv.find("skin,") != std::string::npos);
  }

  TEST_CASE("pipeline is reproducible and reports") {
    const std::string args = "pipeline" + kTiny +
                             " --seeds 1,2 --beta 0.5 --audit.k 2 --separability.n_perm 10 --pipeline.test_samples 8"
                             " --pipeline.modes none,combined --pipeline.penalties dp --train.warmup_epochs 1";
    const fs::path a = scratch("pipe_a");
    const fs::path b = scratch("pipe_b");
    REQUIRE(run(args + " --out " + a.string()).code == 0);
    REQUIRE(run(args + " --out " + b.string()).code == 0);
    const auto ta = tree(a);
    CHECK(ta == tree(b));
    for (const char* f : {"report.md", "report.csv", "eval.json", "eval.csv", "config.json",
                          "seed_1/audit/audit.json", "seed_2/separability/separability.json",
                          "seed_1/models/combined.json", "seed_1/corpus/injection.json"}) {
      CAPTURE(f);
      CHECK(ta.count(f) == 1);
    }
    const std::string report = ta.at("report.md");
    CHECK(report.find("Part I") != std::string::npos);
    CHECK(report.find("Part II") != std::string::npos);

    fs::remove(a / "report.md");
    fs::remove(a / "report.csv");
    REQUIRE(run("report --out " + a.string()).code == 0);
    CHECK(slurp(a / "report.md") == report);
  }
}

#endif
