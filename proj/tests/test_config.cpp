#include "doctest.h"
#include "segbias/config.hpp"
#include "segbias/error.hpp"

using namespace segbias;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults round trip") {
    const RunConfig d;
    const std::string text = run_config_to_json(d);
    CHECK(run_config_to_json(run_config_from_json(text)) == text);
    CHECK(run_config_to_json(run_config_from_json("{}")) == text);
  }

  TEST_CASE("partial documents merge into defaults") {
    const RunConfig c = run_config_from_json(R"({"seeds": [3, 4], "bias": {"beta": 0.5, "op": "dilation"},
                                                 "train": {"epochs": 7}, "pipeline": {"modes": ["none", "auto"]}})");
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(c.bias.beta == 0.5);
    CHECK(c.bias.op == BiasOperator::Dilation);
    CHECK(c.train.epochs == 7);
    CHECK(c.train.learning_rate == RunConfig{}.train.learning_rate);
    CHECK(c.modes == std::vector<Mitigation>{Mitigation::None, Mitigation::Auto});
  }

  TEST_CASE("bad documents") {
    CHECK(code_of([] { run_config_from_json("{oops"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { run_config_from_json(R"({"gen": {"colour": 1}})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { run_config_from_json(R"({"train": {"epochs": "many"}})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { run_config_from_json(R"({"train": {"epochs": 2.5}})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { run_config_from_json(R"({"bias": {"op": "blur"}})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { run_config_from_json(R"([1, 2])"); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("dotted overrides") {
    RunConfig c;
    apply_override(c, "train.epochs", "3");
    apply_override(c, "gen.group_cue_shift", "0.05");
    apply_override(c, "audit.enabled", "false");
    apply_override(c, "seeds", "1,2,5");
    apply_override(c, "pipeline.penalties", "dp,coral");
    apply_override(c, "gen.shape", "polygon_blob");
    CHECK(c.train.epochs == 3);
    CHECK(c.gen.group_cue_shift == 0.05);
    CHECK_FALSE(c.run_audit);
    CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 5});
    CHECK(c.penalties == std::vector<PenaltyKind>{PenaltyKind::DP, PenaltyKind::Coral});
    CHECK(c.gen.shape == ShapeFamily::PolygonBlob);
    CHECK(code_of([&] { apply_override(c, "train.nope", "1"); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { apply_override(c, "train.epochs", "x"); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { apply_override(c, "seeds", ""); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("every key is overridable") {
    const auto keys = run_config_keys();
    CHECK(keys.front() == "seeds");
    CHECK(std::find(keys.begin(), keys.end(), "train.penalty_weight") != keys.end());
    CHECK(std::find(keys.begin(), keys.end(), "separability.n_perm") != keys.end());
  }

  TEST_CASE("run config validation") {
    RunConfig c;
    CHECK_NOTHROW(validate(c));
    c.seeds.clear();
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.audit_k = 1;
    CHECK_THROWS_AS(validate(c), Error);
    c = RunConfig{};
    c.gen.n_samples = 1;
    CHECK_THROWS_AS(validate(c), Error);
  }
}
