#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "vcnf/errors.hpp"
#include "vcnf/experiment.hpp"

using namespace vcnf;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = VCNF_SOURCE_DIR "/configs";

const char* kMinimal = R"(
name = "mini"
[problem]
kind = "ot"
[problem.p0]
type = "isotropic"
dim = 2
var = 1.0
center = -1.0
[problem.p1]
type = "isotropic"
dim = 2
var = 1.0
center = 1.0
)";

ExperimentConfig from_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
  return experiment_from_json(toml_to_json(text), overrides);
}

}  // namespace

TEST_CASE("shipped recipes load") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".toml") continue;
    CAPTURE(e.path().string());
    const auto exp = load_experiment(e.path());
    CHECK(exp.name == e.path().stem().string());
    CHECK(exp.train.seed == 1);
    ++n;
  }
  CHECK(n == 8);
  const auto c1 = load_experiment(kConfigs / "ot-case1.toml");
  CHECK(c1.train.lambda == 500.0);
  CHECK(*objective_benchmark(c1.problem) == doctest::Approx(36.0).epsilon(1e-14));
  const auto c5 = load_experiment(kConfigs / "ot-case5.toml");
  CHECK(*objective_benchmark(c5.problem) == doctest::Approx(0.125).epsilon(1e-14));
  const auto rq = load_experiment(kConfigs / "rwpo-quadratic.toml");
  CHECK(*objective_benchmark(rq.problem) == doctest::Approx(3.386).epsilon(1e-4));
}

TEST_CASE("defaults and overrides") {
  const auto e = from_text(kMinimal);
  CHECK(e.train.n_t == 20);
  CHECK(e.train.n_k == 64);
  CHECK(e.train.n_b == 2048);
  CHECK(e.train.steps == 30000);
  CHECK(e.arch.spline.bins == 5);
  CHECK(e.arch.spline.bound == 8.0);
  CHECK(e.arch.hidden == std::vector<int>{16, 16});
  CHECK(e.out_dir == fs::path("runs/mini"));
  const auto o = from_text(kMinimal, {"train.steps=10", "train.lr=0.01", "model.hidden=[8, 8]", "output.dir=\"/tmp/x\""});
  CHECK(o.train.steps == 10);
  CHECK(o.train.lr == 0.01);
  CHECK(o.arch.hidden == std::vector<int>{8, 8});
  CHECK(o.out_dir == fs::path("/tmp/x"));
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(from_text(std::string(kMinimal) + "colour = 1\n"), ConfigError);
  CHECK_THROWS_AS(from_text(std::string(kMinimal) + "[train]\nstepz = 3\n"), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"problem.p0.sigma=2"}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"train.steps"}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"train.steps=ten"}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"train.steps=\"10\""}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"train.n_b=0"}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"problem.kind=\"heat\""}), ConfigError);
  CHECK_THROWS_AS(from_text(kMinimal, {"model.bins=0"}), ConfigError);
  CHECK_THROWS_AS(toml_to_json("name = = 3"), ConfigError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/recipe.toml"), ConfigError);
}

TEST_CASE("resolved configuration round-trips") {
  for (const char* name : {"ot-gmm", "rwpo-double-well", "fp-smiling", "smoke-10d"}) {
    CAPTURE(name);
    const auto a = load_experiment(kConfigs / (std::string(name) + ".toml"));
    const auto b = experiment_from_json(a.resolved);
    CHECK(a.resolved == b.resolved);
    CHECK(config_hash(a.resolved) == config_hash(b.resolved));
    CHECK(config_hash(a.resolved).size() == 16);
    const auto path = fs::temp_directory_path() / (std::string("vcnf-resolved-") + name + ".json");
    std::ofstream(path) << a.resolved.dump(2);
    const auto c = load_experiment(path);
    CHECK(c.resolved == a.resolved);
    fs::remove(path);
  }
  const auto x = load_experiment(kConfigs / "ot-case1.toml");
  const auto y = load_experiment(kConfigs / "ot-case1.toml", {"train.seed=2"});
  CHECK(config_hash(x.resolved) != config_hash(y.resolved));
}
