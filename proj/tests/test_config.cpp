#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "stk/config.hpp"
#include "stk/pipeline.hpp"

using namespace stk;

TEST_CASE("config round-trips through JSON") {
  PipelineConfig cfg;
  cfg.training.epochs = 7;
  cfg.inference.lambda = 0.25;
  cfg.ablation.disable_ea_moe = true;
  cfg.dataset.train = "a.tsv";
  const auto text = cfg.to_json();
  const auto back = PipelineConfig::from_json_text(text);
  CHECK(back.training.epochs == 7);
  CHECK(back.inference.lambda == doctest::Approx(0.25));
  CHECK(back.ablation.disable_ea_moe);
  CHECK(back.dataset.train == "a.tsv");
}

TEST_CASE("dot-path overrides") {
  PipelineConfig cfg;
  cfg.apply_override("training.epochs=9");
  CHECK(cfg.training.epochs == 9);
  cfg.apply_override("inference.lambda=0.3");
  CHECK(cfg.inference.lambda == doctest::Approx(0.3));
  cfg.apply_override("ablation.disable_st_moe=true");
  CHECK(cfg.ablation.disable_st_moe);
  cfg.apply_override("dataset.train=path.tsv");
  CHECK(cfg.dataset.train == "path.tsv");
  CHECK_THROWS_AS(cfg.apply_override("nosuch.key=1"), config_error);
  CHECK_THROWS_AS(cfg.apply_override("training.epochs"), config_error);
  CHECK_THROWS_AS(cfg.apply_override("training.epochs=banana"), config_error);
}

TEST_CASE("validation rejects bad values") {
  PipelineConfig cfg;
  cfg.inference.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = PipelineConfig{};
  cfg.adapter.top_k = 9;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = PipelineConfig{};
  cfg.backbone.d_t = 65;  // not divisible by n_heads
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = PipelineConfig{};
  cfg.validate();
}

TEST_CASE("malformed config files raise config errors") {
  CHECK_THROWS_AS(PipelineConfig::from_json_text("{nope"), config_error);
  CHECK_THROWS_AS(PipelineConfig::from_json_file("/nonexistent/config.json"),
                  missing_artifact_error);
  const auto typed = R"({"training": {"epochs": "many"}})";
  CHECK_THROWS_AS(PipelineConfig::from_json_text(typed), config_error);
}

TEST_CASE("run lock guards the artifact directory") {
  const auto dir =
      (std::filesystem::temp_directory_path() / "stk_lock_test").string();
  std::filesystem::remove_all(dir);
  pipeline::RunPaths paths{dir};
  {
    pipeline::RunLock lock(paths);
    CHECK(std::filesystem::exists(paths.lock()));
    CHECK_THROWS_AS(pipeline::RunLock{paths}, config_error);
  }
  CHECK_FALSE(std::filesystem::exists(paths.lock()));
  std::filesystem::remove_all(dir);
}
