#include "bgcn/config.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace bgcn;

TEST_CASE("config text parsing") {
  ExperimentConfig c;
  apply_config_text(c,
                    "# desk run\n"
                    "train.epochs = 7\n"
                    "train.lr_drop_epoch = 5   # mid-run\n"
                    "model.dilations = 1, 2, 4\n"
                    "model.graph_mode = adaptive\n"
                    "model.learn_phi = false\n"
                    "map.step_rule = fixed\n"
                    "data.split = 7,1,2\n"
                    "seed = 12\n");
  CHECK(c.train.epochs == 7);
  CHECK(c.train.lr_drop_epoch == 5);
  CHECK(c.model.dilations == std::vector<int>{1, 2, 4});
  CHECK(c.model.layers == 3);
  CHECK(c.model.graph_mode == GraphMode::adaptive);
  CHECK_FALSE(c.model.learn_phi);
  CHECK(c.map.step_rule == StepRule::fixed);
  CHECK(c.data.split.train == 7.0);
  CHECK(c.seed == 12);
}

TEST_CASE("config errors name the key and line") {
  ExperimentConfig c;
  try {
    apply_config_text(c, "train.epochs = 3\ntrain.epoch = 4\n", "run.cfg");
    FAIL("expected an error");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("run.cfg:2") != std::string::npos);
    CHECK(msg.find("train.epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "train.epochs = many\n"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "model.learn_phi = maybe\n"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "just words\n"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "model.skip_source = nowhere\n"), UsageError);
}

TEST_CASE("dump and reload round trip over every key") {
  ExperimentConfig c;
  c.seed = 99;
  c.train.epochs = 12;
  c.model.dilations = {1, 2, 4, 8};
  c.model.layers = 4;
  c.map.beta = 0.25;
  c.data.features = {"flow", "speed"};
  const std::string text = dump_config(c);
  for (const auto& key : config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
  ExperimentConfig back;
  apply_config_text(back, text);
  CHECK(dump_config(back) == text);
}

TEST_CASE("every field and section is covered") {
  const auto& keys = config_keys();
  for (const char* key :
       {"train.epochs", "train.batch_size", "train.lr_init", "train.lr_drop_epoch", "train.lr_after", "train.grad_clip",
        "model.residual_channels", "model.dropout_rate", "model.skip_source", "map.alpha", "map.beta", "map.max_iters",
        "map.tol", "map.step_rule", "gvae.latent", "data.epsilon", "seed"})
    CHECK(std::find(keys.begin(), keys.end(), key) != keys.end());
}

TEST_CASE("environment overrides") {
  CHECK(env_var_name("train.lr_init") == "BGCN_TRAIN_LR_INIT");
  ::setenv("BGCN_TRAIN_BATCH_SIZE", "16", 1);
  ::setenv("BGCN_MODEL_DROPOUT_RATE", "0.25", 1);
  ExperimentConfig c;
  apply_env_overrides(c);
  CHECK(c.train.batch_size == 16);
  CHECK(c.model.dropout_rate == 0.25);
  ::setenv("BGCN_TRAIN_BATCH_SIZE", "lots", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), UsageError);
  ::unsetenv("BGCN_TRAIN_BATCH_SIZE");
  ::unsetenv("BGCN_MODEL_DROPOUT_RATE");
}

TEST_CASE("validation and derived seeds") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.model.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  ExperimentConfig a, b;
  a.seed = b.seed = 3;
  CHECK(a.train_seed() == b.train_seed());
  CHECK(a.train_seed() != a.model_seed());
  b.seed = 4;
  CHECK(a.train_seed() != b.train_seed());
}

TEST_CASE("config file loading") {
  bgcn::testing::TempDir dir("cfg");
  bgcn::testing::write_text(dir / "a.cfg", "train.epochs = 2\ntrain.lr_drop_epoch = 1\n");
  CHECK(load_config(dir / "a.cfg").train.epochs == 2);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), UsageError);
}
