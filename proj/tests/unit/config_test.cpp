#include <gtest/gtest.h>

#include "uapforge/config.hpp"
#include "uapforge/errors.hpp"

namespace uapforge {
namespace {

std::string error_of(const std::string& toml) {
  try {
    parse_run_config(toml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, DefaultsAreThePaperSettings) {
  RunConfig c = parse_run_config("");
  c.sync();
  EXPECT_DOUBLE_EQ(c.attack.epsilon_image, 12.0 / 255.0);
  EXPECT_EQ(c.attack.epsilon_text, 1);
  EXPECT_EQ(c.attack.iterations, 100);
  EXPECT_EQ(c.attack.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.attack.augment.scmix.beta1, 0.8);
  EXPECT_DOUBLE_EQ(c.attack.augment.scmix.beta2, 0.2);
  EXPECT_DOUBLE_EQ(c.attack.gamma1, 0.9);
  EXPECT_DOUBLE_EQ(c.attack.gamma2, 0.1);
  EXPECT_EQ(c.attack.text_iterations, 15);
  EXPECT_EQ(c.text.passes, 15);
  EXPECT_DOUBLE_EQ(c.attack.resolved_step_size(), (12.0 / 255.0) / 100.0 * 1.25);
  EXPECT_EQ(c.eval.ks, (std::vector<int>{1, 5, 10}));
  EXPECT_TRUE(c.manifest.empty());
  EXPECT_TRUE(c.adapter.empty());
}

TEST(Config, FullDocumentParses) {
  const RunConfig c = parse_run_config(R"(
manifest = "data/manifest.jsonl"
adapter = "toy:seed=2"
seed = 42

[attack]
epsilon_I = 0.05
step_size = 0.002
iterations = 7
batch_size = 8
future_mode = "last"
momentum_cadence = "batch"
future_sign = 1

[augment]
enabled = false
beta1 = 0.7
beta2 = 0.3

[loss]
temperature = 0.5
per_sample_crops = true
crop_min = 0.6

[text]
top_k = 4
positions = "exhaustive"
policy = "random"

[eval]
k = [1, 3]
)");
  EXPECT_EQ(c.manifest, "data/manifest.jsonl");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.attack.seed, 42u);
  EXPECT_DOUBLE_EQ(*c.attack.step_size, 0.002);
  EXPECT_EQ(c.attack.iterations, 7);
  EXPECT_EQ(c.attack.future_mode, FutureMode::Last);
  EXPECT_EQ(c.attack.cadence, MomentumCadence::PerBatch);
  EXPECT_EQ(c.attack.future_sign, 1);
  EXPECT_FALSE(c.attack.augment.enabled);
  EXPECT_DOUBLE_EQ(c.attack.loss.divergence.temperature, 0.5);
  EXPECT_DOUBLE_EQ(c.text.divergence.temperature, 0.5);
  EXPECT_TRUE(c.attack.loss.per_sample_crops);
  EXPECT_DOUBLE_EQ(c.attack.loss.crop.lo, 0.6);
  EXPECT_EQ(c.text.top_k, 4);
  EXPECT_EQ(c.text.positions, SubstitutionPositions::Exhaustive);
  EXPECT_EQ(c.policy, TriggerPolicy::Random);
  EXPECT_EQ(c.eval.ks, (std::vector<int>{1, 3}));
}

TEST(Config, UnknownKeySuggestsTheClosestKnownKey) {
  const std::string msg = error_of("epsilonI = 0.1\n");
  EXPECT_NE(msg.find("unknown key 'epsilonI'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("epsilon_I"), std::string::npos) << msg;
  EXPECT_EQ(suggest_key("epsilonI"), "attack.epsilon_I");
  EXPECT_EQ(suggest_key("batchsize"), "attack.batch_size");
  EXPECT_EQ(suggest_key("completely_unrelated_name"), "");
}

TEST(Config, EveryProblemIsListed) {
  const std::string msg = error_of(R"(
[attack]
iterations = 0
gamma1 = 1.5
batch_size = "sixteen"
lookahead_steps = 2

[augment]
beta1 = 0.1

[text]
policy = "greedy"
)");
  for (const char* needle : {"iterations", "gamma1", "'attack.batch_size' has the wrong type",
                             "unknown key 'attack.lookahead_steps'", "did you mean 'attack.lookahead'", "beta1",
                             "policy"}) {
    EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
  }
}

TEST(Config, UnknownTableAndBadSyntax) {
  EXPECT_NE(error_of("[atack]\niterations = 3\n").find("atack"), std::string::npos);
  EXPECT_NE(error_of("seed = = 3").find("not valid TOML"), std::string::npos);
}

TEST(Config, InputsAreRequiredOnlyWhenAsked) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate(false));
  try {
    c.validate(true);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'manifest' is required"), std::string::npos);
    EXPECT_NE(msg.find("'adapter' is required"), std::string::npos);
  }
}

TEST(Config, SnapshotRoundTripsByteForByte) {
  RunConfig c = parse_run_config(R"(
manifest = "m.jsonl"
adapter = "toy"
seed = 3
[attack]
epsilon_I = 0.0470588235294118
gamma2 = 0.0
[loss]
temperature = 2.0
)");
  const std::string snap = to_toml(c);
  const RunConfig back = parse_run_config(snap);
  EXPECT_EQ(to_toml(back), snap);
  EXPECT_EQ(config_digest(back), config_digest(c));
  EXPECT_EQ(config_digest(c).size(), 16u);
  EXPECT_EQ(back.attack.epsilon_image, c.attack.epsilon_image);
  // the step size is resolved in the snapshot
  EXPECT_NE(snap.find("step_size = "), std::string::npos);
  c.seed = 4;
  EXPECT_NE(config_digest(c), config_digest(back));
}

TEST(Config, DefaultSnapshotRoundTrips) {
  RunConfig c;
  c.manifest = "a";
  c.adapter = "toy";
  const std::string snap = to_toml(c);
  EXPECT_EQ(to_toml(parse_run_config(snap)), snap);
}

}  // namespace
}  // namespace uapforge
