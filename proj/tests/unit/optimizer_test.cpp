#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reference_pgd.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/optimizer.hpp"
#include "uapforge/toy_encoder.hpp"

namespace uapforge {
namespace {

const Geometry kGeom{8, 8, 3};
constexpr double kEps = 12.0 / 255.0;

ToyDualEncoder encoder() {
  ToyEncoderOptions o;
  o.seed = 3;
  o.geometry = kGeom;
  o.embed_dim = 12;
  o.gain = 2.0;
  return ToyDualEncoder(o);
}

bool same_bits(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}
bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

AttackConfig vanilla(int iterations) {
  AttackConfig c;
  c.iterations = iterations;
  c.batch_size = 4;
  c.seed = 9;
  c.gamma1 = c.gamma2 = 0.0;
  c.lookahead = 0;
  c.augment.enabled = false;
  c.loss.local_term = false;
  return c;
}

class OptimizerTest : public ::testing::Test {
 protected:
  OptimizerTest() : enc_(encoder()), ds_(synth_toy_dataset(4, 6, kGeom, 20, 3)) {
    pairs_ = expand_by_captions(ds_);
    examples_ = prepare_examples(pairs_, enc_);
  }
  ToyDualEncoder enc_;
  PairedDataset ds_;
  std::vector<CaptionPair> pairs_;
  std::vector<TrainingExample> examples_;
};

TEST(PgdUpdate, StepFromOrigin) {
  const ImageUAP z = ImageUAP::zeros(kGeom, static_cast<float>(kEps));
  const Eigen::VectorXd up = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(kGeom.size()));
  const ImageUAP small = pgd_update(z, up, 0.01);
  for (float v : small.delta) EXPECT_EQ(v, 0.01f);
  const ImageUAP big = pgd_update(z, up, 1.0);
  for (float v : big.delta) EXPECT_EQ(v, static_cast<float>(kEps));
}

TEST(PgdUpdate, BoundaryHoldsAndZeroGradientIsIgnored) {
  ImageUAP d = ImageUAP::zeros(kGeom, static_cast<float>(kEps));
  d.delta.setConstant(static_cast<float>(kEps));
  Eigen::VectorXd dir = Eigen::VectorXd::Ones(d.delta.size());
  dir[0] = 0.0;
  dir[1] = -1.0;
  const ImageUAP out = pgd_update(d, dir, 0.01);
  EXPECT_EQ(out.delta[0], static_cast<float>(kEps));
  EXPECT_EQ(out.delta[2], static_cast<float>(kEps));
  EXPECT_EQ(out.delta[1], static_cast<float>(static_cast<double>(static_cast<float>(kEps)) - 0.01));
  EXPECT_NO_THROW(out.validate());
}

TEST(PgdUpdate, PaperStepSize) {
  AttackConfig c;
  EXPECT_DOUBLE_EQ(c.resolved_step_size(), 12.0 / 255.0 / 100.0 * 1.25);
  EXPECT_EQ(c.iterations, 100);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.gamma1, 0.9);
  EXPECT_DOUBLE_EQ(c.gamma2, 0.1);
}

TEST(Combine, ScalarCases) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  MomentumState s{one, 0.9, 0.1, 2, -1};
  EXPECT_NEAR(combine(one, s, one)[0], 1.8, 1e-15);
  s.future_sign = 1;
  EXPECT_NEAR(combine(one, s, one)[0], 2.0, 1e-15);
  s.gamma1 = s.gamma2 = 0.0;
  Eigen::VectorXd g(3);
  g << 0.25, -3.0, 7.5;
  s.previous = Eigen::VectorXd::Constant(3, 4.0);
  EXPECT_TRUE(same_bits(combine(g, s, Eigen::VectorXd::Constant(3, -2.0)), g));
  EXPECT_THROW(combine(g, s, one), ShapeError);
}

TEST(Uap, RandomInitRespectsBudget) {
  Rng rng(1);
  const ImageUAP u = ImageUAP::random(kGeom, static_cast<float>(kEps), rng);
  EXPECT_LE(u.linf(), static_cast<float>(kEps));
  EXPECT_GT(u.linf(), 0.5f * static_cast<float>(kEps));
  EXPECT_NO_THROW(u.validate());
  ImageUAP bad = u;
  bad.delta[3] = 2.0f * static_cast<float>(kEps);
  EXPECT_THROW(bad.validate(), InvariantError);
}

TEST_F(OptimizerTest, GradBatchConstantObjectiveIsZero) {
  const ImageUAP d = ImageUAP::zeros(kGeom, static_cast<float>(kEps));
  const BatchObjective constant = [&](const Tensor& t) {
    return LossEvaluation{2.0, Eigen::VectorXd::Zero(t.values.size())};
  };
  EXPECT_EQ(grad_batch(constant, d, 3).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(OptimizerTest, GradBatchIsInvariantToDuplication) {
  Rng rng(2);
  const ImageUAP d = ImageUAP::random(kGeom, static_cast<float>(kEps), rng);
  std::vector<TrainingExample> twice = examples_;
  twice.insert(twice.end(), examples_.begin(), examples_.end());
  const auto g1 = grad_batch([&](const Tensor& t) { return loss_global(examples_, t, enc_, {}); }, d, examples_.size());
  const auto g2 = grad_batch([&](const Tensor& t) { return loss_global(twice, t, enc_, {}); }, d, twice.size());
  EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(OptimizerTest, GradBatchMatchesFiniteDifferences) {
  Rng rng(3);
  const ImageUAP d = ImageUAP::random(kGeom, static_cast<float>(kEps), rng);
  const std::size_t n = examples_.size();
  const Eigen::VectorXd g =
      grad_batch([&](const Tensor& t) { return loss_global(examples_, t, enc_, {}); }, d, n);
  const auto mean_loss = [&](const Eigen::VectorXd& v) {
    return loss_global(examples_, Tensor(kGeom, v), enc_, {}).value / static_cast<double>(n);
  };
  std::uniform_int_distribution<Eigen::Index> pick(0, g.size() - 1);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index k = pick(rng);
    const double numeric = oracle::central_difference(mean_loss, d.delta.cast<double>(), k);
    EXPECT_LT(oracle::relative_error(g[k], numeric, 1e-6), 1e-4);
  }
}

TEST_F(OptimizerTest, LookaheadDepthZeroIsZero) {
  const ImageUAP d = ImageUAP::zeros(kGeom, static_cast<float>(kEps));
  EXPECT_EQ(lookahead_future_grad(d, examples_, 0, 0.01, enc_, {}).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(OptimizerTest, LookaheadMatchesOutOfModuleRollout) {
  Rng rng(4);
  const ImageUAP d = ImageUAP::random(kGeom, static_cast<float>(kEps), rng);
  const double step = 0.01;
  const double inv_n = 1.0 / static_cast<double>(examples_.size());
  for (int depth = 1; depth <= 3; ++depth) {
    // re-execute the virtual steps by hand
    Eigen::VectorXf v = d.delta;
    std::vector<Eigen::VectorXd> grads;
    Eigen::VectorXd g = loss_global(examples_, Tensor(kGeom, v.cast<double>()), enc_, {}).gradient * inv_n;
    for (int i = 0; i < depth; ++i) {
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double s = g[k] > 0 ? 1.0 : (g[k] < 0 ? -1.0 : 0.0);
        v[k] = std::clamp(static_cast<float>(v[k] + step * s), -d.epsilon, d.epsilon);
      }
      g = loss_global(examples_, Tensor(kGeom, v.cast<double>()), enc_, {}).gradient * inv_n;
      grads.push_back(g);
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.size());
    for (const auto& x : grads) mean += x;
    mean /= depth;
    EXPECT_LT((lookahead_future_grad(d, examples_, depth, step, enc_, {}) - mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((lookahead_future_grad(d, examples_, depth, step, enc_, {}, FutureMode::Last) - grads.back())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
  }
}

TEST_F(OptimizerTest, LookaheadLeavesInputsUntouched) {
  Rng rng(5);
  const ImageUAP d = ImageUAP::random(kGeom, static_cast<float>(kEps), rng);
  const ImageUAP before = d;
  MomentumState state{Eigen::VectorXd::Random(d.delta.size()), 0.9, 0.1, 2, -1};
  const MomentumState state_before = state;
  (void)lookahead_future_grad(d, examples_, 3, 0.01, enc_, {});
  EXPECT_TRUE(same_bits(d.delta, before.delta));
  EXPECT_EQ(d.epsilon, before.epsilon);
  EXPECT_TRUE(same_bits(state.previous, state_before.previous));
}

TEST_F(OptimizerTest, TraceLengthIsEpochsTimesBatches) {
  AttackConfig c = vanilla(3);
  c.batch_size = 5;  // n_t = 12 -> 3 batches per epoch
  const AttackResult r = run_image_attack(ds_, enc_, c);
  EXPECT_EQ(r.trace.size(), 3u * 3u);
  EXPECT_EQ(r.trace.back().step, 9u);
  EXPECT_EQ(r.trace.back().epoch, 3);
}

TEST_F(OptimizerTest, BudgetHoldsAfterEveryStepOfTheFullMethod) {
  AttackConfig c;
  c.iterations = 4;
  c.batch_size = 4;
  c.step_size = 0.02;
  std::size_t seen = 0;
  run_image_attack(ds_, enc_, c, [&](const TraceRow& row, const ImageUAP& u) {
    ++seen;
    EXPECT_LE(u.linf(), u.epsilon);
    EXPECT_EQ(static_cast<float>(row.linf), u.linf());
    EXPECT_NO_THROW(u.validate());
  });
  EXPECT_EQ(seen, 12u);
}

TEST_F(OptimizerTest, VanillaSettingsReproduceReferencePgdBitwise) {
  for (bool local : {false, true}) {
    AttackConfig c = vanilla(4);
    if (local) {
      c.loss.local_term = true;
      c.loss.crop = {1.0, 1.0};
    }
    std::vector<Eigen::VectorXf> steps;
    run_image_attack(ds_, enc_, c, [&](const TraceRow&, const ImageUAP& u) { steps.push_back(u.delta); });
    const auto ref = oracle::reference_pgd(ds_, enc_, c.seed, c.epsilon_image, c.resolved_step_size(), 4, 4,
                                           oracle::ReferenceOptions{local, 0.0});
    ASSERT_EQ(steps.size(), ref.size());
    for (std::size_t i = 0; i < steps.size(); ++i) EXPECT_TRUE(same_bits(steps[i], ref[i])) << "step " << i << " diff " << (steps[i]-ref[i]).cwiseAbs().maxCoeff() << " n " << ((steps[i]-ref[i]).array() != 0).count() << "/" << steps[i].size();
  }
}

TEST_F(OptimizerTest, NoFutureTermReducesToClassicalMomentum) {
  AttackConfig c = vanilla(3);
  c.gamma1 = 0.9;
  c.cadence = MomentumCadence::PerBatch;
  std::vector<Eigen::VectorXf> steps;
  run_image_attack(ds_, enc_, c, [&](const TraceRow&, const ImageUAP& u) { steps.push_back(u.delta); });
  const auto ref = oracle::reference_pgd(ds_, enc_, c.seed, c.epsilon_image, c.resolved_step_size(), 3, 4,
                                         oracle::ReferenceOptions{false, 0.9});
  ASSERT_EQ(steps.size(), ref.size());
  for (std::size_t i = 0; i < steps.size(); ++i) EXPECT_TRUE(same_bits(steps[i], ref[i])) << "step " << i << " diff " << (steps[i]-ref[i]).cwiseAbs().maxCoeff() << " n " << ((steps[i]-ref[i]).array() != 0).count() << "/" << steps[i].size();
}

TEST_F(OptimizerTest, RunsAreDeterministic) {
  AttackConfig c;
  c.iterations = 2;
  c.batch_size = 4;
  const AttackResult a = run_image_attack(ds_, enc_, c), b = run_image_attack(ds_, enc_, c);
  EXPECT_TRUE(same_bits(a.uap.delta, b.uap.delta));
  c.seed = 1;
  EXPECT_FALSE(same_bits(a.uap.delta, run_image_attack(ds_, enc_, c).uap.delta));
}

TEST_F(OptimizerTest, InvalidConfigIsRejected) {
  AttackConfig c;
  c.iterations = 0;
  EXPECT_THROW(run_image_attack(ds_, enc_, c), ParameterError);
  c = {};
  c.future_sign = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.gamma1 = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

/// Encoder whose image embeddings turn into NaN once a pixel exceeds 0.99.
class PoisonedEncoder final : public EncoderBundle {
 public:
  std::string name() const override { return "poisoned"; }
  Geometry input_geometry() const override { return inner_.input_geometry(); }
  int embed_dim() const override { return inner_.embed_dim(); }
  using EncoderBundle::encode_image;
  using EncoderBundle::encode_text;
  Eigen::MatrixXd encode_image(std::span<const Tensor> batch) const override {
    Eigen::MatrixXd e = inner_.encode_image(batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (batch[b].values.maxCoeff() > 0.99) e.row(static_cast<Eigen::Index>(b)).setConstant(std::nan(""));
    }
    return e;
  }
  Eigen::MatrixXd encode_text(std::span<const Tokens> batch) const override { return inner_.encode_text(batch); }
  ImageGradient grad_image(const EmbeddingLoss& loss, std::span<const Tensor> batch) const override {
    ImageGradient g = inner_.grad_image(loss, batch);
    g.value = loss(encode_image(batch)).value;
    return g;
  }

 private:
  ToyDualEncoder inner_ = encoder();
};

TEST(RunImageAttack, NonFiniteLossNamesTheStep) {
  const PoisonedEncoder enc;
  // the second image has a saturated pixel, so its embedding is poisoned
  Tensor a = Tensor::constant(kGeom, 0.5), b = Tensor::constant(kGeom, 0.5);
  b.values[0] = 1.0;
  const PairedDataset ds({CaptionedImage{{"a", a}, {{"x"}}}, CaptionedImage{{"b", b}, {{"y"}}}}, kGeom);
  AttackConfig c = vanilla(2);
  c.epsilon_image = 0.005;
  c.batch_size = 1;
  try {
    run_image_attack(ds, enc, c);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step "), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace uapforge
