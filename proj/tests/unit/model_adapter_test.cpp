#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/toy_encoder.hpp"

namespace uapforge {
namespace {

const Geometry kGeom{6, 5, 3};

ToyDualEncoder make_encoder(bool squash = true, bool normalize = true) {
  ToyEncoderOptions o;
  o.seed = 11;
  o.geometry = kGeom;
  o.embed_dim = 8;
  o.squash = squash;
  o.normalize = normalize;
  return ToyDualEncoder(o);
}

std::vector<Tensor> random_images(int count, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Tensor> out;
  for (int b = 0; b < count; ++b) {
    Tensor t = Tensor::zeros(kGeom);
    for (auto& v : t.values) v = u(rng);
    out.push_back(t);
  }
  return out;
}

/// Smooth scalar loss with a non-trivial dependency on every embedding entry.
EmbeddingLoss weighted_square_loss(const Eigen::MatrixXd& weights) {
  return [weights](const Eigen::MatrixXd& e) {
    EmbeddingLossValue lv;
    lv.value = (weights.array() * e.array()).sum() + 0.5 * e.squaredNorm();
    lv.gradient = weights + e;
    return lv;
  };
}

TEST(ToyEncoder, RowsAreUnitNorm) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(1);
  const auto batch = random_images(4, rng);
  const Eigen::MatrixXd e = enc.encode_image(batch);
  ASSERT_EQ(e.rows(), 4);
  ASSERT_EQ(e.cols(), 8);
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_NEAR(e.row(r).norm(), 1.0, 1e-9);
  const Eigen::MatrixXd t = enc.encode_text(std::vector<Tokens>{{"a", "b"}, {"c"}});
  for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(t.row(r).norm(), 1.0, 1e-9);
}

TEST(ToyEncoder, IdenticalImagesGiveIdenticalRows) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(2);
  auto batch = random_images(3, rng);
  batch[1] = batch[0];
  const Eigen::MatrixXd e = enc.encode_image(batch);
  EXPECT_TRUE((e.row(0).array() == e.row(1).array()).all());
}

TEST(ToyEncoder, GeometryMismatchNamesBothShapes) {
  const ToyDualEncoder enc = make_encoder();
  std::vector<Tensor> batch{Tensor::zeros(Geometry{5, 5, 3})};
  try {
    (void)enc.encode_image(batch);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(kGeom.str()), std::string::npos) << msg;
    EXPECT_NE(msg.find(Geometry{5, 5, 3}.str()), std::string::npos) << msg;
  }
  EXPECT_THROW((void)enc.encode_image(std::vector<Tensor>{}), ContractError);
}

TEST(ToyEncoder, ConstantLossGivesZeroGradient) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(3);
  const auto batch = random_images(2, rng);
  const ImageGradient g = enc.grad_image(
      [](const Eigen::MatrixXd& e) { return EmbeddingLossValue{3.0, Eigen::MatrixXd::Zero(e.rows(), e.cols())}; },
      batch);
  EXPECT_EQ(g.value, 3.0);
  ASSERT_EQ(g.pixels.size(), 2u);
  for (const auto& p : g.pixels) {
    EXPECT_EQ(p.geometry, kGeom);
    EXPECT_EQ(p.values.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(ToyEncoder, LinearMapGradientIsTransposeTimesOnes) {
  const ToyDualEncoder enc = make_encoder(false, false);
  Rng rng(4);
  const auto batch = random_images(2, rng);
  const ImageGradient g = enc.grad_image(
      [](const Eigen::MatrixXd& e) {
        return EmbeddingLossValue{e.sum(), Eigen::MatrixXd::Ones(e.rows(), e.cols())};
      },
      batch);
  // d/dx sum_k (W (x - m) / s)_k = W^T 1 / s, accumulated column by column.
  const Eigen::MatrixXd& w = enc.weights();
  for (const auto& p : g.pixels) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double col = 0.0;
      for (Eigen::Index k = 0; k < w.rows(); ++k) col += w(k, j);
      EXPECT_NEAR(p.values[j], col / ToyDualEncoder::kPixelStd, 1e-12);
    }
  }
}

TEST(ToyEncoder, GradientMatchesFiniteDifferences) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(5);
  auto batch = random_images(3, rng);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd weights(3, 8);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = n01(rng);
  const EmbeddingLoss loss = weighted_square_loss(weights);
  const ImageGradient g = enc.grad_image(loss, batch);

  std::uniform_int_distribution<int> pick_image(0, 2);
  std::uniform_int_distribution<Eigen::Index> pick_pixel(0, static_cast<Eigen::Index>(kGeom.size()) - 1);
  for (int t = 0; t < 25; ++t) {
    const int b = pick_image(rng);
    const Eigen::Index k = pick_pixel(rng);
    const auto f = [&](const Eigen::VectorXd& px) {
      auto copy = batch;
      copy[static_cast<std::size_t>(b)].values = px;
      return loss(enc.encode_image(copy)).value;
    };
    const double numeric = oracle::central_difference(f, batch[static_cast<std::size_t>(b)].values, k);
    EXPECT_LT(oracle::relative_error(g.pixels[static_cast<std::size_t>(b)].values[k], numeric, 1e-6), 1e-4)
        << "image " << b << " pixel " << k;
  }
}

TEST(ToyEncoder, GradientIsLinearInTheLoss) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(6);
  const auto batch = random_images(2, rng);
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Random(2, 8), w2 = Eigen::MatrixXd::Random(2, 8);
  const EmbeddingLoss l1 = weighted_square_loss(w1), l2 = weighted_square_loss(w2);
  const double a = 0.7, b = -1.9;
  const EmbeddingLoss combo = [&](const Eigen::MatrixXd& e) {
    const auto x = l1(e), y = l2(e);
    return EmbeddingLossValue{a * x.value + b * y.value, a * x.gradient + b * y.gradient};
  };
  const auto g1 = enc.grad_image(l1, batch), g2 = enc.grad_image(l2, batch), gc = enc.grad_image(combo, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd expect = a * g1.pixels[i].values + b * g2.pixels[i].values;
    EXPECT_LT((gc.pixels[i].values - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ToyEncoder, CallsArePure) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(7);
  const auto batch = random_images(2, rng);
  const Eigen::MatrixXd a = enc.encode_image(batch), b = enc.encode_image(batch);
  EXPECT_TRUE((a.array() == b.array()).all());
  const EmbeddingLoss loss = weighted_square_loss(Eigen::MatrixXd::Ones(2, 8));
  const auto g1 = enc.grad_image(loss, batch), g2 = enc.grad_image(loss, batch);
  EXPECT_TRUE((g1.pixels[1].values.array() == g2.pixels[1].values.array()).all());
  const std::vector<Tokens> caps{{"x", "y"}};
  EXPECT_TRUE((enc.encode_text(caps).array() == enc.encode_text(caps).array()).all());
}

TEST(ToyEncoder, WrongShapedLossGradientIsAContractError) {
  const ToyDualEncoder enc = make_encoder();
  Rng rng(8);
  const auto batch = random_images(2, rng);
  const EmbeddingLoss bad = [](const Eigen::MatrixXd&) { return EmbeddingLossValue{1.0, Eigen::MatrixXd::Ones(1, 1)}; };
  EXPECT_THROW((void)enc.grad_image(bad, batch), ContractError);
}

TEST(ToyEncoder, MaskTokenCarriesNoInformation) {
  const ToyDualEncoder enc = make_encoder();
  EXPECT_EQ(enc.token_vector(std::string(kMaskToken)).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::VectorXd masked = enc.encode_text(Tokens{"x", std::string(kMaskToken)});
  const Eigen::VectorXd plain = enc.encode_text(Tokens{"x"});
  EXPECT_LT((masked - plain).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adapter, ToySpecParsesOptions) {
  const auto a = make_adapter("toy:seed=3,dim=16,size=8x9x1", Geometry{32, 32, 3});
  EXPECT_EQ(a->embed_dim(), 16);
  EXPECT_EQ(a->input_geometry(), (Geometry{8, 9, 1}));
  const auto b = make_adapter("toy", Geometry{4, 4, 3});
  EXPECT_EQ(b->input_geometry(), (Geometry{4, 4, 3}));
  EXPECT_THROW(make_adapter("toy:bogus=1", kGeom), ConfigError);
  EXPECT_THROW(make_adapter("toy:size=8x8", kGeom), ConfigError);
  EXPECT_THROW(make_adapter("clip", kGeom), ConfigError);
  EXPECT_THROW(make_adapter("external:/nonexistent/lib.so", kGeom), ConfigError);
}

TEST(Adapter, ExternalLibraryIsLoaded) {
  const auto ext = make_adapter(std::string("external:") + TOY_PLUGIN_PATH + "?seed=4", kGeom);
  ToyEncoderOptions o;
  o.seed = 4;
  const ToyDualEncoder local(o);
  EXPECT_EQ(ext->input_geometry(), local.input_geometry());
  Tensor img = Tensor::constant(local.input_geometry(), 0.3);
  img.values[5] = 0.9;
  const Eigen::VectorXd a = ext->encode_image(img), b = local.encode_image(img);
  EXPECT_TRUE((a.array() == b.array()).all());
}

}  // namespace
}  // namespace uapforge
