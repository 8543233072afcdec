#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "wavegrad/errors.hpp"
#include "wavegrad/net_core.hpp"

using namespace wavegrad;

namespace {

const double kGrid[] = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};

class ActivationDerivatives : public ::testing::TestWithParam<Activation::Kind> {};

TEST_P(ActivationDerivatives, FirstDerivativeMatchesCentralDifference) {
  const Activation act(GetParam());
  const double h = 1e-5;
  for (double z : kGrid) {
    const double fd = (act.value(z + h) - act.value(z - h)) / (2 * h);
    EXPECT_NEAR(act.d1(z), fd, 1e-6) << act.name() << " at " << z;
  }
}

TEST_P(ActivationDerivatives, SecondDerivativeMatchesCentralDifference) {
  const Activation act(GetParam());
  const double h = 1e-5;
  for (double z : kGrid) {
    const double fd = (act.d1(z + h) - act.d1(z - h)) / (2 * h);
    EXPECT_NEAR(act.d2(z), fd, 1e-5) << act.name() << " at " << z;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ActivationDerivatives,
                         ::testing::Values(Activation::Kind::identity, Activation::Kind::logistic,
                                           Activation::Kind::tanh));

TEST(Activation, ParsesNamesAndRejectsUnknown) {
  EXPECT_EQ(Activation::parse("tanh").kind(), Activation::Kind::tanh);
  EXPECT_EQ(Activation::parse("logistic").kind(), Activation::Kind::logistic);
  EXPECT_EQ(Activation::parse("identity").kind(), Activation::Kind::identity);
  EXPECT_THROW(Activation::parse("relu"), ParseError);
}

TEST(AffineForward, SmallCases) {
  const Activation id(Activation::Kind::identity);
  EXPECT_EQ(affine_forward(Mat::Constant(1, 1, 1.0), Vec::Zero(1), id)(0), 0.0);
  EXPECT_EQ(affine_forward(Mat::Constant(1, 1, 2.0), Vec::Constant(1, 3.0), id)(0), 6.0);
  // Independent scalar evaluation of tanh through exp.
  const double want = (std::exp(1.0) - 1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(affine_forward(Mat::Constant(1, 1, 1.0), Vec::Constant(1, 0.5), Activation(Activation::Kind::tanh))(0),
              want, 1e-15);
}

TEST(AffineForward, ShapeMismatchThrows) {
  EXPECT_THROW(affine_forward(Mat::Zero(2, 3), Vec::Zero(2), Activation(Activation::Kind::tanh)), ShapeError);
}

TEST(AffineForward, RejectsNonFiniteInput) {
  Vec x = Vec::Zero(1);
  x(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(affine_forward(Mat::Constant(1, 1, 1.0), x, Activation(Activation::Kind::identity)), DomainError);
}

TEST(NewLayered, ExplicitSingleLayer) {
  const auto net = new_layered({1, 1}, Activation(Activation::Kind::identity), ExplicitInit{{Mat::Constant(1, 1, 1.0)}});
  EXPECT_EQ(net.depth(), 1);
  EXPECT_EQ(net.weight(0)(0, 0), 1.0);
}

TEST(NewLayered, TenWidthsGiveNineLayers) {
  const auto net = new_layered(std::vector<int>(10, 8), Activation(Activation::Kind::tanh), UniformInit{3});
  EXPECT_EQ(net.depth(), 9);
  for (int l = 0; l < 9; ++l) {
    EXPECT_EQ(net.weight(l).rows(), 8);
    EXPECT_LE(net.weight(l).cwiseAbs().maxCoeff(), 0.5);
  }
}

TEST(NewLayered, SeededInitIsDeterministic) {
  const std::vector<int> w{3, 5, 2};
  const Activation act(Activation::Kind::tanh);
  EXPECT_TRUE(new_layered(w, act, UniformInit{42}) == new_layered(w, act, UniformInit{42}));
  EXPECT_FALSE(new_layered(w, act, UniformInit{42}) == new_layered(w, act, UniformInit{43}));
}

TEST(NewLayered, RejectsBadWidthsAndShapes) {
  const Activation act(Activation::Kind::tanh);
  EXPECT_THROW(new_layered({}, act), ShapeError);
  EXPECT_THROW(new_layered({4}, act), ShapeError);
  EXPECT_THROW(new_layered({2, 0}, act), ShapeError);
  EXPECT_THROW(new_layered({2, 3}, act, ExplicitInit{{Mat::Zero(2, 3)}}), ShapeError);
  EXPECT_THROW(new_layered({2, 3}, act, ExplicitInit{{}}), ShapeError);
}

TEST(LayeredNet, JsonRoundTripIsRowMajor) {
  Mat w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  const auto net = new_layered({3, 2}, Activation(Activation::Kind::logistic), ExplicitInit{{w}});
  const auto doc = net.to_json();
  EXPECT_EQ(doc["weights"][0][0], (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(doc["activation"], "logistic");
  EXPECT_TRUE(LayeredNet::from_json(doc) == net);
}

TEST(LayeredNet, WithWeightCopies) {
  const auto net = new_layered({2, 2}, Activation(Activation::Kind::tanh), UniformInit{1});
  const auto other = net.with_weight(0, Mat::Zero(2, 2));
  EXPECT_NE(net.weight(0).norm(), 0.0);
  EXPECT_EQ(other.weight(0).norm(), 0.0);
  EXPECT_THROW(net.with_weight(0, Mat::Zero(3, 2)), ShapeError);
}

}  // namespace
