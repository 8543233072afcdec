#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace wavegrad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Pointwise neural nonlinearity. All supported kinds are C^2, which the
/// constrained dynamics rely on (second derivatives enter the multiplier
/// right-hand side).
class Activation {
 public:
  enum class Kind { identity, logistic, tanh };

  constexpr Activation() = default;
  constexpr explicit Activation(Kind kind) : kind_(kind) {}

  static Activation parse(std::string_view name);

  Kind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  double value(double a) const noexcept;
  double d1(double a) const noexcept;
  double d2(double a) const noexcept;

  Vec value(const Vec& a) const;
  Vec d1(const Vec& a) const;

  friend bool operator==(Activation, Activation) = default;

 private:
  Kind kind_ = Kind::identity;
};

/// Weights sampled uniformly in [-scale, scale] from a seeded engine.
struct UniformInit {
  std::uint64_t seed = 0;
  double scale = 0.5;
};

/// Weights given verbatim, W_0..W_{L-1}.
struct ExplicitInit {
  std::vector<Mat> weights;
};

using WeightInit = std::variant<UniformInit, ExplicitInit>;

/// Dense layered network without biases: x_{l+1} = sigma(W_l x_l).
/// Layer 0 is the input; W_l maps layer l to layer l+1 and has shape
/// n_{l+1} x n_l.
class LayeredNet {
 public:
  LayeredNet(std::vector<int> widths, Activation activation, std::vector<Mat> weights);

  int depth() const noexcept { return static_cast<int>(weights_.size()); }
  const std::vector<int>& widths() const noexcept { return widths_; }
  int width(int layer) const { return widths_.at(static_cast<std::size_t>(layer)); }
  const std::vector<Mat>& weights() const noexcept { return weights_; }
  const Mat& weight(int l) const { return weights_.at(static_cast<std::size_t>(l)); }
  Activation activation() const noexcept { return activation_; }

  /// Copy of this network with W_l replaced.
  LayeredNet with_weight(int l, Mat w) const;
  /// Copy of this network with every weight matrix replaced.
  LayeredNet with_weights(std::vector<Mat> weights) const;

  nlohmann::json to_json() const;
  static LayeredNet from_json(const nlohmann::json& doc);

  friend bool operator==(const LayeredNet& a, const LayeredNet& b);

 private:
  std::vector<int> widths_;
  Activation activation_;
  std::vector<Mat> weights_;
};

/// sigma(W x), componentwise.
Vec affine_forward(const Mat& w, const Vec& x, Activation act);

LayeredNet new_layered(const std::vector<int>& widths, Activation activation,
                       const WeightInit& init = UniformInit{});

/// Throws DomainError if any entry is NaN or infinite.
void require_finite(const Vec& v, std::string_view what);
void require_finite(const Mat& m, std::string_view what);

}  // namespace wavegrad
