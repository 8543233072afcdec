#include "wavegrad/net_core.hpp"

#include <cmath>
#include <random>

#include "wavegrad/errors.hpp"

namespace wavegrad {

Activation Activation::parse(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation(Kind::identity);
  if (name == "logistic" || name == "sigmoid") return Activation(Kind::logistic);
  if (name == "tanh") return Activation(Kind::tanh);
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

std::string_view Activation::name() const noexcept {
  switch (kind_) {
    case Kind::identity: return "identity";
    case Kind::logistic: return "logistic";
    case Kind::tanh: return "tanh";
  }
  return "identity";
}

double Activation::value(double a) const noexcept {
  switch (kind_) {
    case Kind::identity: return a;
    case Kind::logistic: return 1.0 / (1.0 + std::exp(-a));
    case Kind::tanh: return std::tanh(a);
  }
  return a;
}

double Activation::d1(double a) const noexcept {
  switch (kind_) {
    case Kind::identity: return 1.0;
    case Kind::logistic: {
      const double s = value(a);
      return s * (1.0 - s);
    }
    case Kind::tanh: {
      const double t = std::tanh(a);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

double Activation::d2(double a) const noexcept {
  switch (kind_) {
    case Kind::identity: return 0.0;
    case Kind::logistic: {
      const double s = value(a);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Kind::tanh: {
      const double t = std::tanh(a);
      return -2.0 * t * (1.0 - t * t);
    }
  }
  return 0.0;
}

Vec Activation::value(const Vec& a) const {
  return a.unaryExpr([this](double v) { return value(v); });
}

Vec Activation::d1(const Vec& a) const {
  return a.unaryExpr([this](double v) { return d1(v); });
}

void require_finite(const Vec& v, std::string_view what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite entry");
}

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite entry");
}

namespace {

void check_chain(const std::vector<int>& widths, const std::vector<Mat>& weights) {
  if (widths.size() < 2) throw ShapeError("layered net needs at least two widths");
  for (int n : widths) {
    if (n <= 0) throw ShapeError("layer widths must be positive");
  }
  if (weights.size() + 1 != widths.size()) {
    throw ShapeError("expected " + std::to_string(widths.size() - 1) + " weight matrices, got " +
                     std::to_string(weights.size()));
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != widths[l + 1] || weights[l].cols() != widths[l]) {
      throw ShapeError("W_" + std::to_string(l) + " has shape " + std::to_string(weights[l].rows()) +
                       "x" + std::to_string(weights[l].cols()) + ", expected " +
                       std::to_string(widths[l + 1]) + "x" + std::to_string(widths[l]));
    }
    require_finite(weights[l], "weight matrix");
  }
}

}  // namespace

LayeredNet::LayeredNet(std::vector<int> widths, Activation activation, std::vector<Mat> weights)
    : widths_(std::move(widths)), activation_(activation), weights_(std::move(weights)) {
  check_chain(widths_, weights_);
}

LayeredNet LayeredNet::with_weight(int l, Mat w) const {
  std::vector<Mat> next = weights_;
  next.at(static_cast<std::size_t>(l)) = std::move(w);
  return LayeredNet(widths_, activation_, std::move(next));
}

LayeredNet LayeredNet::with_weights(std::vector<Mat> weights) const {
  return LayeredNet(widths_, activation_, std::move(weights));
}

bool operator==(const LayeredNet& a, const LayeredNet& b) {
  if (a.widths_ != b.widths_ || a.activation_ != b.activation_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l] != b.weights_[l]) return false;
  }
  return true;
}

nlohmann::json LayeredNet::to_json() const {
  nlohmann::json weights = nlohmann::json::array();
  for (const Mat& w : weights_) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
  }
  return {{"widths", widths_}, {"activation", activation_.name()}, {"weights", std::move(weights)}};
}

LayeredNet LayeredNet::from_json(const nlohmann::json& doc) {
  try {
    auto widths = doc.at("widths").get<std::vector<int>>();
    auto act = Activation::parse(doc.at("activation").get<std::string>());
    std::vector<Mat> weights;
    for (const auto& rows : doc.at("weights")) {
      const auto nr = static_cast<Eigen::Index>(rows.size());
      const auto nc = nr == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.at(0).size());
      Mat w(nr, nc);
      for (Eigen::Index r = 0; r < nr; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != nc) throw ParseError("ragged weight matrix");
        for (Eigen::Index c = 0; c < nc; ++c) w(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      }
      weights.push_back(std::move(w));
    }
    return LayeredNet(std::move(widths), act, std::move(weights));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("layered net json: ") + e.what());
  }
}

Vec affine_forward(const Mat& w, const Vec& x, Activation act) {
  if (w.cols() != x.size()) {
    throw ShapeError("affine_forward: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " but x has " + std::to_string(x.size()) + " entries");
  }
  Vec out = act.value(Vec(w * x));
  require_finite(out, "affine_forward");
  return out;
}

LayeredNet new_layered(const std::vector<int>& widths, Activation activation, const WeightInit& init) {
  if (widths.size() < 2) throw ShapeError("new_layered: need at least two widths");
  if (const auto* given = std::get_if<ExplicitInit>(&init)) {
    return LayeredNet(widths, activation, given->weights);
  }
  const auto& uni = std::get<UniformInit>(init);
  if (!(uni.scale >= 0.0)) throw DomainError("new_layered: init scale must be nonnegative");
  std::mt19937_64 rng(uni.seed);
  std::uniform_real_distribution<double> dist(-uni.scale, uni.scale);
  std::vector<Mat> weights;
  weights.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] <= 0 || widths[l + 1] <= 0) throw ShapeError("layer widths must be positive");
    Mat w(widths[l + 1], widths[l]);
    // Row-major fill so the draw order matches the JSON layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    weights.push_back(std::move(w));
  }
  return LayeredNet(widths, activation, std::move(weights));
}

}  // namespace wavegrad
