#include "wavegrad/bp_oracle.hpp"

#include "wavegrad/errors.hpp"

namespace wavegrad {

double LossSpec::value(const Vec& x, const Vec& y) const {
  if (x.size() != width || y.size() != width) throw ShapeError("loss: output/target width mismatch");
  return 0.5 * (x - y).squaredNorm();
}

Vec LossSpec::gradient(const Vec& x, const Vec& y) const {
  if (x.size() != width || y.size() != width) throw ShapeError("loss: output/target width mismatch");
  return x - y;
}

namespace {

void check_input(const LayeredNet& net, const Vec& u) {
  if (u.size() != net.width(0)) {
    throw ShapeError("input has " + std::to_string(u.size()) + " entries, network expects " +
                     std::to_string(net.width(0)));
  }
}

}  // namespace

std::vector<Vec> forward_instant(const LayeredNet& net, const Vec& u) {
  check_input(net, u);
  std::vector<Vec> x;
  x.reserve(static_cast<std::size_t>(net.depth()) + 1);
  x.push_back(u);
  for (int l = 0; l < net.depth(); ++l) x.push_back(affine_forward(net.weight(l), x.back(), net.activation()));
  return x;
}

std::vector<Mat> backprop_exact(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss) {
  check_input(net, u);
  const int depth = net.depth();
  const Activation act = net.activation();

  std::vector<Vec> x{u};
  std::vector<Vec> pre{Vec()};
  for (int l = 0; l < depth; ++l) {
    pre.push_back(net.weight(l) * x.back());
    x.push_back(act.value(pre.back()));
  }

  std::vector<Mat> grads(static_cast<std::size_t>(depth));
  Vec delta = loss.gradient(x.back(), y).cwiseProduct(act.d1(pre.back()));
  for (int l = depth; l >= 1; --l) {
    grads[static_cast<std::size_t>(l - 1)] = delta * x[static_cast<std::size_t>(l - 1)].transpose();
    if (l > 1) {
      delta = act.d1(pre[static_cast<std::size_t>(l - 1)])
                  .cwiseProduct(net.weight(l - 1).transpose() * delta);
    }
  }
  return grads;
}

double instant_loss(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss) {
  return loss.value(forward_instant(net, u).back(), y);
}

std::vector<Mat> grad_fd(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss,
                         double eps) {
  if (!(eps > 0.0)) throw DomainError("grad_fd: eps must be positive");
  std::vector<Mat> weights = net.weights();
  std::vector<Mat> grads;
  grads.reserve(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Mat g(weights[l].rows(), weights[l].cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const double w0 = weights[l](r, c);
        weights[l](r, c) = w0 + eps;
        const double up = instant_loss(net.with_weights(weights), u, y, loss);
        weights[l](r, c) = w0 - eps;
        const double down = instant_loss(net.with_weights(weights), u, y, loss);
        weights[l](r, c) = w0;
        g(r, c) = (up - down) / (2.0 * eps);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double relative_error(const Mat& a, const Mat& b) {
  const double diff = (a - b).norm();
  const double ref = b.norm();
  return ref > 0.0 ? diff / ref : diff;
}

}  // namespace wavegrad
