#include "uapforge/tensor.hpp"

#include "uapforge/errors.hpp"

namespace uapforge {

std::string Geometry::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Tensor::Tensor(Geometry g, Eigen::VectorXd v) : geometry(g), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != geometry.size()) {
    throw ShapeError("tensor payload has " + std::to_string(values.size()) + " values, geometry " +
                     geometry.str() + " needs " + std::to_string(geometry.size()));
  }
}

Tensor Tensor::zeros(Geometry g) { return constant(g, 0.0); }

Tensor Tensor::constant(Geometry g, double value) {
  return Tensor(g, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), value));
}

void require_geometry(const Geometry& expected, const Geometry& actual, const std::string& what) {
  if (expected != actual) {
    throw ShapeError(what + ": expected geometry " + expected.str() + ", got " + actual.str());
  }
}

Tensor clip_unit(const Tensor& x, const Eigen::VectorXd& delta) {
  if (delta.size() != x.values.size()) {
    throw ShapeError("perturbation has " + std::to_string(delta.size()) + " values, image has " +
                     std::to_string(x.values.size()));
  }
  return Tensor(x.geometry, (x.values + delta).cwiseMax(0.0).cwiseMin(1.0));
}

}  // namespace uapforge
