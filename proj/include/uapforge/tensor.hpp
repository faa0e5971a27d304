#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace uapforge {

/// Spatial layout of an image or perturbation. Data is stored HWC row-major.
struct Geometry {
  int height = 0;
  int width = 0;
  int channels = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  [[nodiscard]] std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  [[nodiscard]] bool valid() const { return height >= 1 && width >= 1 && channels >= 1; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Dense real field over a Geometry (images, gradients, resized perturbations).
struct Tensor {
  Geometry geometry;
  Eigen::VectorXd values;

  Tensor() = default;
  Tensor(Geometry g, Eigen::VectorXd v);
  static Tensor zeros(Geometry g);
  static Tensor constant(Geometry g, double value);

  [[nodiscard]] double& at(int y, int x, int c) { return values[static_cast<Eigen::Index>(geometry.index(y, x, c))]; }
  [[nodiscard]] double at(int y, int x, int c) const {
    return values[static_cast<Eigen::Index>(geometry.index(y, x, c))];
  }
};

/// Throws ShapeError naming `what` when the two geometries differ.
void require_geometry(const Geometry& expected, const Geometry& actual, const std::string& what);

/// Elementwise clamp of x + delta into [0, 1].
Tensor clip_unit(const Tensor& x, const Eigen::VectorXd& delta);

}  // namespace uapforge
