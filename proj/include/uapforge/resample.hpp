#pragma once

#include <vector>

#include "uapforge/rng.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

/// Axis-aligned pixel window inside a source geometry.
struct CropWindow {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  static CropWindow full(const Geometry& g) { return {0, 0, g.height, g.width}; }
  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

/// Draws a window whose side fractions are uniform in [lo, hi] and whose
/// position is uniform over all placements. Throws ParameterError when a side
/// would round below one pixel or the range is malformed.
CropWindow draw_crop(const Geometry& g, double lo, double hi, Rng& rng);

/// Bilinear resampling of a window of `source` onto `target` (half-pixel
/// centres, edge clamped). Every output is a convex combination of at most
/// four inputs, so constants are preserved and sup-norms never grow.
///
/// The map is linear; `adjoint` applies its transpose, which is what
/// backpropagation through a crop-and-resize needs.
class BilinearResampler {
 public:
  BilinearResampler(Geometry source, CropWindow window, Geometry target);
  BilinearResampler(Geometry source, Geometry target)
      : BilinearResampler(source, CropWindow::full(source), target) {}

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& input) const;
  [[nodiscard]] Eigen::VectorXd adjoint(const Eigen::VectorXd& output_grad) const;
  [[nodiscard]] Tensor apply(const Tensor& input) const;

  [[nodiscard]] const Geometry& source() const { return source_; }
  [[nodiscard]] const Geometry& target() const { return target_; }
  [[nodiscard]] const CropWindow& window() const { return window_; }
  [[nodiscard]] bool is_identity() const { return identity_; }

 private:
  struct Axis {
    int lo;
    int hi;
    double frac;
  };
  static std::vector<Axis> axis_taps(int offset, int src_extent, int dst_extent);

  Geometry source_;
  CropWindow window_;
  Geometry target_;
  std::vector<Axis> rows_;
  std::vector<Axis> cols_;
  bool identity_ = false;
};

}  // namespace uapforge
