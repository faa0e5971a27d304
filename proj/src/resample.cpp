#include "uapforge/resample.hpp"

#include <algorithm>
#include <cmath>

#include "uapforge/errors.hpp"

namespace uapforge {

CropWindow draw_crop(const Geometry& g, double lo, double hi, Rng& rng) {
  if (!(lo > 0.0) || !(hi <= 1.0) || lo > hi) {
    throw ParameterError("crop scale range must satisfy 0 < lo <= hi <= 1, got (" + std::to_string(lo) +
                         ", " + std::to_string(hi) + ")");
  }
  std::uniform_real_distribution<double> frac(lo, hi);
  const double fh = lo == hi ? lo : frac(rng);
  const double fw = lo == hi ? lo : frac(rng);
  const int h = static_cast<int>(std::lround(fh * g.height));
  const int w = static_cast<int>(std::lround(fw * g.width));
  if (h < 1 || w < 1) {
    throw ParameterError("crop of " + g.str() + " with fractions (" + std::to_string(fh) + ", " +
                         std::to_string(fw) + ") is smaller than one pixel");
  }
  CropWindow win{0, 0, std::min(h, g.height), std::min(w, g.width)};
  if (win.height < g.height) win.top = std::uniform_int_distribution<int>(0, g.height - win.height)(rng);
  if (win.width < g.width) win.left = std::uniform_int_distribution<int>(0, g.width - win.width)(rng);
  return win;
}

std::vector<BilinearResampler::Axis> BilinearResampler::axis_taps(int offset, int src_extent, int dst_extent) {
  std::vector<Axis> taps(static_cast<std::size_t>(dst_extent));
  const double scale = static_cast<double>(src_extent) / static_cast<double>(dst_extent);
  for (int d = 0; d < dst_extent; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src_extent - 1);
    taps[static_cast<std::size_t>(d)] = {offset + lo, offset + hi, s - lo};
  }
  return taps;
}

BilinearResampler::BilinearResampler(Geometry source, CropWindow window, Geometry target)
    : source_(source), window_(window), target_(target) {
  if (!source.valid() || !target.valid()) {
    throw ParameterError("resample geometries must be non-empty, got " + source.str() + " -> " + target.str());
  }
  if (source.channels != target.channels) {
    throw ShapeError("resample cannot change channel count (" + source.str() + " -> " + target.str() + ")");
  }
  if (window.height < 1 || window.width < 1 || window.top < 0 || window.left < 0 ||
      window.top + window.height > source.height || window.left + window.width > source.width) {
    throw ParameterError("crop window out of bounds for " + source.str());
  }
  rows_ = axis_taps(window.top, window.height, target.height);
  cols_ = axis_taps(window.left, window.width, target.width);
  identity_ = source == target && window == CropWindow::full(source);
}

Eigen::VectorXd BilinearResampler::apply(const Eigen::VectorXd& input) const {
  if (static_cast<std::size_t>(input.size()) != source_.size()) {
    throw ShapeError("resample input has " + std::to_string(input.size()) + " values, expected " +
                     std::to_string(source_.size()));
  }
  if (identity_) return input;
  Eigen::VectorXd out(static_cast<Eigen::Index>(target_.size()));
  const int C = source_.channels;
  for (int y = 0; y < target_.height; ++y) {
    const Axis& r = rows_[static_cast<std::size_t>(y)];
    for (int x = 0; x < target_.width; ++x) {
      const Axis& q = cols_[static_cast<std::size_t>(x)];
      for (int c = 0; c < C; ++c) {
        const double a = input[static_cast<Eigen::Index>(source_.index(r.lo, q.lo, c))];
        const double b = input[static_cast<Eigen::Index>(source_.index(r.lo, q.hi, c))];
        const double d = input[static_cast<Eigen::Index>(source_.index(r.hi, q.lo, c))];
        const double e = input[static_cast<Eigen::Index>(source_.index(r.hi, q.hi, c))];
        // lerp form keeps constants exact
        const double top = a + q.frac * (b - a);
        const double bottom = d + q.frac * (e - d);
        out[static_cast<Eigen::Index>(target_.index(y, x, c))] = top + r.frac * (bottom - top);
      }
    }
  }
  return out;
}

Eigen::VectorXd BilinearResampler::adjoint(const Eigen::VectorXd& output_grad) const {
  if (static_cast<std::size_t>(output_grad.size()) != target_.size()) {
    throw ShapeError("resample adjoint input has " + std::to_string(output_grad.size()) +
                     " values, expected " + std::to_string(target_.size()));
  }
  if (identity_) return output_grad;
  Eigen::VectorXd in = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(source_.size()));
  const int C = source_.channels;
  for (int y = 0; y < target_.height; ++y) {
    const Axis& r = rows_[static_cast<std::size_t>(y)];
    for (int x = 0; x < target_.width; ++x) {
      const Axis& q = cols_[static_cast<std::size_t>(x)];
      const double w00 = (1.0 - r.frac) * (1.0 - q.frac);
      const double w01 = (1.0 - r.frac) * q.frac;
      const double w10 = r.frac * (1.0 - q.frac);
      const double w11 = r.frac * q.frac;
      for (int c = 0; c < C; ++c) {
        const double g = output_grad[static_cast<Eigen::Index>(target_.index(y, x, c))];
        in[static_cast<Eigen::Index>(source_.index(r.lo, q.lo, c))] += w00 * g;
        in[static_cast<Eigen::Index>(source_.index(r.lo, q.hi, c))] += w01 * g;
        in[static_cast<Eigen::Index>(source_.index(r.hi, q.lo, c))] += w10 * g;
        in[static_cast<Eigen::Index>(source_.index(r.hi, q.hi, c))] += w11 * g;
      }
    }
  }
  return in;
}

Tensor BilinearResampler::apply(const Tensor& input) const {
  require_geometry(source_, input.geometry, "resample input");
  return Tensor(target_, apply(input.values));
}

}  // namespace uapforge
