#pragma once

#include <string_view>

#include "uapforge/tensor.hpp"

namespace uapforge::toy {

/// Amplitude with which token glyphs are drawn into synthetic images.
inline constexpr double kGlyphAmplitude = 0.9;
/// Std of the per-pixel Gaussian noise in synthetic images.
inline constexpr double kPixelNoise = 0.03;

/// Smooth pattern in [-1, 1] associated with a token: a 4x4 grid of hashed
/// values upsampled bilinearly to `g`. Pure function of (token, g).
Tensor token_glyph(std::string_view token, const Geometry& g);

}  // namespace uapforge::toy
