#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "uapforge/rng.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

using Tokens = std::vector<std::string>;

/// Lowercases, strips ASCII punctuation and splits on whitespace.
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);

/// One image with pixels in [0, 1].
struct ImageSample {
  std::string id;
  Tensor pixels;
};

struct CaptionedImage {
  ImageSample image;
  std::vector<Tokens> captions;  // k >= 1, each non-empty
};

/// Borrowed (image, caption) view into a PairedDataset.
struct CaptionPair {
  const ImageSample* image = nullptr;
  const Tokens* caption = nullptr;
};

class PairedDataset {
 public:
  /// Validates the pixel range, geometry and caption invariants.
  PairedDataset(std::vector<CaptionedImage> items, Geometry geometry);

  [[nodiscard]] const std::vector<CaptionedImage>& items() const { return items_; }
  [[nodiscard]] const Geometry& geometry() const { return geometry_; }
  [[nodiscard]] const std::set<std::string>& vocabulary() const { return vocabulary_; }
  [[nodiscard]] std::size_t n() const { return items_.size(); }
  [[nodiscard]] std::size_t n_t() const { return n_t_; }

 private:
  std::vector<CaptionedImage> items_;
  Geometry geometry_;
  std::set<std::string> vocabulary_;
  std::size_t n_t_ = 0;
};

/// Reads a JSONL manifest ({"id", "image", "captions"} per line). Image paths
/// are relative to the manifest's directory.
PairedDataset load_manifest(const std::filesystem::path& path);

/// Writes `dataset` as a manifest plus one raw float32 image per item into
/// `directory`; returns the manifest path.
std::filesystem::path write_manifest(const PairedDataset& dataset, const std::filesystem::path& directory);

/// Image files: PNG (8 or 16 bit) or raw little-endian float32 HWC with a
/// JSON sidecar `<file>.json` holding {"height", "width", "channels"}.
Tensor read_image(const std::filesystem::path& path);
void write_raw_image(const Tensor& image, const std::filesystem::path& path);
void write_png(const Tensor& image, const std::filesystem::path& path);

/// One entry per (image, caption), manifest order then caption order.
std::vector<CaptionPair> expand_by_captions(const PairedDataset& dataset);

/// Desk-scale fixture: every image is a noisy superposition of the glyphs of
/// the tokens in its two captions (see toy_world.hpp), so a ToyDualEncoder
/// retrieves it well. Same arguments give a bit-identical dataset.
PairedDataset synth_toy_dataset(std::uint64_t seed, std::size_t n, Geometry geometry, std::size_t vocab_size,
                                std::size_t caption_len);

/// Index batches for one epoch: a single shuffle of [0, count) split into
/// chunks of `batch_size` (the last may be short).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng);

}  // namespace uapforge
