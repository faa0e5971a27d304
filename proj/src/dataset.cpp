#include "uapforge/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include <png.h>

#include <json.hpp>

#include "uapforge/errors.hpp"
#include "uapforge/toy_world.hpp"

namespace uapforge {

namespace fs = std::filesystem;
using nlohmann::json;

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

PairedDataset::PairedDataset(std::vector<CaptionedImage> items, Geometry geometry)
    : items_(std::move(items)), geometry_(geometry) {
  if (items_.empty()) throw ContractError("empty dataset");
  if (!geometry_.valid()) throw ShapeError("dataset geometry must be non-empty, got " + geometry_.str());
  for (const auto& item : items_) {
    require_geometry(geometry_, item.image.pixels.geometry, "image '" + item.image.id + "'");
    const auto& v = item.image.pixels.values;
    if (!v.allFinite() || v.minCoeff() < 0.0 || v.maxCoeff() > 1.0) {
      throw CorruptionError("image '" + item.image.id + "' has pixels outside [0, 1]");
    }
    if (item.captions.empty()) throw ContractError("image '" + item.image.id + "' has no captions");
    for (const auto& cap : item.captions) {
      if (cap.empty()) throw ContractError("image '" + item.image.id + "' has an empty caption");
      vocabulary_.insert(cap.begin(), cap.end());
    }
    n_t_ += item.captions.size();
  }
}

namespace {

Tensor read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw CorruptionError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const bool wide = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? (wide ? PNG_FORMAT_LINEAR_RGB : PNG_FORMAT_RGB) : (wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY);
  const int channels = color ? 3 : 1;
  Geometry g{static_cast<int>(img.height), static_cast<int>(img.width), channels};
  Tensor out = Tensor::zeros(g);
  if (wide) {
    std::vector<png_uint_16> buf(PNG_IMAGE_SIZE(img) / 2);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
      throw CorruptionError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    for (std::size_t i = 0; i < g.size(); ++i) out.values[static_cast<Eigen::Index>(i)] = buf[i] / 65535.0;
  } else {
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
      throw CorruptionError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    for (std::size_t i = 0; i < g.size(); ++i) out.values[static_cast<Eigen::Index>(i)] = buf[i] / 255.0;
  }
  return out;
}

Tensor read_raw(const fs::path& path) {
  const fs::path sidecar = path.string() + ".json";
  std::ifstream hs(sidecar);
  if (!hs) throw LoadError("missing geometry sidecar " + sidecar.string());
  Geometry g;
  try {
    const json h = json::parse(hs);
    g = {h.at("height").get<int>(), h.at("width").get<int>(), h.at("channels").get<int>()};
  } catch (const json::exception& e) {
    throw CorruptionError("bad geometry sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!g.valid()) throw CorruptionError("sidecar " + sidecar.string() + " declares empty geometry");
  std::ifstream is(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() != g.size() * 4) {
    throw CorruptionError("raw image " + path.string() + " has " + std::to_string(bytes.size()) +
                          " bytes, geometry " + g.str() + " needs " + std::to_string(g.size() * 4));
  }
  Tensor out = Tensor::zeros(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    if (!std::isfinite(f) || f < 0.0f || f > 1.0f) {
      throw CorruptionError("raw image " + path.string() + " has value " + std::to_string(f) +
                            " outside [0, 1] at index " + std::to_string(i));
    }
    out.values[static_cast<Eigen::Index>(i)] = f;
  }
  return out;
}

}  // namespace

Tensor read_image(const fs::path& path) {
  if (!fs::exists(path)) throw LoadError("image file not found: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" ? read_png(path) : read_raw(path);
}

void write_raw_image(const Tensor& image, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < image.values.size(); ++i) {
    const float f = static_cast<float>(image.values[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  std::ofstream hs(path.string() + ".json");
  hs << json{{"height", image.geometry.height}, {"width", image.geometry.width}, {"channels", image.geometry.channels}}
            .dump()
     << '\n';
}

void write_png(const Tensor& image, const fs::path& path) {
  const Geometry& g = image.geometry;
  if (g.channels != 1 && g.channels != 3) throw ShapeError("PNG output needs 1 or 3 channels, got " + g.str());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(g.width);
  img.height = static_cast<png_uint_32>(g.height);
  img.format = g.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(image.values[static_cast<Eigen::Index>(i)], 0.0, 1.0) * 255.0));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw LoadError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

PairedDataset load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<CaptionedImage> items;
  std::optional<Geometry> geometry;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = path.string() + " line " + std::to_string(lineno);
    CaptionedImage item;
    std::string image_ref;
    try {
      const json rec = json::parse(line);
      item.image.id = rec.at("id").get<std::string>();
      image_ref = rec.at("image").get<std::string>();
      for (const auto& c : rec.at("captions")) item.captions.push_back(tokenize(c.get<std::string>()));
    } catch (const json::exception& e) {
      throw LoadError(where + ": malformed record: " + e.what());
    }
    if (item.captions.empty()) throw LoadError(where + ": record has no captions");
    for (const auto& c : item.captions) {
      if (c.empty()) throw LoadError(where + ": caption is empty after tokenization");
    }
    const fs::path image_path = base / image_ref;
    try {
      item.image.pixels = read_image(image_path);
    } catch (const CorruptionError& e) {
      throw CorruptionError(where + ": " + e.what());
    } catch (const Error& e) {
      throw LoadError(where + ": " + e.what());
    }
    if (!geometry) geometry = item.image.pixels.geometry;
    if (*geometry != item.image.pixels.geometry) {
      throw LoadError(where + ": image geometry " + item.image.pixels.geometry.str() + " differs from " +
                      geometry->str());
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw LoadError("empty dataset: " + path.string());
  return PairedDataset(std::move(items), *geometry);
}

fs::path write_manifest(const PairedDataset& dataset, const fs::path& directory) {
  fs::create_directories(directory / "images");
  const fs::path manifest = directory / "manifest.jsonl";
  std::ofstream os(manifest);
  if (!os) throw LoadError("cannot write " + manifest.string());
  for (const auto& item : dataset.items()) {
    const std::string rel = "images/" + item.image.id + ".f32";
    write_raw_image(item.image.pixels, directory / rel);
    json caps = json::array();
    for (const auto& c : item.captions) caps.push_back(join_tokens(c));
    os << json{{"id", item.image.id}, {"image", rel}, {"captions", caps}}.dump() << '\n';
  }
  return manifest;
}

std::vector<CaptionPair> expand_by_captions(const PairedDataset& dataset) {
  std::vector<CaptionPair> out;
  out.reserve(dataset.n_t());
  for (const auto& item : dataset.items()) {
    for (const auto& cap : item.captions) out.push_back({&item.image, &cap});
  }
  return out;
}

PairedDataset synth_toy_dataset(std::uint64_t seed, std::size_t n, Geometry geometry, std::size_t vocab_size,
                                std::size_t caption_len) {
  if (n < 1 || vocab_size < 1 || caption_len < 1 || !geometry.valid()) {
    throw ParameterError("synth_toy_dataset needs n, vocab_size, caption_len >= 1 and a non-empty geometry");
  }
  Rng rng = derive_stream(seed, "synth-dataset");
  std::vector<std::string> vocab;
  const int width = static_cast<int>(std::to_string(vocab_size - 1).size());
  for (std::size_t v = 0; v < vocab_size; ++v) {
    std::string num = std::to_string(v);
    vocab.push_back("w" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
  }
  std::uniform_int_distribution<std::size_t> pick(0, vocab_size - 1);
  std::normal_distribution<double> noise(0.0, toy::kPixelNoise);

  std::vector<CaptionedImage> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CaptionedImage item;
    std::string num = std::to_string(i);
    item.image.id = "toy-" + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(geometry.size()));
    for (int k = 0; k < 2; ++k) {
      Tokens cap;
      for (std::size_t t = 0; t < caption_len; ++t) {
        cap.push_back(vocab[pick(rng)]);
        mix += toy::token_glyph(cap.back(), geometry).values;
      }
      item.captions.push_back(std::move(cap));
    }
    mix /= static_cast<double>(2 * caption_len);
    Eigen::VectorXd px(mix.size());
    for (Eigen::Index j = 0; j < px.size(); ++j) {
      px[j] = std::clamp(0.5 + toy::kGlyphAmplitude * mix[j] + noise(rng), 0.0, 1.0);
    }
    item.image.pixels = Tensor(geometry, std::move(px));
    items.push_back(std::move(item));
  }
  return PairedDataset(std::move(items), geometry);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace uapforge
