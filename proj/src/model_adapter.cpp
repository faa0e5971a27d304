#include "uapforge/model_adapter.hpp"

#include <dlfcn.h>

#include <charconv>
#include <sstream>

#include "uapforge/errors.hpp"
#include "uapforge/toy_encoder.hpp"

namespace uapforge {

Eigen::VectorXd EncoderBundle::encode_image(const Tensor& image) const {
  return encode_image(std::span<const Tensor>(&image, 1)).row(0).transpose();
}

Eigen::VectorXd EncoderBundle::encode_text(const Tokens& caption) const {
  return encode_text(std::span<const Tokens>(&caption, 1)).row(0).transpose();
}

void check_image_batch(std::span<const Tensor> batch, const Geometry& expected) {
  if (batch.empty()) throw ContractError("image batch is empty");
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require_geometry(expected, batch[b].geometry, "image batch entry " + std::to_string(b));
  }
}

EmbeddingLossValue evaluate_embedding_loss(const EmbeddingLoss& loss, const Eigen::MatrixXd& embeddings) {
  EmbeddingLossValue lv = loss(embeddings);
  if (lv.gradient.rows() != embeddings.rows() || lv.gradient.cols() != embeddings.cols()) {
    throw ContractError("loss closure returned a " + std::to_string(lv.gradient.rows()) + "x" +
                        std::to_string(lv.gradient.cols()) + " gradient for " + std::to_string(embeddings.rows()) +
                        "x" + std::to_string(embeddings.cols()) + " embeddings; it must be a scalar function of them");
  }
  return lv;
}

namespace {

Geometry parse_geometry(std::string_view s) {
  Geometry g;
  int* fields[3] = {&g.height, &g.width, &g.channels};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? s.find('x', pos) : s.size();
    if (end == std::string_view::npos) throw ConfigError("bad geometry '" + std::string(s) + "', expected HxWxC");
    const auto part = s.substr(pos, end - pos);
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[i]);
    if (ec != std::errc() || p != part.data() + part.size()) {
      throw ConfigError("bad geometry '" + std::string(s) + "', expected HxWxC");
    }
    pos = end + 1;
  }
  return g;
}

std::unique_ptr<EncoderBundle> make_toy(std::string_view options, const Geometry& default_geometry) {
  ToyEncoderOptions opts;
  opts.geometry = default_geometry;
  std::string opt(options);
  std::stringstream ss(opt);
  std::string kv;
  while (std::getline(ss, kv, ',')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("toy adapter option '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
      if (key == "seed") opts.seed = std::stoull(val);
      else if (key == "dim") opts.embed_dim = std::stoi(val);
      else if (key == "gain") opts.gain = std::stod(val);
      else if (key == "size") opts.geometry = parse_geometry(val);
      else throw ConfigError("unknown toy adapter option '" + key + "' (known: seed, dim, gain, size)");
    } catch (const std::logic_error&) {
      throw ConfigError("toy adapter option '" + kv + "' has a malformed value");
    }
  }
  return std::make_unique<ToyDualEncoder>(opts);
}

// Keeps the library mapped for as long as the bundle it produced is alive.
class ExternalBundle final : public EncoderBundle {
 public:
  ExternalBundle(void* handle, EncoderBundle* inner) : handle_(handle), inner_(inner) {}
  ~ExternalBundle() override {
    inner_.reset();
    dlclose(handle_);
  }
  ExternalBundle(const ExternalBundle&) = delete;
  ExternalBundle& operator=(const ExternalBundle&) = delete;

  std::string name() const override { return inner_->name(); }
  Geometry input_geometry() const override { return inner_->input_geometry(); }
  int embed_dim() const override { return inner_->embed_dim(); }
  using EncoderBundle::encode_image;
  using EncoderBundle::encode_text;
  Eigen::MatrixXd encode_image(std::span<const Tensor> batch) const override { return inner_->encode_image(batch); }
  Eigen::MatrixXd encode_text(std::span<const Tokens> batch) const override { return inner_->encode_text(batch); }
  ImageGradient grad_image(const EmbeddingLoss& loss, std::span<const Tensor> batch) const override {
    return inner_->grad_image(loss, batch);
  }

 private:
  void* handle_;
  std::unique_ptr<EncoderBundle> inner_;
};

std::unique_ptr<EncoderBundle> make_external(std::string_view target) {
  const auto q = target.find('?');
  const std::string path(target.substr(0, q));
  const std::string options = q == std::string_view::npos ? "" : std::string(target.substr(q + 1));
  void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle) throw ConfigError("cannot load adapter library '" + path + "': " + dlerror());
  auto factory = reinterpret_cast<AdapterFactory>(dlsym(handle, kAdapterFactorySymbol));
  if (!factory) {
    dlclose(handle);
    throw ConfigError("adapter library '" + path + "' does not export " + kAdapterFactorySymbol);
  }
  EncoderBundle* inner = factory(options.c_str());
  if (!inner) {
    dlclose(handle);
    throw ConfigError("adapter library '" + path + "' returned no encoder for options '" + options + "'");
  }
  return std::make_unique<ExternalBundle>(handle, inner);
}

}  // namespace

std::unique_ptr<EncoderBundle> make_adapter(std::string_view spec, const Geometry& default_geometry) {
  if (spec == "toy") return make_toy("", default_geometry);
  if (spec.starts_with("toy:")) return make_toy(spec.substr(4), default_geometry);
  if (spec.starts_with("external:")) return make_external(spec.substr(9));
  throw ConfigError("unknown adapter '" + std::string(spec) + "' (expected 'toy', 'toy:<options>' or 'external:<path>')");
}

}  // namespace uapforge
