#include "uapforge/persistence.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include <json.hpp>

#include "uapforge/errors.hpp"

namespace uapforge {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::span<const unsigned char> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

float get_f32(std::span<const unsigned char> b, std::size_t at) {
  const std::uint32_t bits = get_u32(b, at);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

std::uint32_t crc_of(std::span<const unsigned char> b) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), b.data(), static_cast<uInt>(b.size())));
}

}  // namespace

std::vector<unsigned char> encode_uap(const ImageUAP& uap) {
  uap.validate();
  std::vector<unsigned char> out(uap_format::kMagic, uap_format::kMagic + 4);
  put_u32(out, uap_format::kVersion);
  put_u32(out, static_cast<std::uint32_t>(uap.geometry.height));
  put_u32(out, static_cast<std::uint32_t>(uap.geometry.width));
  put_u32(out, static_cast<std::uint32_t>(uap.geometry.channels));
  put_f32(out, uap.epsilon);
  put_u32(out, uap_format::kFloat32);
  for (Eigen::Index i = 0; i < uap.delta.size(); ++i) put_f32(out, uap.delta[i]);
  put_u32(out, crc_of(out));
  return out;
}

ImageUAP decode_uap(std::span<const unsigned char> bytes) {
  using namespace uap_format;
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw CorruptionError("UAP file truncated: " + std::to_string(bytes.size()) + " bytes");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CorruptionError("not a UAP file (bad magic)");
  const std::size_t body = bytes.size() - kTrailerSize;
  if (get_u32(bytes, body) != crc_of(bytes.first(body))) throw CorruptionError("UAP checksum mismatch");
  if (get_u32(bytes, 4) != kVersion) throw CorruptionError("unsupported UAP version " + std::to_string(get_u32(bytes, 4)));
  if (get_u32(bytes, 24) != kFloat32) throw CorruptionError("unsupported UAP dtype tag");
  const Geometry g{static_cast<int>(get_u32(bytes, 8)), static_cast<int>(get_u32(bytes, 12)),
                   static_cast<int>(get_u32(bytes, 16))};
  if (!g.valid()) throw CorruptionError("UAP header declares empty geometry " + g.str());
  if (body - kHeaderSize != g.size() * 4) {
    throw CorruptionError("UAP payload has " + std::to_string(body - kHeaderSize) + " bytes, geometry " + g.str() +
                          " needs " + std::to_string(g.size() * 4));
  }
  ImageUAP uap{g, Eigen::VectorXf(static_cast<Eigen::Index>(g.size())), get_f32(bytes, 20)};
  for (std::size_t i = 0; i < g.size(); ++i) uap.delta[static_cast<Eigen::Index>(i)] = get_f32(bytes, kHeaderSize + 4 * i);
  uap.validate();
  return uap;
}

void save_uap(const ImageUAP& uap, const fs::path& path) {
  const std::vector<unsigned char> bytes = encode_uap(uap);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ImageUAP load_uap(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_uap(bytes);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot write " + path.string());
  os << text;
}

std::string triggers_to_json(const TriggerArtifact& a) {
  ordered_json ranked = ordered_json::array();
  for (const auto& s : a.lexicon.ranked) ranked.push_back({{"token", s.token}, {"score", s.score}});
  ordered_json j;
  j["ranked"] = ranked;
  j["trigger"] = a.trigger.token;
  j["policy"] = to_string(a.trigger.policy);
  j["budget"] = a.trigger.budget;
  return j.dump(2) + "\n";
}

TriggerArtifact triggers_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    TriggerArtifact a;
    for (const auto& r : j.at("ranked")) a.lexicon.ranked.push_back({r.at("token").get<std::string>(), r.at("score").get<double>()});
    a.trigger.token = j.at("trigger").get<std::string>();
    a.trigger.policy = parse_trigger_policy(j.at("policy").get<std::string>());
    a.trigger.budget = j.at("budget").get<int>();
    return a;
  } catch (const ordered_json::exception& e) {
    throw CorruptionError(std::string("malformed triggers JSON: ") + e.what());
  }
}

void save_triggers(const TriggerArtifact& a, const fs::path& path) { write_text_file(path, triggers_to_json(a)); }
TriggerArtifact load_triggers(const fs::path& path) { return triggers_from_json(read_text_file(path)); }

namespace {

ordered_json scores_json(const AttackReport& r, const std::map<int, DirectionScores>& m) {
  ordered_json i2t = ordered_json::object();
  ordered_json t2i = ordered_json::object();
  for (int k : r.ks) {
    i2t[std::to_string(k)] = m.at(k).i2t;
    t2i[std::to_string(k)] = m.at(k).t2i;
  }
  return {{"i2t", i2t}, {"t2i", t2i}};
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string report_to_json(const AttackReport& r) {
  ordered_json asr_i2t = ordered_json::object();
  ordered_json asr_t2i = ordered_json::object();
  for (int k : r.ks) {
    asr_i2t[std::to_string(k)] = opt_json(r.asr.at(k).i2t);
    asr_t2i[std::to_string(k)] = opt_json(r.asr.at(k).t2i);
  }
  ordered_json j;
  j["adapter"] = r.adapter;
  j["config_digest"] = r.config_digest;
  j["k"] = r.ks;
  j["clean"] = scores_json(r, r.clean);
  j["adversarial"] = scores_json(r, r.adversarial);
  j["asr"] = {{"i2t", asr_i2t}, {"t2i", asr_t2i}};
  return j.dump(2) + "\n";
}

AttackReport report_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    AttackReport r;
    r.adapter = j.at("adapter").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.ks = j.at("k").get<std::vector<int>>();
    for (int k : r.ks) {
      const std::string key = std::to_string(k);
      r.clean[k] = {j.at("clean").at("i2t").at(key).get<double>(), j.at("clean").at("t2i").at(key).get<double>()};
      r.adversarial[k] = {j.at("adversarial").at("i2t").at(key).get<double>(),
                          j.at("adversarial").at("t2i").at(key).get<double>()};
      r.asr[k] = {opt_from(j.at("asr").at("i2t").at(key)), opt_from(j.at("asr").at("t2i").at(key))};
    }
    return r;
  } catch (const ordered_json::exception& e) {
    throw CorruptionError(std::string("malformed report JSON: ") + e.what());
  }
}

void save_report(const AttackReport& r, const fs::path& path) { write_text_file(path, report_to_json(r)); }
AttackReport load_report(const fs::path& path) { return report_from_json(read_text_file(path)); }

void save_trace(const std::vector<TraceRow>& trace, const fs::path& path) {
  std::string out = "step,l1,l2,linf\n";
  char buf[64];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
  };
  for (const auto& row : trace) {
    out += std::to_string(row.step);
    out += ',';
    num(row.l1);
    out += ',';
    num(row.l2);
    out += ',';
    num(row.linf);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace uapforge
