#include "uapforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "uapforge/errors.hpp"
#include "uapforge/rng.hpp"

namespace uapforge {

namespace {

// table -> keys; "" is the root table
const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"", {"manifest", "adapter", "seed"}},
      {"attack",
       {"epsilon_I", "epsilon_T", "step_size", "iterations", "text_iterations", "batch_size", "gamma1", "gamma2",
        "lookahead", "future_sign", "future_mode", "momentum_cadence"}},
      {"augment", {"enabled", "alpha_mix", "beta1", "beta2", "crop_min", "crop_max"}},
      {"loss", {"temperature", "global_term", "local_term", "per_sample_crops", "crop_min", "crop_max"}},
      {"text", {"top_k", "sample_count", "positions", "policy"}},
      {"eval", {"k"}},
  };
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string qualified(const std::string& table, const std::string& key) {
  return table.empty() ? key : table + "." + key;
}

class Reader {
 public:
  std::vector<std::string> errors;

  template <typename T>
  void get(const toml::table& t, const std::string& table, const std::string& key, T& out) {
    const toml::node* n = t.get(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = n->value_exact<bool>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = n->value_exact<std::string>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = n->value<double>(); v && !n->is_boolean()) {
        out = static_cast<T>(*v);
        return;
      }
    } else {
      if (auto v = n->value_exact<std::int64_t>()) {
        out = static_cast<T>(*v);
        return;
      }
    }
    errors.push_back("'" + qualified(table, key) + "' has the wrong type");
  }

  void get_optional_double(const toml::table& t, const std::string& table, const std::string& key,
                           std::optional<double>& out) {
    if (!t.get(key)) return;
    double v = 0.0;
    get(t, table, key, v);
    out = v;
  }
};

void check_keys(const toml::table& root, std::vector<std::string>& errors) {
  const auto& s = schema();
  auto check_table = [&](const toml::table& t, const std::string& name) {
    const auto& known = s.at(name);
    for (const auto& [k, node] : t) {
      const std::string key(k.str());
      if (name.empty() && s.contains(key)) {
        if (!node.is_table()) errors.push_back("'" + key + "' must be a table");
        continue;
      }
      if (std::find(known.begin(), known.end(), key) != known.end()) continue;
      std::string msg = "unknown key '" + qualified(name, key) + "'";
      if (const std::string hint = suggest_key(key); !hint.empty()) msg += " (did you mean '" + hint + "'?)";
      errors.push_back(msg);
    }
  };
  check_table(root, "");
  for (const auto& [name, keys] : s) {
    if (name.empty()) continue;
    if (const toml::table* t = root[name].as_table()) check_table(*t, name);
  }
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, p);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::ostringstream os;
  os << toml::value<std::string>(s);
  return os.str();
}

}  // namespace

std::string suggest_key(const std::string& unknown) {
  const std::string u = lower(unknown);
  std::string best;
  std::size_t best_d = std::max<std::size_t>(2, u.size() / 3) + 1;
  for (const auto& [table, keys] : schema()) {
    for (const auto& k : keys) {
      const std::string lk = lower(k);
      // A known key that prefixes the typo (or vice versa) is a near miss regardless of length.
      const bool prefix = lk.size() >= 4 && u.size() >= 4 && (u.starts_with(lk) || lk.starts_with(u));
      const std::size_t d = prefix ? 1 : edit_distance(u, lk);
      if (d < best_d) {
        best_d = d;
        best = qualified(table, k);
      }
    }
  }
  return best;
}

void RunConfig::sync() {
  attack.seed = seed;
  text.seed = seed;
  text.passes = attack.text_iterations;
  text.divergence = attack.loss.divergence;
}

namespace {

std::vector<std::string> validation_errors(const RunConfig& cfg, bool require_inputs) {
  std::vector<std::string> errors;
  if (require_inputs && cfg.manifest.empty()) errors.push_back("'manifest' is required");
  if (require_inputs && cfg.adapter.empty()) errors.push_back("'adapter' is required");
  for (auto& p : cfg.attack.problems()) errors.push_back(std::move(p));
  try {
    cfg.text.validate();
  } catch (const Error& e) {
    errors.push_back(e.what());
  }
  if (cfg.eval.ks.empty()) errors.push_back("'eval.k' must list at least one K");
  for (int k : cfg.eval.ks) {
    if (k < 1) errors.push_back("'eval.k' entries must be >= 1");
  }
  return errors;
}

[[noreturn]] void fail(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  - " + e;
  throw ConfigError(msg);
}

}  // namespace

void RunConfig::validate(bool require_inputs) const {
  if (auto errors = validation_errors(*this, require_inputs); !errors.empty()) fail(errors);
}

RunConfig parse_run_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config is not valid TOML: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
  std::vector<std::string> errors;
  check_keys(root, errors);

  RunConfig cfg;
  Reader r;
  r.get(root, "", "manifest", cfg.manifest);
  r.get(root, "", "adapter", cfg.adapter);
  std::int64_t seed = 0;
  r.get(root, "", "seed", seed);
  if (seed < 0) errors.push_back("'seed' must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);

  static const toml::table empty;
  auto table = [&](const char* name) -> const toml::table& {
    const toml::table* t = root[name].as_table();
    return t ? *t : empty;
  };

  const toml::table& a = table("attack");
  AttackConfig& at = cfg.attack;
  r.get(a, "attack", "epsilon_I", at.epsilon_image);
  r.get(a, "attack", "epsilon_T", at.epsilon_text);
  r.get_optional_double(a, "attack", "step_size", at.step_size);
  r.get(a, "attack", "iterations", at.iterations);
  r.get(a, "attack", "text_iterations", at.text_iterations);
  r.get(a, "attack", "batch_size", at.batch_size);
  r.get(a, "attack", "gamma1", at.gamma1);
  r.get(a, "attack", "gamma2", at.gamma2);
  r.get(a, "attack", "lookahead", at.lookahead);
  r.get(a, "attack", "future_sign", at.future_sign);
  std::string future_mode = "mean";
  std::string cadence = "epoch";
  r.get(a, "attack", "future_mode", future_mode);
  r.get(a, "attack", "momentum_cadence", cadence);
  if (future_mode == "mean") at.future_mode = FutureMode::Mean;
  else if (future_mode == "last") at.future_mode = FutureMode::Last;
  else errors.push_back("'attack.future_mode' must be 'mean' or 'last'");
  if (cadence == "epoch") at.cadence = MomentumCadence::PerEpoch;
  else if (cadence == "batch") at.cadence = MomentumCadence::PerBatch;
  else errors.push_back("'attack.momentum_cadence' must be 'epoch' or 'batch'");

  const toml::table& g = table("augment");
  r.get(g, "augment", "enabled", at.augment.enabled);
  r.get(g, "augment", "alpha_mix", at.augment.scmix.alpha_mix);
  r.get(g, "augment", "beta1", at.augment.scmix.beta1);
  r.get(g, "augment", "beta2", at.augment.scmix.beta2);
  r.get(g, "augment", "crop_min", at.augment.scmix.crop_lo);
  r.get(g, "augment", "crop_max", at.augment.scmix.crop_hi);

  const toml::table& l = table("loss");
  r.get(l, "loss", "temperature", at.loss.divergence.temperature);
  r.get(l, "loss", "global_term", at.loss.global_term);
  r.get(l, "loss", "local_term", at.loss.local_term);
  r.get(l, "loss", "per_sample_crops", at.loss.per_sample_crops);
  r.get(l, "loss", "crop_min", at.loss.crop.lo);
  r.get(l, "loss", "crop_max", at.loss.crop.hi);

  const toml::table& t = table("text");
  r.get(t, "text", "top_k", cfg.text.top_k);
  r.get(t, "text", "sample_count", cfg.text.sample_count);
  std::string positions = "random";
  std::string policy = "importance";
  r.get(t, "text", "positions", positions);
  r.get(t, "text", "policy", policy);
  try {
    cfg.text.positions = parse_substitution_positions(positions);
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  try {
    cfg.policy = parse_trigger_policy(policy);
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }

  if (const toml::node* k = table("eval").get("k")) {
    cfg.eval.ks.clear();
    if (const toml::array* arr = k->as_array()) {
      for (const auto& e : *arr) {
        if (auto v = e.value_exact<std::int64_t>()) {
          cfg.eval.ks.push_back(static_cast<int>(*v));
        } else {
          errors.push_back("'eval.k' must be an array of integers");
          break;
        }
      }
    } else {
      errors.push_back("'eval.k' must be an array of integers");
    }
  }

  errors.insert(errors.end(), r.errors.begin(), r.errors.end());
  cfg.sync();
  for (auto& e : validation_errors(cfg, false)) errors.push_back(std::move(e));
  if (!errors.empty()) fail(errors);
  return cfg;
}

std::string to_toml(const RunConfig& cfg) {
  const AttackConfig& a = cfg.attack;
  std::ostringstream os;
  os << "manifest = " << quoted(cfg.manifest) << "\n";
  os << "adapter = " << quoted(cfg.adapter) << "\n";
  os << "seed = " << cfg.seed << "\n\n";
  os << "[attack]\n";
  os << "epsilon_I = " << fmt_double(a.epsilon_image) << "\n";
  os << "epsilon_T = " << a.epsilon_text << "\n";
  os << "step_size = " << fmt_double(a.resolved_step_size()) << "\n";
  os << "iterations = " << a.iterations << "\n";
  os << "text_iterations = " << a.text_iterations << "\n";
  os << "batch_size = " << a.batch_size << "\n";
  os << "gamma1 = " << fmt_double(a.gamma1) << "\n";
  os << "gamma2 = " << fmt_double(a.gamma2) << "\n";
  os << "lookahead = " << a.lookahead << "\n";
  os << "future_sign = " << a.future_sign << "\n";
  os << "future_mode = " << quoted(a.future_mode == FutureMode::Mean ? "mean" : "last") << "\n";
  os << "momentum_cadence = " << quoted(a.cadence == MomentumCadence::PerEpoch ? "epoch" : "batch") << "\n\n";
  os << "[augment]\n";
  os << "enabled = " << (a.augment.enabled ? "true" : "false") << "\n";
  os << "alpha_mix = " << fmt_double(a.augment.scmix.alpha_mix) << "\n";
  os << "beta1 = " << fmt_double(a.augment.scmix.beta1) << "\n";
  os << "beta2 = " << fmt_double(a.augment.scmix.beta2) << "\n";
  os << "crop_min = " << fmt_double(a.augment.scmix.crop_lo) << "\n";
  os << "crop_max = " << fmt_double(a.augment.scmix.crop_hi) << "\n\n";
  os << "[loss]\n";
  os << "temperature = " << fmt_double(a.loss.divergence.temperature) << "\n";
  os << "global_term = " << (a.loss.global_term ? "true" : "false") << "\n";
  os << "local_term = " << (a.loss.local_term ? "true" : "false") << "\n";
  os << "per_sample_crops = " << (a.loss.per_sample_crops ? "true" : "false") << "\n";
  os << "crop_min = " << fmt_double(a.loss.crop.lo) << "\n";
  os << "crop_max = " << fmt_double(a.loss.crop.hi) << "\n\n";
  os << "[text]\n";
  os << "top_k = " << cfg.text.top_k << "\n";
  os << "sample_count = " << cfg.text.sample_count << "\n";
  os << "positions = " << quoted(to_string(cfg.text.positions)) << "\n";
  os << "policy = " << quoted(to_string(cfg.policy)) << "\n\n";
  os << "[eval]\n";
  os << "k = [";
  for (std::size_t i = 0; i < cfg.eval.ks.size(); ++i) os << (i ? ", " : "") << cfg.eval.ks[i];
  os << "]\n";
  return os.str();
}

std::string config_digest(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_toml(cfg))));
  return buf;
}

}  // namespace uapforge
