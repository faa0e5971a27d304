#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uapforge/optimizer.hpp"
#include "uapforge/text_attack.hpp"

namespace uapforge {

struct EvalConfig {
  std::vector<int> ks{1, 5, 10};
};

/// Everything one run needs. Every field has a default except the manifest
/// and the adapter, which must come from the file or the command line.
struct RunConfig {
  std::string manifest;
  std::string adapter;
  std::uint64_t seed = 0;
  AttackConfig attack;
  TextAttackConfig text;
  TriggerPolicy policy = TriggerPolicy::Importance;
  EvalConfig eval;

  /// Copies seed, M_T and the divergence into the sub-configs that consume them.
  void sync();
  /// Throws ConfigError listing every problem found.
  void validate(bool require_inputs) const;
};

/// Parses a TOML document. Unknown keys, wrong types and out-of-range values
/// are all collected into one ConfigError; unknown keys get a suggestion.
RunConfig parse_run_config(const std::string& toml_text);

/// Canonical TOML snapshot with every field resolved. Parsing the snapshot
/// and writing it again reproduces the same bytes.
std::string to_toml(const RunConfig& cfg);

/// Hex FNV-1a of the canonical snapshot.
std::string config_digest(const RunConfig& cfg);

/// Closest known key (qualified, e.g. "attack.epsilon_I") or empty.
std::string suggest_key(const std::string& unknown);

}  // namespace uapforge
