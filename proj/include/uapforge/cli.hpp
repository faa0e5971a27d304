#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uapforge/config.hpp"

namespace uapforge::cli {

/// Parsed command line of one invocation. Relative paths resolve against
/// `workdir`. Flag values win over the config file; UAPFORGE_SEED wins over
/// the file's seed but not over --seed.
struct Invocation {
  std::string subcommand;
  std::filesystem::path workdir = ".";
  std::optional<std::filesystem::path> config;
  std::optional<std::string> manifest;
  std::optional<std::string> adapter;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> trace;
  std::optional<std::filesystem::path> uap;
  std::optional<std::filesystem::path> triggers;
  std::optional<std::filesystem::path> report;
  std::optional<std::vector<int>> ks;

  // synth-dataset
  std::size_t synth_n = 64;
  std::string synth_size = "32x32x3";
  std::size_t synth_vocab = 48;
  std::size_t synth_caption_len = 4;
};

inline constexpr const char* kSeedEnv = "UAPFORGE_SEED";
inline constexpr const char* kSnapshotName = "resolved_config.toml";

/// Config file + environment + flags, validated.
RunConfig resolve_config(const Invocation& inv, bool require_inputs);

/// Executes one subcommand; returns the process exit status. Diagnostics go
/// to `err`, summaries to `out`.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

}  // namespace uapforge::cli
