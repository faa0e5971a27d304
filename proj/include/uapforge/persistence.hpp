#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uapforge/evaluation.hpp"
#include "uapforge/optimizer.hpp"
#include "uapforge/text_attack.hpp"

namespace uapforge {

/// UAP container, all integers little-endian:
///
///   offset  size  field
///        0     4  magic "UAPF"
///        4     4  u32 version (1)
///        8     4  u32 height
///       12     4  u32 width
///       16     4  u32 channels
///       20     4  f32 epsilon
///       24     4  u32 dtype tag (1 = float32)
///       28  4HWC  f32 payload, HWC row-major
///      end     4  u32 CRC-32 of every preceding byte
namespace uap_format {
inline constexpr char kMagic[4] = {'U', 'A', 'P', 'F'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kFloat32 = 1;
inline constexpr std::size_t kHeaderSize = 28;
inline constexpr std::size_t kTrailerSize = 4;
}  // namespace uap_format

std::vector<unsigned char> encode_uap(const ImageUAP& uap);
/// Throws CorruptionError on bad framing or checksum, InvariantError when
/// the payload exceeds the stored budget.
ImageUAP decode_uap(std::span<const unsigned char> bytes);

void save_uap(const ImageUAP& uap, const std::filesystem::path& path);
ImageUAP load_uap(const std::filesystem::path& path);

/// Ranked lexicon plus the trigger chosen from it.
struct TriggerArtifact {
  TriggerLexicon lexicon;
  TextTrigger trigger;
};

std::string triggers_to_json(const TriggerArtifact& artifact);
TriggerArtifact triggers_from_json(const std::string& text);
void save_triggers(const TriggerArtifact& artifact, const std::filesystem::path& path);
TriggerArtifact load_triggers(const std::filesystem::path& path);

std::string report_to_json(const AttackReport& report);
AttackReport report_from_json(const std::string& text);
void save_report(const AttackReport& report, const std::filesystem::path& path);
AttackReport load_report(const std::filesystem::path& path);

/// CSV with header `step,l1,l2,linf`.
void save_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace uapforge
