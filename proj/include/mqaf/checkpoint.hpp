#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqaf/config.hpp"
#include "mqaf/errors.hpp"
#include "mqaf/extractor.hpp"
#include "mqaf/fusion.hpp"
#include "mqaf/matching.hpp"

namespace mqaf {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'M', 'Q', 'A', 'F'};

class VersionError : public ParseError {
 public:
  explicit VersionError(const std::string& msg) : ParseError(msg) {}
};

class ChecksumError : public ParseError {
 public:
  explicit ChecksumError(const std::string& msg) : ParseError(msg) {}
};

class TruncationError : public ParseError {
 public:
  explicit TruncationError(const std::string& msg) : ParseError(msg) {}
};

// Everything a scorer needs: extractor weights, memory bank, AWN and the
// config they were built under.
struct ModelState {
  RunConfig config;
  ExtractorParams extractor;
  MemoryBank bank;
  AwnParams awn;

  // Declared serialization order: per-block kernel+bias, bank units, AWN.
  std::vector<Tensor> parameters() const;
};

// Fresh deterministic model (parameter seeds derived from config.seed).
ModelState init_model(const RunConfig& config);

// Layout: magic "MQAF" | u32 version | u32 config length | config text |
// u64 value count | little-endian f32 payload | u64 FNV-1a checksum of all
// preceding bytes.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

std::vector<std::uint8_t> encode_checkpoint(const ModelState& state);
ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin);

}  // namespace mqaf
