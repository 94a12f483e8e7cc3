#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mqaf/distortion.hpp"
#include "mqaf/image.hpp"

namespace mqaf {

// One manifest line. severity 0 is reserved for the pristine reference
// (type "reference", q_true 1); distorted records carry severity 1..5.
struct SampleRecord {
  std::string path;  // relative to the manifest directory
  std::string ref_id;
  std::string type;
  int severity = 0;
  double q_true = 1.0;

  bool is_reference() const { return severity == 0; }
  // Stable per-sample identifier (file stem).
  std::string id() const;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  std::string config_hash;  // 16 hex digits
  std::vector<SampleRecord> records;
  std::string base_dir;  // directory holding the referenced files

  std::vector<SampleRecord> distorted() const;
  std::vector<std::string> reference_ids() const;       // sorted unique
  std::vector<std::string> distortion_types() const;    // sorted unique
  const SampleRecord* find_reference(const std::string& ref_id) const;
  std::string resolve(const std::string& rel_path) const;
};

struct CorpusConfig {
  std::size_t references = 8;
  std::size_t image_size = 80;
  std::vector<DistortionType> types{kAllDistortions.begin(),
                                    kAllDistortions.end()};
  std::vector<int> severities = {1, 2, 3, 4, 5};

  std::string canonical_text() const;  // hashed into the manifest
};

// q_true = 1 - (severity - 0.5)/5, so severities 1..5 map onto
// {0.9, 0.7, 0.5, 0.3, 0.1}; severity 0 (reference) maps to 1.
double q_true_for_severity(int severity);

// Procedurally generated reference image: gradient + random blobs +
// value-noise texture, deterministic under seed.
ImageBuffer synth_reference(std::size_t size, std::uint64_t seed);

// Writes refs/, dist/ and manifest.txt under out_dir and returns the
// manifest. Regeneration with the same (config, seed) reproduces identical
// bytes.
CorpusManifest generate_corpus(const CorpusConfig& config, std::uint64_t seed,
                               const std::string& out_dir);

CorpusManifest load_manifest(const std::string& path);
void save_manifest(const CorpusManifest& manifest, const std::string& path);

}  // namespace mqaf
