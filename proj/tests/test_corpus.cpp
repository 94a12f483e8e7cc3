#include <doctest.h>

#include <filesystem>
#include <set>

#include "mqaf/corpus.hpp"
#include "mqaf/rng.hpp"
#include "mqaf/textio.hpp"

using namespace mqaf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "mqaf-corpus-tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("q_true follows the label formula") {
  CHECK(q_true_for_severity(0) == 1.0);
  CHECK(q_true_for_severity(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(q_true_for_severity(3) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q_true_for_severity(5) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("4 references x 5 types x 5 severities yields 4 + 100 records") {
  CorpusConfig config;
  config.references = 4;
  config.image_size = 24;
  const auto dir = scratch("count");
  const CorpusManifest m = generate_corpus(config, 3, dir.string());
  CHECK(m.records.size() == 104);
  CHECK(m.distorted().size() == 100);
  CHECK(m.reference_ids().size() == 4);
  CHECK(m.distortion_types().size() == 5);
}

TEST_CASE("label monotonicity within each (reference, type)") {
  CorpusConfig config;
  config.references = 2;
  config.image_size = 24;
  const auto dir = scratch("monotone");
  const CorpusManifest m = generate_corpus(config, 4, dir.string());
  for (const auto& ref : m.reference_ids())
    for (const auto& type : m.distortion_types()) {
      double prev = 2.0;
      for (const auto& r : m.records) {
        if (r.ref_id != ref || r.type != type) continue;
        CHECK(r.q_true < prev);
        prev = r.q_true;
      }
    }
}

TEST_CASE("same config and seed reproduce an identical manifest hash") {
  CorpusConfig config;
  config.references = 2;
  config.image_size = 24;
  config.severities = {2, 4};
  const auto d1 = scratch("hash1");
  const auto d2 = scratch("hash2");
  generate_corpus(config, 77, d1.string());
  generate_corpus(config, 77, d2.string());
  CHECK(file_checksum_hex((d1 / "manifest.txt").string()) ==
        file_checksum_hex((d2 / "manifest.txt").string()));
}

TEST_CASE("per-sample seeding makes samples independent of generation order") {
  // Sample i derives its seed from hash(master, i): regenerating a single
  // distorted image in isolation must reproduce the corpus file.
  CorpusConfig config;
  config.references = 2;
  config.image_size = 24;
  const auto dir = scratch("seeding");
  const CorpusManifest m = generate_corpus(config, 9, dir.string());
  const std::size_t R = config.references, T = config.types.size(),
                    S = config.severities.size();
  const std::size_t r = 1, t = 2, sv = 3;
  const ImageBuffer ref = synth_reference(config.image_size, hash_mix(9, r));
  const std::size_t sample_index = R + ((r * T + t) * S + sv);
  const ImageBuffer regenerated =
      apply_distortion(ref, config.types[t], config.severities[sv],
                       hash_mix(9, sample_index));
  const std::string rel = "dist/ref001_" + distortion_name(config.types[t]) +
                          "_s" + std::to_string(config.severities[sv]) +
                          ".ppm";
  CHECK(load_image(m.resolve(rel)) == regenerated);
}

TEST_CASE("reference count below 1 is rejected") {
  CorpusConfig config;
  config.references = 0;
  CHECK_THROWS_AS(generate_corpus(config, 1, scratch("bad").string()),
                  ConfigError);
}

TEST_CASE("manifest parse errors carry file and line") {
  const auto dir = scratch("parse");
  write_file_text((dir / "m.txt").string(),
                  "seed=1\nrecord path=a ref_id=b type=c severity=1\n");
  try {
    load_manifest((dir / "m.txt").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("m.txt:2") != std::string::npos);
    CHECK(msg.find("missing") != std::string::npos);
  }
  write_file_text((dir / "m2.txt").string(),
                  "record path=a ref_id=b type=c severity=1 q_true=0.9 "
                  "extra=1\n");
  CHECK_THROWS_AS(load_manifest((dir / "m2.txt").string()), ParseError);
}

TEST_CASE("manifest round-trips through save and load") {
  CorpusConfig config;
  config.references = 2;
  config.image_size = 24;
  config.severities = {1, 5};
  const auto dir = scratch("roundtrip");
  const CorpusManifest m = generate_corpus(config, 5, dir.string());
  const CorpusManifest back = load_manifest((dir / "manifest.txt").string());
  CHECK(back.seed == m.seed);
  CHECK(back.config_hash == m.config_hash);
  REQUIRE(back.records.size() == m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].path == m.records[i].path);
    CHECK(back.records[i].q_true == m.records[i].q_true);
  }
}
