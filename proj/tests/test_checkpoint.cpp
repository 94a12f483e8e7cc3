#include <doctest.h>

#include <filesystem>

#include "mqaf/checkpoint.hpp"
#include "mqaf/textio.hpp"

using namespace mqaf;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig config;
  config.corpus.references = 2;
  config.corpus.image_size = 24;
  config.extractor.input_size = 16;
  config.extractor.blocks = 2;
  config.extractor.channels = {4, 8};
  config.memory.units = 4;
  config.fusion.hidden = 8;
  return config;
}

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "mqaf-ckpt-tests";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("save, load, save produces byte-identical files") {
  const ModelState state = init_model(tiny_config());
  const std::string p1 = (scratch() / "a.ckpt").string();
  const std::string p2 = (scratch() / "b.ckpt").string();
  save_checkpoint(state, p1);
  save_checkpoint(load_checkpoint(p1), p2);
  CHECK(read_file_bytes(p1) == read_file_bytes(p2));
}

TEST_CASE("loaded model reproduces the config echo") {
  const RunConfig config = tiny_config();
  const ModelState state = init_model(config);
  const std::string p = (scratch() / "echo.ckpt").string();
  save_checkpoint(state, p);
  const ModelState loaded = load_checkpoint(p);
  CHECK(loaded.config.print() == config.print());
  CHECK(loaded.bank.size() == 4);
  CHECK(loaded.bank.dim() == 8);
}

TEST_CASE("a corrupted payload byte raises a checksum error") {
  auto bytes = encode_checkpoint(init_model(tiny_config()));
  bytes[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(bytes, "probe"), ChecksumError);
}

TEST_CASE("a version bump is rejected naming both versions") {
  auto bytes = encode_checkpoint(init_model(tiny_config()));
  bytes[4] = 2;  // stored version (little endian u32 at offset 4)
  try {
    decode_checkpoint(bytes, "probe");
    FAIL("expected VersionError");
  } catch (const VersionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("truncation is a distinct error") {
  auto bytes = encode_checkpoint(init_model(tiny_config()));
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(bytes, "probe"), TruncationError);
}

TEST_CASE("foreign files are rejected on magic") {
  std::vector<std::uint8_t> junk = {'P', '6', '\n', '1', ' ', '1'};
  CHECK_THROWS_AS(decode_checkpoint(junk, "probe"), ParseError);
}

TEST_CASE("payload values survive the f32 round trip") {
  ModelState state = init_model(tiny_config());
  state.bank.units.mutable_values()[0] = 0.123456789;
  const std::string p = (scratch() / "f32.ckpt").string();
  save_checkpoint(state, p);
  const ModelState loaded = load_checkpoint(p);
  CHECK(loaded.bank.units.values()[0] ==
        doctest::Approx(0.123456789).epsilon(1e-7));
  CHECK(loaded.bank.units.values()[0] ==
        static_cast<double>(static_cast<float>(0.123456789)));
}
