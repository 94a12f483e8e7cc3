#include "mqaf/checkpoint.hpp"

#include <cstring>

#include "mqaf/rng.hpp"
#include "mqaf/textio.hpp"

namespace mqaf {

std::vector<Tensor> ModelState::parameters() const {
  std::vector<Tensor> out = extractor.parameters();
  out.push_back(bank.units);
  for (const auto& t : awn.parameters()) out.push_back(t);
  return out;
}

ModelState init_model(const RunConfig& config) {
  config.validate();
  ModelState state;
  state.config = config;
  state.extractor = init_extractor(config.extractor, hash_mix(config.seed, 1));
  state.bank = init_memory_bank(config.memory.units,
                                config.extractor.feature_dim(),
                                hash_mix(config.seed, 2));
  state.awn = init_awn(config.extractor.feature_dim(), config.fusion.hidden,
                       hash_mix(config.seed, 3));
  return state;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  const std::string& origin;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > bytes.size())
      throw TruncationError(origin + ": truncated checkpoint while reading " +
                            what + " (offset " + std::to_string(pos) + ")");
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelState& state) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  put_u32(out, kCheckpointVersion);

  const std::string config_text = state.config.print();
  put_u32(out, static_cast<std::uint32_t>(config_text.size()));
  out.insert(out.end(), config_text.begin(), config_text.end());

  const auto params = state.parameters();
  std::uint64_t count = 0;
  for (const auto& p : params) count += p.numel();
  put_u64(out, count);
  for (const auto& p : params)
    for (double v : p.values()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }

  put_u64(out, fnv1a64(out.data(), out.size()));
  return out;
}

ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin) {
  Reader rd{bytes, origin};
  rd.need(4, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw ParseError(origin + ": bad magic, not a checkpoint file");
  rd.pos = 4;

  const std::uint32_t version = rd.u32("version");
  if (version != kCheckpointVersion)
    throw VersionError(origin + ": checkpoint version " +
                       std::to_string(version) + ", this reader supports " +
                       std::to_string(kCheckpointVersion));

  // Verify the trailing checksum before trusting the payload.
  if (bytes.size() < 8)
    throw TruncationError(origin + ": truncated checkpoint");
  const std::uint64_t stored_sum = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t(bytes[bytes.size() - 8 + i]) << (8 * i);
    return v;
  }();
  const std::uint64_t actual_sum = fnv1a64(bytes.data(), bytes.size() - 8);

  const std::uint32_t config_len = rd.u32("config length");
  rd.need(config_len, "config block");
  const std::string config_text(bytes.begin() + rd.pos,
                                bytes.begin() + rd.pos + config_len);
  rd.pos += config_len;

  const std::uint64_t count = rd.u64("value count");
  rd.need(count * 4 + 8, "parameter payload");
  if (actual_sum != stored_sum)
    throw ChecksumError(origin + ": checksum mismatch (stored " +
                        hex64(stored_sum) + ", computed " + hex64(actual_sum) +
                        ")");

  ModelState state;
  state.config = RunConfig::parse_text(config_text, origin + " (embedded config)");
  state.extractor = init_extractor(state.config.extractor, 0);
  state.bank = init_memory_bank(state.config.memory.units,
                                state.config.extractor.feature_dim(), 0);
  state.awn = init_awn(state.config.extractor.feature_dim(),
                       state.config.fusion.hidden, 0);

  auto params = state.parameters();
  std::uint64_t expected = 0;
  for (const auto& p : params) expected += p.numel();
  if (expected != count)
    throw ParseError(origin + ": payload holds " + std::to_string(count) +
                     " values, config implies " + std::to_string(expected));

  for (auto& p : params) {
    auto& vals = p.mutable_values();
    for (auto& v : vals) {
      const std::uint32_t bits = rd.u32("parameter value");
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
  }
  return state;
}

void save_checkpoint(const ModelState& state, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(state));
}

ModelState load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path), path);
}

}  // namespace mqaf
