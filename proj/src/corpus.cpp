#include "mqaf/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "mqaf/rng.hpp"
#include "mqaf/textio.hpp"
#include "mqaf/version.hpp"

namespace fs = std::filesystem;

namespace mqaf {

std::string SampleRecord::id() const {
  const std::size_t slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem.resize(dot);
  return stem;
}

std::vector<SampleRecord> CorpusManifest::distorted() const {
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if (!r.is_reference()) out.push_back(r);
  return out;
}

std::vector<std::string> CorpusManifest::reference_ids() const {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.ref_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> CorpusManifest::distortion_types() const {
  std::set<std::string> types;
  for (const auto& r : records)
    if (!r.is_reference()) types.insert(r.type);
  return {types.begin(), types.end()};
}

const SampleRecord* CorpusManifest::find_reference(
    const std::string& ref_id) const {
  for (const auto& r : records)
    if (r.is_reference() && r.ref_id == ref_id) return &r;
  return nullptr;
}

std::string CorpusManifest::resolve(const std::string& rel_path) const {
  if (base_dir.empty()) return rel_path;
  return base_dir + "/" + rel_path;
}

std::string CorpusConfig::canonical_text() const {
  std::ostringstream os;
  os << "references=" << references << ";image_size=" << image_size
     << ";types=";
  for (std::size_t i = 0; i < types.size(); ++i)
    os << (i ? "," : "") << distortion_name(types[i]);
  os << ";severities=";
  for (std::size_t i = 0; i < severities.size(); ++i)
    os << (i ? "," : "") << severities[i];
  return os.str();
}

double q_true_for_severity(int severity) {
  if (severity == 0) return 1.0;
  return 1.0 - (static_cast<double>(severity) - 0.5) / 5.0;
}

ImageBuffer synth_reference(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  const double s = static_cast<double>(size);
  std::vector<double> plane(size * size * 3, 0.0);
  auto px = [&](std::size_t x, std::size_t y, std::size_t c) -> double& {
    return plane[(y * size + x) * 3 + c];
  };

  // Base: linear gradient between two random colors along a random axis.
  // Color and amplitude statistics are deliberately tight so references
  // form one texture family: severity effects must not drown in content
  // variety on a desk-scale corpus.
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double gx = std::cos(angle), gy = std::sin(angle);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(100.0, 155.0);
    c1[c] = rng.uniform(100.0, 155.0);
  }
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double t =
          ((gx * x + gy * y) / s - std::min(0.0, gx) - std::min(0.0, gy)) /
          (std::abs(gx) + std::abs(gy));
      const double tc = std::clamp(t, 0.0, 1.0);
      for (int c = 0; c < 3; ++c)
        px(x, y, c) = c0[c] + (c1[c] - c0[c]) * tc;
    }

  // Patchwork of locally distinct textures so the feature map's location
  // vectors start out diverse: distortions then homogenize them, which
  // both matching scores can see. Cell contents stay within gradients,
  // blobs and texture noise.
  const std::size_t cell = 8;
  for (std::size_t cy = 0; cy < size; cy += cell)
    for (std::size_t cx = 0; cx < size; cx += cell) {
      const std::size_t x1 = std::min(cx + cell, size);
      const std::size_t y1 = std::min(cy + cell, size);
      const int kind = static_cast<int>(rng.below(5));
      double amp[3];
      for (int c = 0; c < 3; ++c) amp[c] = rng.uniform(40.0, 60.0);
      switch (kind) {
        case 0: {  // oriented grating
          const double wl = rng.uniform(2.5, 5.0);
          const double th = rng.uniform(0.0, 3.14159265358979323846);
          const double kxx = std::cos(th) * 6.28318530717958647692 / wl;
          const double kyy = std::sin(th) * 6.28318530717958647692 / wl;
          const double ph = rng.uniform(0.0, 6.28318530717958647692);
          for (std::size_t y = cy; y < y1; ++y)
            for (std::size_t x = cx; x < x1; ++x) {
              const double v = std::sin(kxx * x + kyy * y + ph);
              for (int c = 0; c < 3; ++c) px(x, y, c) += amp[c] * v;
            }
          break;
        }
        case 1: {  // checker
          const std::size_t sq = 2 + rng.below(3);
          for (std::size_t y = cy; y < y1; ++y)
            for (std::size_t x = cx; x < x1; ++x) {
              const double v = ((x / sq + y / sq) % 2) ? 1.0 : -1.0;
              for (int c = 0; c < 3; ++c) px(x, y, c) += amp[c] * v;
            }
          break;
        }
        case 2: {  // dot blobs on a jittered lattice
          const double rad = rng.uniform(1.0, 2.5);
          const std::size_t step = 4 + rng.below(4);
          for (std::size_t oy = cy; oy < y1; oy += step)
            for (std::size_t ox = cx; ox < x1; ox += step) {
              const double bx = ox + rng.uniform(0.0, step);
              const double by = oy + rng.uniform(0.0, step);
              for (std::size_t y = cy; y < y1; ++y)
                for (std::size_t x = cx; x < x1; ++x) {
                  const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                  const double w = std::exp(-d2 / (2.0 * rad * rad));
                  for (int c = 0; c < 3; ++c) px(x, y, c) += amp[c] * w;
                }
            }
          break;
        }
        case 3: {  // local gradient patch at its own angle
          const double th = rng.uniform(0.0, 6.28318530717958647692);
          const double lx = std::cos(th), ly = std::sin(th);
          for (std::size_t y = cy; y < y1; ++y)
            for (std::size_t x = cx; x < x1; ++x) {
              const double t =
                  (lx * (static_cast<double>(x) - cx) +
                   ly * (static_cast<double>(y) - cy)) /
                  static_cast<double>(cell);
              for (int c = 0; c < 3; ++c) px(x, y, c) += amp[c] * t;
            }
          break;
        }
        default: {  // texture noise patch
          const double na = rng.uniform(30.0, 40.0);
          for (std::size_t y = cy; y < y1; ++y)
            for (std::size_t x = cx; x < x1; ++x) {
              const double v = rng.uniform(-1.0, 1.0);
              for (int c = 0; c < 3; ++c) px(x, y, c) += na * v;
            }
          break;
        }
      }
    }

  // Mild global per-pixel noise so no region is perfectly flat.
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double fine = rng.uniform(-6.0, 6.0);
      for (int c = 0; c < 3; ++c) px(x, y, c) += fine;
    }

  ImageBuffer img = make_image(size, size);
  for (std::size_t i = 0; i < plane.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(plane[i]), 0L, 255L));
  return img;
}

CorpusManifest generate_corpus(const CorpusConfig& config, std::uint64_t seed,
                               const std::string& out_dir) {
  if (config.references < 1)
    throw ConfigError("generate_corpus: reference count must be >= 1");
  if (config.types.empty())
    throw ConfigError("generate_corpus: no distortion types selected");
  for (int sev : config.severities)
    if (sev < 1 || sev > 5)
      throw ConfigError("generate_corpus: severity out of range: " +
                        std::to_string(sev));

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "refs", ec);
  fs::create_directories(fs::path(out_dir) / "dist", ec);
  if (ec) throw IoError("generate_corpus: cannot create " + out_dir + ": " +
                        ec.message());

  CorpusManifest manifest;
  manifest.seed = seed;
  const std::string canon = config.canonical_text();
  manifest.config_hash = hex64(fnv1a64(canon.data(), canon.size()));
  manifest.base_dir = out_dir;

  const std::size_t R = config.references;
  const std::size_t T = config.types.size();
  const std::size_t S = config.severities.size();

  char name[64];
  for (std::size_t r = 0; r < R; ++r) {
    std::snprintf(name, sizeof(name), "ref%03zu", r);
    const std::string ref_id = name;
    const ImageBuffer ref =
        synth_reference(config.image_size, hash_mix(seed, r));
    const std::string rel = "refs/" + ref_id + ".ppm";
    save_image(ref, out_dir + "/" + rel);
    manifest.records.push_back({rel, ref_id, "reference", 0, 1.0});

    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t sv = 0; sv < S; ++sv) {
        const int severity = config.severities[sv];
        const std::size_t sample_index = R + ((r * T + t) * S + sv);
        const ImageBuffer dist = apply_distortion(
            ref, config.types[t], severity, hash_mix(seed, sample_index));
        const std::string tname = distortion_name(config.types[t]);
        const std::string drel = "dist/" + ref_id + "_" + tname + "_s" +
                                 std::to_string(severity) + ".ppm";
        save_image(dist, out_dir + "/" + drel);
        manifest.records.push_back(
            {drel, ref_id, tname, severity, q_true_for_severity(severity)});
      }
  }

  save_manifest(manifest, out_dir + "/manifest.txt");
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  std::ostringstream os;
  os << "# mqaf " << kVersion << " corpus manifest v1\n";
  os << "seed=" << manifest.seed << "\n";
  os << "config_hash=" << manifest.config_hash << "\n";
  for (const auto& r : manifest.records) {
    os << "record path=" << r.path << " ref_id=" << r.ref_id
       << " type=" << r.type << " severity=" << r.severity
       << " q_true=" << format_double(r.q_true) << "\n";
  }
  write_file_text(path, os.str());
}

CorpusManifest load_manifest(const std::string& path) {
  const std::string text = read_file_text(path);
  CorpusManifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();

  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (line.rfind("seed=", 0) == 0) {
      manifest.seed = static_cast<std::uint64_t>(
          parse_int_strict(line.substr(5), ctx + " seed"));
    } else if (line.rfind("config_hash=", 0) == 0) {
      manifest.config_hash = line.substr(12);
    } else if (line.rfind("record ", 0) == 0) {
      SampleRecord rec;
      bool has_path = false, has_ref = false, has_type = false,
           has_sev = false, has_q = false;
      for (const std::string& tok : split(line.substr(7), ' ')) {
        if (tok.empty()) continue;
        const std::size_t eq = tok.find('=');
        if (eq == std::string::npos)
          throw ParseError(ctx + ": malformed field '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "path") {
          rec.path = val;
          has_path = true;
        } else if (key == "ref_id") {
          rec.ref_id = val;
          has_ref = true;
        } else if (key == "type") {
          rec.type = val;
          has_type = true;
        } else if (key == "severity") {
          rec.severity = static_cast<int>(parse_int_strict(val, ctx));
          has_sev = true;
        } else if (key == "q_true") {
          rec.q_true = parse_double_strict(val, ctx);
          has_q = true;
        } else {
          throw ParseError(ctx + ": unknown record field '" + key + "'");
        }
      }
      if (!(has_path && has_ref && has_type && has_sev && has_q))
        throw ParseError(ctx + ": record is missing required fields");
      manifest.records.push_back(std::move(rec));
    } else {
      throw ParseError(ctx + ": unrecognized manifest line");
    }
  }
  if (manifest.records.empty())
    throw ParseError(path + ": manifest contains no records");
  return manifest;
}

}  // namespace mqaf
