#include "mqaf/config.hpp"

#include <sstream>

#include "mqaf/rng.hpp"
#include "mqaf/textio.hpp"
#include "mqaf/version.hpp"

namespace mqaf {

namespace {

bool parse_bool(const std::string& v, const std::string& ctx) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(ctx + ": expected true/false, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

double parse_positive(const std::string& v, const std::string& ctx) {
  double x;
  try {
    x = parse_double_strict(v, ctx);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (!(x > 0.0)) throw ConfigError(ctx + ": value must be positive, got " + v);
  return x;
}

long long parse_int_cfg(const std::string& v, const std::string& ctx) {
  try {
    return parse_int_strict(v, ctx);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

double parse_double_cfg(const std::string& v, const std::string& ctx) {
  try {
    return parse_double_strict(v, ctx);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (corpus.references < 1)
    throw ConfigError("corpus.references: must be >= 1");
  if (corpus.image_size < extractor.input_size)
    throw ConfigError("corpus.image_size: must be >= extractor.input_size (" +
                      std::to_string(corpus.image_size) + " < " +
                      std::to_string(extractor.input_size) + ")");
  for (int s : corpus.severities)
    if (s < 1 || s > 5)
      throw ConfigError("corpus.severities: value out of range 1..5: " +
                        std::to_string(s));
  extractor.validate();
  if (memory.units < 1) throw ConfigError("memory.K: must be >= 1");
  if (memory.lambda < 0.0) throw ConfigError("memory.lambda: must be >= 0");
  if (memory.epsilon <= 0.0) throw ConfigError("memory.epsilon: must be > 0");
  if (fusion.hidden < 1) throw ConfigError("fusion.hidden: must be >= 1");
  if (training.learning_rate <= 0.0)
    throw ConfigError("training.learning_rate: must be > 0");
  if (training.weight_decay < 0.0)
    throw ConfigError("training.weight_decay: must be >= 0");
  if (training.batch_size < 1)
    throw ConfigError("training.batch_size: must be >= 1");
  if (training.epochs < 1) throw ConfigError("training.epochs: must be >= 1");
  if (training.mode_mix < 0.0 || training.mode_mix > 1.0)
    throw ConfigError("training.mode_mix: must be in [0,1]");
  if (evaluation.gmad_tolerance < 0.0)
    throw ConfigError("evaluation.gmad_tolerance: must be >= 0");
  if (evaluation.gmad_top < 1)
    throw ConfigError("evaluation.gmad_top: must be >= 1");
}

std::string RunConfig::print() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "corpus.references = " << corpus.references << "\n";
  os << "corpus.image_size = " << corpus.image_size << "\n";
  os << "corpus.types = ";
  for (std::size_t i = 0; i < corpus.types.size(); ++i)
    os << (i ? "," : "") << distortion_name(corpus.types[i]);
  os << "\n";
  os << "corpus.severities = ";
  for (std::size_t i = 0; i < corpus.severities.size(); ++i)
    os << (i ? "," : "") << corpus.severities[i];
  os << "\n";
  os << "extractor.input_size = " << extractor.input_size << "\n";
  os << "extractor.blocks = " << extractor.blocks << "\n";
  os << "extractor.channels = ";
  for (std::size_t i = 0; i < extractor.channels.size(); ++i)
    os << (i ? "," : "") << extractor.channels[i];
  os << "\n";
  os << "extractor.pool_then_normalize = "
     << bool_str(extractor.pool_then_normalize) << "\n";
  os << "memory.K = " << memory.units << "\n";
  os << "memory.lambda = " << format_double(memory.lambda) << "\n";
  os << "memory.epsilon = " << format_double(memory.epsilon) << "\n";
  os << "memory.covariance_axis = " << covariance_axis_name(memory.covariance_axis)
     << "\n";
  os << "memory.enabled = " << bool_str(memory.enabled) << "\n";
  os << "fusion.hidden = " << fusion.hidden << "\n";
  os << "fusion.alpha_target_inverted = "
     << bool_str(fusion.alpha_target_inverted) << "\n";
  os << "fusion.detach_alpha_in_q = " << bool_str(fusion.detach_alpha_in_q)
     << "\n";
  os << "training.learning_rate = " << format_double(training.learning_rate)
     << "\n";
  os << "training.weight_decay = " << format_double(training.weight_decay)
     << "\n";
  os << "training.batch_size = " << training.batch_size << "\n";
  os << "training.epochs = " << training.epochs << "\n";
  os << "training.mode_mix = " << format_double(training.mode_mix) << "\n";
  os << "evaluation.gmad_tolerance = "
     << format_double(evaluation.gmad_tolerance) << "\n";
  os << "evaluation.gmad_top = " << evaluation.gmad_top << "\n";
  os << "paths.corpus_dir = " << paths.corpus_dir << "\n";
  os << "paths.out_dir = " << paths.out_dir << "\n";
  return os.str();
}

std::string RunConfig::config_hash() const {
  const std::string text = print();
  return hex64(fnv1a64(text.data(), text.size()));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string ctx = "config key " + key;
  if (key == "seed") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 0) throw ConfigError(ctx + ": must be >= 0");
    seed = static_cast<std::uint64_t>(v);
  } else if (key == "corpus.references") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    corpus.references = static_cast<std::size_t>(v);
  } else if (key == "corpus.image_size") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 8) throw ConfigError(ctx + ": must be >= 8");
    corpus.image_size = static_cast<std::size_t>(v);
  } else if (key == "corpus.types") {
    corpus.types.clear();
    for (const auto& name : split(value, ','))
      corpus.types.push_back(distortion_from_name(trim(name)));
    if (corpus.types.empty()) throw ConfigError(ctx + ": empty list");
  } else if (key == "corpus.severities") {
    corpus.severities.clear();
    for (const auto& tok : split(value, ',')) {
      const long long v = parse_int_cfg(trim(tok), ctx);
      if (v < 1 || v > 5)
        throw ConfigError(ctx + ": severity out of range 1..5: " + tok);
      corpus.severities.push_back(static_cast<int>(v));
    }
    if (corpus.severities.empty()) throw ConfigError(ctx + ": empty list");
  } else if (key == "extractor.input_size") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 8) throw ConfigError(ctx + ": must be >= 8");
    extractor.input_size = static_cast<std::size_t>(v);
  } else if (key == "extractor.blocks") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1 || v > 6) throw ConfigError(ctx + ": must be in 1..6");
    extractor.blocks = static_cast<std::size_t>(v);
  } else if (key == "extractor.channels") {
    extractor.channels.clear();
    for (const auto& tok : split(value, ',')) {
      const long long v = parse_int_cfg(trim(tok), ctx);
      if (v < 1) throw ConfigError(ctx + ": channel width must be >= 1");
      extractor.channels.push_back(static_cast<std::size_t>(v));
    }
  } else if (key == "extractor.pool_then_normalize") {
    extractor.pool_then_normalize = parse_bool(value, ctx);
  } else if (key == "memory.K") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    memory.units = static_cast<std::size_t>(v);
  } else if (key == "memory.lambda") {
    const double v = parse_double_cfg(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be >= 0");
    memory.lambda = v;
  } else if (key == "memory.epsilon") {
    memory.epsilon = parse_positive(value, ctx);
  } else if (key == "memory.covariance_axis") {
    memory.covariance_axis = covariance_axis_from_name(value);
  } else if (key == "memory.enabled") {
    memory.enabled = parse_bool(value, ctx);
  } else if (key == "fusion.hidden") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    fusion.hidden = static_cast<std::size_t>(v);
  } else if (key == "fusion.alpha_target_inverted") {
    fusion.alpha_target_inverted = parse_bool(value, ctx);
  } else if (key == "fusion.detach_alpha_in_q") {
    fusion.detach_alpha_in_q = parse_bool(value, ctx);
  } else if (key == "training.learning_rate") {
    training.learning_rate = parse_positive(value, ctx);
  } else if (key == "training.weight_decay") {
    const double v = parse_double_cfg(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be >= 0");
    training.weight_decay = v;
  } else if (key == "training.batch_size") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    training.batch_size = static_cast<std::size_t>(v);
  } else if (key == "training.epochs") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    training.epochs = static_cast<std::size_t>(v);
  } else if (key == "training.mode_mix") {
    const double v = parse_double_cfg(value, ctx);
    if (v < 0.0 || v > 1.0) throw ConfigError(ctx + ": must be in [0,1]");
    training.mode_mix = v;
  } else if (key == "evaluation.gmad_tolerance") {
    const double v = parse_double_cfg(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be >= 0");
    evaluation.gmad_tolerance = v;
  } else if (key == "evaluation.gmad_top") {
    const long long v = parse_int_cfg(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be >= 1");
    evaluation.gmad_top = static_cast<std::size_t>(v);
  } else if (key == "paths.corpus_dir") {
    paths.corpus_dir = value;
  } else if (key == "paths.out_dir") {
    paths.out_dir = value;
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

RunConfig RunConfig::parse_text(const std::string& text,
                                const std::string& origin) {
  RunConfig config;
  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      config.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  return parse_text(read_file_text(path), path);
}

std::string provenance_block(const RunConfig& config) {
  std::ostringstream os;
  os << "# mqaf " << kVersion << "\n";
  os << "# config_hash=" << config.config_hash() << " seed=" << config.seed
     << "\n";
  return os.str();
}

}  // namespace mqaf
