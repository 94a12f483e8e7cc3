#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mqaf/corpus.hpp"
#include "mqaf/evaluation.hpp"
#include "mqaf/selftest.hpp"
#include "mqaf/textio.hpp"
#include "mqaf/trainer.hpp"
#include "mqaf/version.hpp"

namespace fs = std::filesystem;
using namespace mqaf;

namespace {

// Exit-code contract: 0 ok, 1 usage, 2 config, 3 data, 4 numerical abort.
enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

struct ConfigCliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool print_config = false;
};

void attach_config_options(CLI::App* cmd, ConfigCliOptions& opts) {
  cmd->add_option("--config", opts.config_path,
                  "Run configuration file (key = value lines)");
  cmd->add_option("--set", opts.overrides,
                  "Override a config key, e.g. --set memory.K=64 (flags win)");
  cmd->add_flag("--print-config", opts.print_config,
                "Print the effective config and exit");
}

// File config first, then flag overrides, then validation.
RunConfig resolve_config(const ConfigCliOptions& opts) {
  RunConfig config;
  if (!opts.config_path.empty())
    config = RunConfig::parse_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  config.validate();
  return config;
}

void write_output(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  write_file_text(path, text);
}

ScoreMode mode_from_string(const std::string& s) {
  if (s == "FR" || s == "fr") return ScoreMode::kFullReference;
  if (s == "NR" || s == "nr") return ScoreMode::kNoReference;
  throw ConfigError("mode must be FR or NR, got '" + s + "'");
}

std::string quality_line(const QualityResult& r) {
  std::string line = "mode=";
  line += r.mode == ScoreMode::kFullReference ? "FR" : "NR";
  line += " q=" + format_double(r.q);
  if (r.s_ref) line += " s_ref=" + format_double(*r.s_ref);
  line += " s_dist=" + format_double(r.s_dist);
  if (r.alpha) line += " alpha=" + format_double(*r.alpha);
  if (r.degenerate) line += " degenerate=true";
  return line;
}

int run_selftest(std::uint64_t seed, std::size_t trials) {
  auto checks = selftest::gradient_suite(seed, trials);
  for (auto& c : selftest::oracle_suite(seed)) checks.push_back(std::move(c));
  for (auto& c : selftest::contract_suite(seed)) checks.push_back(std::move(c));
  std::size_t failures = 0;
  for (const auto& c : checks) {
    std::printf("%s %s (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.c_str());
    if (!c.passed) ++failures;
  }
  std::printf("%zu/%zu checks passed\n", checks.size() - failures,
              checks.size());
  return failures == 0 ? kOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-driven dual-mode image quality assessment"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand(
      "gen-corpus", "Generate the synthetic distortion corpus");
  ConfigCliOptions gen_cfg;
  attach_config_options(gen, gen_cfg);
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory (default corpus_dir)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  ConfigCliOptions train_cfg;
  attach_config_options(train_cmd, train_cfg);
  std::string train_corpus, train_out, train_metrics;
  train_cmd->add_option("--corpus", train_corpus, "Corpus manifest path");
  train_cmd->add_option("--out", train_out, "Checkpoint output path");
  train_cmd->add_option("--metrics", train_metrics,
                        "Per-epoch metrics CSV path");

  // score
  auto* score_cmd =
      app.add_subcommand("score", "Score one image (FR with --ref, else NR)");
  std::string score_model, score_img, score_ref;
  score_cmd->add_option("--model", score_model, "Checkpoint path")->required();
  score_cmd->add_option("image", score_img, "Distorted image (PPM)")
      ->required();
  score_cmd->add_option("--ref", score_ref, "Reference image (PPM)");

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "Correlation report over a corpus");
  std::string eval_model, eval_corpus, eval_mode = "both", eval_out, eval_dump;
  eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus manifest path")
      ->required();
  eval_cmd->add_option("--mode", eval_mode, "FR, NR or both (default both)");
  eval_cmd->add_option("--out", eval_out, "Report CSV path (default stdout)");
  eval_cmd->add_option("--dump", eval_dump, "Per-sample score dump CSV path");

  // lodo
  auto* lodo_cmd = app.add_subcommand(
      "lodo", "Leave-one-distortion-out cross-validation");
  ConfigCliOptions lodo_cfg;
  attach_config_options(lodo_cmd, lodo_cfg);
  std::string lodo_corpus, lodo_mode = "FR", lodo_out;
  lodo_cmd->add_option("--corpus", lodo_corpus, "Corpus manifest path");
  lodo_cmd->add_option("--mode", lodo_mode, "Evaluation mode (FR or NR)");
  lodo_cmd->add_option("--out", lodo_out, "Report CSV path (default stdout)");

  // gmad
  auto* gmad_cmd = app.add_subcommand(
      "gmad", "Maximum-differentiation pair search over a corpus");
  std::string gmad_model, gmad_corpus, gmad_attacker = "psnr";
  std::string gmad_mode = "FR", gmad_out;
  double gmad_tol = 0.02;
  std::size_t gmad_top = 5;
  gmad_cmd->add_option("--model", gmad_model, "Defender checkpoint")
      ->required();
  gmad_cmd->add_option("--corpus", gmad_corpus, "Corpus manifest path")
      ->required();
  gmad_cmd->add_option("--attacker", gmad_attacker,
                       "'psnr' or a checkpoint path (default psnr)");
  gmad_cmd->add_option("--mode", gmad_mode, "Defender mode (FR or NR)");
  gmad_cmd->add_option("--tolerance", gmad_tol,
                       "Defender score gap tolerance");
  gmad_cmd->add_option("--top", gmad_top, "Number of pairs to report");
  gmad_cmd->add_option("--out", gmad_out, "Pairs CSV path (default stdout)");

  // inspect-memory
  auto* inspect_cmd = app.add_subcommand(
      "inspect-memory", "Export the bank's row-cosine matrix as CSV");
  std::string inspect_model, inspect_out;
  inspect_cmd->add_option("--model", inspect_model, "Checkpoint path")
      ->required();
  inspect_cmd->add_option("--out", inspect_out,
                          "CSV output path (default stdout)");

  // selftest
  auto* self_cmd = app.add_subcommand(
      "selftest", "Run the oracle and property suite");
  std::uint64_t self_seed = 20240101;
  std::size_t self_trials = 100;
  self_cmd->add_option("--seed", self_seed, "Suite seed");
  self_cmd->add_option("--trials", self_trials,
                       "Gradient-check trials per primitive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const RunConfig config = resolve_config(gen_cfg);
      if (gen_cfg.print_config) {
        std::cout << config.print();
        return kOk;
      }
      const std::string out_dir =
          gen_out.empty() ? config.paths.corpus_dir : gen_out;
      const CorpusManifest manifest =
          generate_corpus(config.corpus, config.seed, out_dir);
      std::cout << "wrote " << manifest.records.size() << " records under "
                << out_dir << " (manifest hash "
                << file_checksum_hex(out_dir + "/manifest.txt") << ")\n";
      return kOk;
    }

    if (*train_cmd) {
      const RunConfig config = resolve_config(train_cfg);
      if (train_cfg.print_config) {
        std::cout << config.print();
        return kOk;
      }
      const std::string manifest_path =
          train_corpus.empty() ? config.paths.corpus_dir + "/manifest.txt"
                               : train_corpus;
      const std::string ckpt_path =
          train_out.empty() ? config.paths.out_dir + "/model.ckpt" : train_out;
      const std::string metrics_path =
          train_metrics.empty() ? config.paths.out_dir + "/metrics.csv"
                                : train_metrics;
      const CorpusManifest manifest = load_manifest(manifest_path);
      const TrainResult result = train(manifest, config);
      const fs::path parent = fs::path(ckpt_path).parent_path();
      if (!parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
      }
      save_checkpoint(result.state, ckpt_path);
      write_output(metrics_path, metrics_csv(result, config));
      std::cout << "checkpoint " << ckpt_path << " (hash "
                << file_checksum_hex(ckpt_path) << ", best epoch "
                << result.best_epoch << ", val srcc "
                << format_double(result.best_val_srcc) << ")\n";
      std::cout << "metrics " << metrics_path << "\n";
      return kOk;
    }

    if (*score_cmd) {
      const ModelState model = load_checkpoint(score_model);
      const ImageBuffer img = load_image(score_img);
      std::optional<ImageBuffer> ref;
      if (!score_ref.empty()) ref = load_image(score_ref);
      const QualityResult r = score_image(model, img, ref ? &*ref : nullptr);
      std::cout << quality_line(r) << "\n";
      return kOk;
    }

    if (*eval_cmd) {
      const ModelState model = load_checkpoint(eval_model);
      const CorpusManifest manifest = load_manifest(eval_corpus);
      const auto subset = manifest.distorted();
      std::vector<EvalReport> reports;
      std::vector<SampleScore> dump;
      auto run_mode = [&](ScoreMode mode) {
        EvalReport r = evaluate(model, subset, manifest, mode,
                                eval_dump.empty() ? nullptr : &dump);
        r.split = "all";
        reports.push_back(std::move(r));
      };
      if (eval_mode == "both") {
        run_mode(ScoreMode::kFullReference);
        run_mode(ScoreMode::kNoReference);
      } else {
        run_mode(mode_from_string(eval_mode));
      }
      const std::string csv = report_csv(reports, model.config);
      if (eval_out.empty())
        std::cout << csv;
      else
        write_output(eval_out, csv);
      if (!eval_dump.empty())
        write_output(eval_dump, sample_dump_csv(dump, model.config));
      for (const auto& r : reports)
        std::cerr << "mode="
                  << (r.mode == ScoreMode::kFullReference ? "FR" : "NR")
                  << " plcc=" << format_double(r.plcc)
                  << " srcc=" << format_double(r.srcc) << " n=" << r.n
                  << " skipped=" << r.skipped << "\n";
      return kOk;
    }

    if (*lodo_cmd) {
      const RunConfig config = resolve_config(lodo_cfg);
      if (lodo_cfg.print_config) {
        std::cout << config.print();
        return kOk;
      }
      const std::string manifest_path =
          lodo_corpus.empty() ? config.paths.corpus_dir + "/manifest.txt"
                              : lodo_corpus;
      const CorpusManifest manifest = load_manifest(manifest_path);
      std::vector<std::string> warnings;
      const auto reports = lodo_eval(
          [&config](const CorpusManifest& fold) {
            return train(fold, config).state;
          },
          manifest, mode_from_string(lodo_mode), &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      const std::string csv = report_csv(reports, config);
      if (lodo_out.empty())
        std::cout << csv;
      else
        write_output(lodo_out, csv);
      for (const auto& r : reports)
        std::cerr << r.split << " plcc=" << format_double(r.plcc)
                  << " srcc=" << format_double(r.srcc) << " n=" << r.n << "\n";
      return kOk;
    }

    if (*gmad_cmd) {
      const ModelState defender = load_checkpoint(gmad_model);
      const CorpusManifest manifest = load_manifest(gmad_corpus);
      std::function<double(const SampleRecord&, const CorpusManifest&)>
          attacker;
      if (gmad_attacker == "psnr") {
        attacker = psnr_attacker;
      } else {
        const ModelState attacker_model = load_checkpoint(gmad_attacker);
        attacker = [attacker_model](const SampleRecord& rec,
                                    const CorpusManifest& m) {
          const ImageBuffer dist = load_image(m.resolve(rec.path));
          const SampleRecord* ref_rec = m.find_reference(rec.ref_id);
          if (!ref_rec) throw Error("gmad: no reference for " + rec.ref_id);
          const ImageBuffer ref = load_image(m.resolve(ref_rec->path));
          return score_image(attacker_model, dist, &ref).q;
        };
      }
      const auto pairs =
          gmad_search(defender, attacker, manifest,
                      mode_from_string(gmad_mode), gmad_tol, gmad_top);
      const std::string csv = gmad_csv(pairs, defender.config);
      if (gmad_out.empty())
        std::cout << csv;
      else
        write_output(gmad_out, csv);
      return kOk;
    }

    if (*inspect_cmd) {
      const ModelState model = load_checkpoint(inspect_model);
      const std::string csv = bank_cosine_csv(model);
      if (inspect_out.empty())
        std::cout << csv;
      else
        write_output(inspect_out, csv);
      return kOk;
    }

    if (*self_cmd) return run_selftest(self_seed, self_trials);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
