#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "mqaf/evaluation.hpp"
#include "mqaf/metrics.hpp"
#include "mqaf/selftest.hpp"
#include "mqaf/textio.hpp"
#include "mqaf/trainer.hpp"
#include "mqaf/version.hpp"

namespace py = pybind11;
using namespace mqaf;

namespace {

RunConfig config_from_text(const std::string& text) {
  return RunConfig::parse_text(text, "<config>");
}

py::dict result_to_dict(const QualityResult& r) {
  py::dict d;
  d["mode"] = r.mode == ScoreMode::kFullReference ? "FR" : "NR";
  d["q"] = r.q;
  d["q_raw"] = r.q_raw;
  d["s_dist"] = r.s_dist;
  if (r.s_ref) d["s_ref"] = *r.s_ref;
  if (r.alpha) d["alpha"] = *r.alpha;
  d["degenerate"] = r.degenerate;
  return d;
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["split"] = r.split;
  d["mode"] = r.mode == ScoreMode::kFullReference ? "FR" : "NR";
  d["plcc"] = r.plcc;
  d["srcc"] = r.srcc;
  d["n"] = r.n;
  d["skipped"] = r.skipped;
  py::dict per_type;
  for (const auto& t : r.per_type) {
    py::dict row;
    row["plcc"] = t.plcc;
    row["srcc"] = t.srcc;
    row["n"] = t.n;
    per_type[py::str(t.type)] = row;
  }
  d["per_type"] = per_type;
  return d;
}

ScoreMode parse_mode(const std::string& mode) {
  if (mode == "FR" || mode == "fr") return ScoreMode::kFullReference;
  if (mode == "NR" || mode == "nr") return ScoreMode::kNoReference;
  throw ConfigError("mode must be 'FR' or 'NR', got '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_mqaf, m) {
  m.doc() = "memory-driven dual-mode image quality assessment";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("default_config", [] { return RunConfig().print(); },
        "Canonical text of the documented default configuration");

  m.def(
      "generate_corpus",
      [](const std::string& out_dir, const std::string& config_text) {
        const RunConfig config = config_from_text(config_text);
        const CorpusManifest manifest =
            generate_corpus(config.corpus, config.seed, out_dir);
        py::dict d;
        d["manifest"] = out_dir + "/manifest.txt";
        d["records"] = manifest.records.size();
        d["distorted"] = manifest.distorted().size();
        d["config_hash"] = manifest.config_hash;
        return d;
      },
      py::arg("out_dir"), py::arg("config_text") = "",
      "Generate the synthetic distortion corpus");

  m.def(
      "train",
      [](const std::string& manifest_path, const std::string& checkpoint_out,
         const std::string& config_text,
         const std::optional<std::string>& metrics_out) {
        const RunConfig config = config_from_text(config_text);
        const CorpusManifest manifest = load_manifest(manifest_path);
        const TrainResult result = train(manifest, config);
        save_checkpoint(result.state, checkpoint_out);
        if (metrics_out)
          write_file_text(*metrics_out, metrics_csv(result, config));
        py::dict d;
        d["checkpoint"] = checkpoint_out;
        d["best_epoch"] = result.best_epoch;
        d["best_val_srcc"] = result.best_val_srcc;
        d["epochs"] = result.log.size();
        return d;
      },
      py::arg("manifest"), py::arg("checkpoint_out"),
      py::arg("config_text") = "", py::arg("metrics_out") = std::nullopt,
      "Train a model on a corpus manifest and save the checkpoint");

  m.def(
      "score",
      [](const std::string& checkpoint, const std::string& image,
         const std::optional<std::string>& ref) {
        const ModelState model = load_checkpoint(checkpoint);
        const ImageBuffer img = load_image(image);
        std::optional<ImageBuffer> ref_img;
        if (ref) ref_img = load_image(*ref);
        return result_to_dict(
            score_image(model, img, ref_img ? &*ref_img : nullptr));
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("ref") = std::nullopt,
      "Score one image: full-reference when ref is given, else no-reference");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& manifest_path,
         const std::string& mode) {
        const ModelState model = load_checkpoint(checkpoint);
        const CorpusManifest manifest = load_manifest(manifest_path);
        EvalReport report = evaluate(model, manifest.distorted(), manifest,
                                     parse_mode(mode));
        report.split = "all";
        return report_to_dict(report);
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("mode") = "NR",
      "Correlation report over a corpus");

  m.def(
      "gmad",
      [](const std::string& checkpoint, const std::string& manifest_path,
         double tolerance, std::size_t top, const std::string& mode) {
        const ModelState defender = load_checkpoint(checkpoint);
        const CorpusManifest manifest = load_manifest(manifest_path);
        const auto pairs = gmad_search(defender, psnr_attacker, manifest,
                                       parse_mode(mode), tolerance, top);
        py::list out;
        for (const auto& p : pairs) {
          py::dict d;
          d["id_a"] = p.id_a;
          d["id_b"] = p.id_b;
          d["defender_gap"] = p.defender_gap;
          d["attacker_gap"] = p.attacker_gap;
          out.append(d);
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("tolerance") = 0.02,
      py::arg("top") = 5, py::arg("mode") = "FR",
      "Maximum-differentiation pair search with the PSNR attacker");

  m.def("plcc", &plcc, py::arg("x"), py::arg("y"),
        "Pearson linear correlation");
  m.def("srcc", &srcc, py::arg("x"), py::arg("y"),
        "Spearman rank correlation (average ranks under ties)");

  m.def(
      "psnr",
      [](const std::string& a, const std::string& b) {
        return psnr(load_image(a), load_image(b));
      },
      py::arg("a"), py::arg("b"), "PSNR between two PPM files, in dB");

  m.def(
      "apply_distortion",
      [](const std::string& image_in, const std::string& image_out,
         const std::string& type, int severity, std::uint64_t seed) {
        const ImageBuffer img = load_image(image_in);
        save_image(
            apply_distortion(img, distortion_from_name(type), severity, seed),
            image_out);
      },
      py::arg("image_in"), py::arg("image_out"), py::arg("type"),
      py::arg("severity"), py::arg("seed") = 0,
      "Apply one synthetic distortion to a PPM file");

  m.def(
      "selftest",
      [](std::size_t trials, std::uint64_t seed) {
        auto checks = selftest::gradient_suite(seed, trials);
        for (auto& c : selftest::oracle_suite(seed))
          checks.push_back(std::move(c));
        for (auto& c : selftest::contract_suite(seed))
          checks.push_back(std::move(c));
        py::list failures;
        for (const auto& c : checks)
          if (!c.passed) failures.append(c.name + ": " + c.detail);
        py::dict d;
        d["checks"] = checks.size();
        d["failures"] = failures;
        d["passed"] = failures.empty();
        return d;
      },
      py::arg("trials") = 20, py::arg("seed") = 20240101,
      "Run the oracle and property suite");
}
