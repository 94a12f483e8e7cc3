#include <doctest.h>

#include <set>

#include "mqaf/evaluation.hpp"
#include "mqaf/rng.hpp"
#include "test_helpers.hpp"

using namespace mqaf;
using namespace mqaf_tests;

TEST_CASE("evaluating twice yields identical reports and dumps") {
  const RunConfig config = tiny_run_config();
  const CorpusManifest manifest = tiny_corpus(config, "eval-determinism");
  const ModelState model = init_model(config);
  std::vector<SampleScore> dump_a, dump_b;
  const EvalReport a = evaluate(model, manifest.distorted(), manifest,
                                ScoreMode::kFullReference, &dump_a);
  const EvalReport b = evaluate(model, manifest.distorted(), manifest,
                                ScoreMode::kFullReference, &dump_b);
  CHECK(a.plcc == b.plcc);
  CHECK(a.srcc == b.srcc);
  REQUIRE(dump_a.size() == dump_b.size());
  for (std::size_t i = 0; i < dump_a.size(); ++i)
    CHECK(dump_a[i].q == dump_b[i].q);
}

TEST_CASE("FR and NR runs share identical per-sample s_dist") {
  const RunConfig config = tiny_run_config();
  const CorpusManifest manifest = tiny_corpus(config, "eval-sdist");
  const ModelState model = init_model(config);
  std::vector<SampleScore> fr, nr;
  evaluate(model, manifest.distorted(), manifest, ScoreMode::kFullReference,
           &fr);
  evaluate(model, manifest.distorted(), manifest, ScoreMode::kNoReference,
           &nr);
  REQUIRE(fr.size() == nr.size());
  for (std::size_t i = 0; i < fr.size(); ++i) {
    CHECK(fr[i].s_dist == nr[i].s_dist);  // bitwise
    CHECK(nr[i].q == nr[i].s_dist);       // NR score is s_dist exactly
  }
}

TEST_CASE("missing reference files are skipped and counted") {
  const RunConfig config = tiny_run_config();
  CorpusManifest manifest = tiny_corpus(config, "eval-missing");
  // Point one reference at a nonexistent file.
  for (auto& r : manifest.records)
    if (r.is_reference() && r.ref_id == "ref000") r.path = "refs/gone.ppm";
  const EvalReport report =
      evaluate(init_model(config), manifest.distorted(), manifest,
               ScoreMode::kFullReference);
  const std::size_t per_ref =
      config.corpus.types.size() * config.corpus.severities.size();
  CHECK(report.skipped == per_ref);
  CHECK(report.n == manifest.distorted().size() - per_ref);
}

TEST_CASE("per-type breakdown covers every distortion type") {
  const RunConfig config = tiny_run_config();
  const CorpusManifest manifest = tiny_corpus(config, "eval-types");
  const ModelState model = init_model(config);
  const EvalReport report = evaluate(model, manifest.distorted(), manifest,
                                     ScoreMode::kNoReference);
  CHECK(report.per_type.size() == config.corpus.types.size());
  for (const auto& t : report.per_type) CHECK(t.n >= 2);
}

TEST_CASE("lodo trains once per type on disjoint folds") {
  RunConfig config = tiny_run_config();
  config.corpus.types = {DistortionType::kGaussianNoise,
                         DistortionType::kGaussianBlur,
                         DistortionType::kContrastScaling};
  const CorpusManifest manifest = tiny_corpus(config, "lodo");
  std::vector<CorpusManifest> folds;
  const auto reports = lodo_eval(
      [&](const CorpusManifest& fold) {
        folds.push_back(fold);
        return init_model(config);  // scoring quality is irrelevant here
      },
      manifest, ScoreMode::kNoReference);
  REQUIRE(reports.size() == 3);
  REQUIRE(folds.size() == 3);
  const auto types = manifest.distortion_types();
  for (std::size_t i = 0; i < folds.size(); ++i) {
    // The held-out type never appears in the fold's training manifest.
    for (const auto& rec : folds[i].records)
      CHECK(rec.type != types[i]);
    CHECK(reports[i].split == "lodo:" + types[i]);
    // References remain available to every fold.
    CHECK(folds[i].reference_ids().size() == config.corpus.references);
  }
}

TEST_CASE("lodo needs at least two types") {
  RunConfig config = tiny_run_config();
  config.corpus.types = {DistortionType::kGaussianNoise};
  const CorpusManifest manifest = tiny_corpus(config, "lodo-single");
  CHECK_THROWS_AS(lodo_eval([&](const CorpusManifest&) {
                    return init_model(config);
                  },
                            manifest, ScoreMode::kNoReference),
                  Error);
}

TEST_CASE("lodo on a duplicated distortion type scores near in-distribution") {
  // Duplicate gaussian-noise under a second name: holding out the clone
  // still leaves the same distortion in training, so the held-out
  // correlation should be close to the in-distribution one.
  RunConfig config = tiny_run_config();
  config.corpus.types = {DistortionType::kGaussianNoise,
                         DistortionType::kGaussianBlur};
  config.training.epochs = 4;
  CorpusManifest manifest = tiny_corpus(config, "lodo-dup");
  CorpusManifest doubled = manifest;
  for (const auto& rec : manifest.records) {
    if (rec.type != "gaussian-noise") continue;
    SampleRecord clone = rec;
    clone.type = "gaussian-noise-b";
    doubled.records.push_back(clone);
  }
  std::vector<EvalReport> reports = lodo_eval(
      [&](const CorpusManifest& fold) { return train(fold, config).state; },
      doubled, ScoreMode::kFullReference);
  double held_out_clone = 0.0, in_dist = 0.0;
  for (const auto& r : reports) {
    if (r.split == "lodo:gaussian-noise-b") held_out_clone = r.srcc;
    if (r.split == "lodo:gaussian-noise") in_dist = r.srcc;
  }
  CHECK(std::abs(held_out_clone - in_dist) < 0.35);
}

TEST_CASE("gmad self-competition bounds the attacker gap by the tolerance") {
  std::vector<std::string> ids;
  std::vector<double> scores;
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    ids.push_back("s" + std::to_string(100 + i));
    scores.push_back(rng.uniform(0.0, 1.0));
  }
  const double tol = 0.07;
  const auto pairs = gmad_search_scores(ids, scores, scores, tol, 5);
  for (const auto& p : pairs) {
    CHECK(p.defender_gap <= tol);
    CHECK(p.attacker_gap <= tol);  // attacker == defender
  }
}

TEST_CASE("gmad returns exactly the one in-tolerance pair of two samples") {
  const auto pairs = gmad_search_scores({"b", "a"}, {0.5, 0.51}, {0.1, 0.9},
                                        0.02, 5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].id_a == "a");
  CHECK(pairs[0].id_b == "b");
  CHECK(pairs[0].attacker_gap == doctest::Approx(0.8));
}

TEST_CASE("gmad with nothing inside tolerance returns an empty list") {
  const auto pairs =
      gmad_search_scores({"a", "b"}, {0.1, 0.9}, {0.5, 0.5}, 0.05, 5);
  CHECK(pairs.empty());
}
