#include <doctest.h>

#include <set>

#include "mqaf/textio.hpp"
#include "mqaf/trainer.hpp"
#include "test_helpers.hpp"

using namespace mqaf;
using namespace mqaf_tests;

TEST_CASE("overfit smoke: one sample, lambda 0, 200 steps reduce l_pre") {
  RunConfig config = tiny_run_config();
  config.corpus.references = 1;
  config.corpus.types = {DistortionType::kGaussianNoise};
  config.corpus.severities = {3};
  config.memory.lambda = 0.0;
  config.training.epochs = 200;  // one sample -> one step per epoch
  config.training.batch_size = 4;
  const CorpusManifest manifest = tiny_corpus(config, "overfit");
  REQUIRE(manifest.distorted().size() == 1);

  const TrainResult result = train(manifest, config);
  REQUIRE(result.log.size() == 200);
  CHECK(result.log.back().l_pre < result.log.front().l_pre);
}

TEST_CASE("same seed twice gives identical checkpoint bytes") {
  const RunConfig config = tiny_run_config();
  const CorpusManifest manifest = tiny_corpus(config, "determinism");
  const TrainResult a = train(manifest, config);
  const TrainResult b = train(manifest, config);
  const auto pa = tests_scratch("det-out") / "a.ckpt";
  const auto pb = tests_scratch("det-out2") / "b.ckpt";
  save_checkpoint(a.state, pa.string());
  save_checkpoint(b.state, pb.string());
  CHECK(read_file_bytes(pa.string()) == read_file_bytes(pb.string()));
  // Logs reproduce bit for bit as well.
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].l_pre == b.log[i].l_pre);
    CHECK(a.log[i].l_memory == b.log[i].l_memory);
  }
}

TEST_CASE("pure NR training leaves the AWN at its initialization") {
  RunConfig config = tiny_run_config();
  config.training.mode_mix = 0.0;
  const CorpusManifest manifest = tiny_corpus(config, "nr-only");
  const ModelState fresh = init_model(config);
  const TrainResult result = train(manifest, config);
  const auto before = fresh.awn.parameters();
  const auto after = result.state.awn.parameters();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i].values() == after[i].values());
  // The extractor, by contrast, must have moved.
  CHECK(fresh.extractor.kernels[0].values() !=
        result.state.extractor.kernels[0].values());
}

TEST_CASE("validation split is disjoint from training by reference id") {
  RunConfig config = tiny_run_config();
  config.corpus.references = 5;
  const CorpusManifest manifest = tiny_corpus(config, "split");
  const TrainResult result = train(manifest, config);
  CHECK(!result.val_ref_ids.empty());
  CHECK(!result.train_ref_ids.empty());
  std::set<std::string> train_set(result.train_ref_ids.begin(),
                                  result.train_ref_ids.end());
  for (const auto& v : result.val_ref_ids) CHECK(train_set.count(v) == 0);
  CHECK(train_set.size() + result.val_ref_ids.size() ==
        manifest.reference_ids().size());
}

TEST_CASE("memory-disabled training trains the reference branch only") {
  RunConfig config = tiny_run_config();
  config.memory.enabled = false;
  const CorpusManifest manifest = tiny_corpus(config, "no-memory");
  const TrainResult result = train(manifest, config);
  const ModelState fresh = init_model(config);
  // Bank and AWN stay at initialization; extractor learns.
  CHECK(result.state.bank.units.values() == fresh.bank.units.values());
  for (std::size_t i = 0; i < fresh.awn.parameters().size(); ++i)
    CHECK(result.state.awn.parameters()[i].values() ==
          fresh.awn.parameters()[i].values());
  CHECK(result.state.extractor.kernels[0].values() !=
        fresh.extractor.kernels[0].values());
  // Every epoch logged zero memory and alpha losses.
  for (const auto& e : result.log) {
    CHECK(e.l_memory == 0.0);
    CHECK(e.l_alpha == 0.0);
  }
}

TEST_CASE("metrics csv has the documented column layout") {
  const RunConfig config = tiny_run_config();
  const CorpusManifest manifest = tiny_corpus(config, "csv");
  const TrainResult result = train(manifest, config);
  const std::string csv = metrics_csv(result, config);
  CHECK(csv.find("# mqaf ") == 0);
  CHECK(csv.find("epoch,l_pre,l_memory,l_alpha,mean_alpha,val_plcc,val_srcc") !=
        std::string::npos);
}

TEST_CASE("gradient routing audit passes on a fresh model") {
  RunConfig config = tiny_run_config();
  const ModelState model = init_model(config);
  const ImageBuffer ref = synth_reference(16, 21);
  const ImageBuffer dist =
      apply_distortion(ref, DistortionType::kGaussianBlur, 4, 3);
  CHECK_NOTHROW(audit_gradient_routing(model, ref, dist, 0.3));
}

TEST_CASE("training rejects an empty corpus") {
  RunConfig config = tiny_run_config();
  CorpusManifest manifest;
  manifest.records.push_back({"refs/x.ppm", "x", "reference", 0, 1.0});
  CHECK_THROWS_AS(train(manifest, config), Error);
}
