#include "mqaf/trainer.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mqaf/metrics.hpp"
#include "mqaf/ops.hpp"
#include "mqaf/optimizer.hpp"
#include "mqaf/rng.hpp"
#include "mqaf/scoring.hpp"
#include "mqaf/textio.hpp"

namespace mqaf {

namespace {

void clear_grads(const std::vector<Tensor>& params) {
  for (auto p : params) p.zero_grad();
}

bool any_grad(const std::vector<Tensor>& params) {
  for (const auto& p : params)
    if (p.has_grad()) return true;
  return false;
}

std::vector<std::vector<double>> snapshot_values(
    const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.values());
  return out;
}

void restore_values(std::vector<Tensor>& params,
                    const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].mutable_values() = snap[i];
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.below(i)]);
}

// Solves (A + lambda*I) x = b for symmetric positive definite A via
// Cholesky. A is n x n row major and is overwritten.
std::vector<double> solve_ridge(std::vector<double> a, std::vector<double> b,
                                std::size_t n, double lambda) {
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
  // Cholesky factorization A = L L^T.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (sum <= 0.0) throw NumericError("ridge solve: matrix not SPD");
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  // Forward then back substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
    b[i] = sum / a[i * n + i];
  }
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double sum = b[i];
    for (std::size_t k = i + 1; k < n; ++k) sum -= a[k * n + i] * b[k];
    b[i] = sum / a[i * n + i];
  }
  return b;
}

// Data-driven bank seeding. Every unit starts near a ridge-fit direction w
// whose projection |<w/||w||, f>| already orders the training samples by
// quality, perturbed by a distinct clean-reference deviation so units are
// distinguishable prototypes the decorrelation loss can push apart.
template <typename ImageOf, typename ReferenceOf>
void seed_memory_bank(ModelState& model,
                      const std::vector<SampleRecord>& train_samples,
                      const std::vector<std::string>& train_ref_ids,
                      ImageOf&& image_of, ReferenceOf&& reference_of,
                      const RunConfig& config) {
  const std::size_t in_size = config.extractor.input_size;
  const std::size_t dim = model.bank.dim();

  std::vector<std::vector<double>> feats;
  std::vector<double> targets;
  for (const auto& rec : train_samples) {
    const ImageBuffer crop_img =
        center_crop(image_of(rec.path), in_size, in_size);
    const Features f = extract(crop_img, model.extractor, config.extractor);
    feats.push_back(f.vector.values());
    targets.push_back(rec.q_true);
  }

  // Gram matrix and right-hand side of the least-squares fit.
  std::vector<double> gram(dim * dim, 0.0), rhs(dim, 0.0);
  for (std::size_t s = 0; s < feats.size(); ++s) {
    const auto& f = feats[s];
    for (std::size_t i = 0; i < dim; ++i) {
      rhs[i] += f[i] * targets[s];
      for (std::size_t j = 0; j <= i; ++j) gram[i * dim + j] += f[i] * f[j];
    }
  }
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i + 1; j < dim; ++j)
      gram[i * dim + j] = gram[j * dim + i];
  const std::vector<double> w = solve_ridge(std::move(gram), rhs, dim, 0.1);
  double wn = 0.0;
  for (double v : w) wn += v * v;
  wn = std::sqrt(wn);
  if (wn < 1e-12) return;  // degenerate fit, keep the random init

  // Clean-reference deviations flavor the individual units.
  std::vector<std::vector<double>> devs;
  std::vector<double> ref_mean(dim, 0.0);
  for (const auto& ref_id : train_ref_ids) {
    const ImageBuffer crop_img =
        center_crop(reference_of(ref_id), in_size, in_size);
    const Features f = extract(crop_img, model.extractor, config.extractor);
    devs.push_back(f.vector.values());
    for (std::size_t d = 0; d < dim; ++d) ref_mean[d] += devs.back()[d];
  }
  for (auto& m : ref_mean) m /= static_cast<double>(devs.size());
  for (auto& dev : devs) {
    double n = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      dev[d] -= ref_mean[d];
      n += dev[d] * dev[d];
    }
    n = std::sqrt(n);
    if (n > 1e-12)
      for (auto& v : dev) v /= n;
  }

  Rng rng(hash_mix(config.seed, 307));
  auto& bank_values = model.bank.units.mutable_values();
  for (std::size_t k = 0; k < model.bank.size(); ++k) {
    const auto& dev = devs[k % devs.size()];
    for (std::size_t d = 0; d < dim; ++d)
      bank_values[k * dim + d] =
          w[d] / wn + 0.05 * dev[d] + 0.02 * rng.normal();
  }
}

}  // namespace

void audit_gradient_routing(const ModelState& model,
                            const ImageBuffer& ref_crop,
                            const ImageBuffer& dist_crop, double q_true) {
  const auto& config = model.config;
  auto theta = model.extractor.parameters();
  std::vector<Tensor> bank_params = {model.bank.units};
  auto awn_params = model.awn.parameters();
  auto clear_all = [&] {
    clear_grads(theta);
    clear_grads(bank_params);
    clear_grads(awn_params);
  };

  if (config.memory.enabled) {
    // l_memory must reach the bank only.
    clear_all();
    decorrelation_loss(model.bank, config.memory.epsilon,
                       config.memory.covariance_axis)
        .backward();
    if (any_grad(theta) || any_grad(awn_params))
      throw Error("gradient routing: memory loss leaked beyond the bank");
    if (!any_grad(bank_params))
      throw Error("gradient routing: memory loss did not reach the bank");

    // l_alpha must reach the AWN only.
    clear_all();
    const CropScore fr = score_crops(model, dist_crop, &ref_crop,
                                     ScoreMode::kFullReference);
    const double at = alpha_target(fr.s_ref->item(), fr.s_dist.item(), q_true,
                                   config.fusion.alpha_target_inverted);
    square(add_scalar(*fr.alpha, -at)).backward();
    if (any_grad(theta) || any_grad(bank_params))
      throw Error("gradient routing: alpha loss leaked beyond the AWN");
    if (!any_grad(awn_params))
      throw Error("gradient routing: alpha loss did not reach the AWN");
  }

  // l_pre must reach extractor (and bank when the memory branch is on).
  clear_all();
  const ScoreMode mode = ScoreMode::kFullReference;
  const CropScore fr2 = score_crops(model, dist_crop, &ref_crop, mode);
  square(add_scalar(fr2.q, -q_true)).backward();
  if (!any_grad(theta))
    throw Error("gradient routing: prediction loss did not reach extractor");
  if (config.memory.enabled && !any_grad(bank_params))
    throw Error("gradient routing: prediction loss did not reach the bank");
  if (config.memory.enabled && config.fusion.detach_alpha_in_q &&
      any_grad(awn_params))
    throw Error(
        "gradient routing: prediction loss reached the AWN despite "
        "detach_alpha_in_q");
  clear_all();
}

TrainResult train(const CorpusManifest& manifest, const RunConfig& config) {
  config.validate();
  const auto dist_records = manifest.distorted();
  if (dist_records.empty())
    throw Error("train: manifest holds no distorted samples");

  // Image cache; the corpus is desk scale and fits in memory.
  std::map<std::string, ImageBuffer> cache;
  auto image_of = [&](const std::string& rel) -> const ImageBuffer& {
    auto it = cache.find(rel);
    if (it == cache.end())
      it = cache.emplace(rel, load_image(manifest.resolve(rel))).first;
    return it->second;
  };
  auto reference_of = [&](const std::string& ref_id) -> const ImageBuffer& {
    const SampleRecord* rec = manifest.find_reference(ref_id);
    if (!rec)
      throw Error("train: manifest lacks reference image for id " + ref_id);
    return image_of(rec->path);
  };

  // 90/10 split by reference id, never by sample.
  std::vector<std::string> ref_ids = manifest.reference_ids();
  Rng split_rng(hash_mix(config.seed, 101));
  shuffle_in_place(ref_ids, split_rng);
  std::size_t n_val = 0;
  if (ref_ids.size() >= 2)
    n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(0.1 * static_cast<double>(ref_ids.size()))));
  TrainResult result;
  result.val_ref_ids.assign(ref_ids.end() - n_val, ref_ids.end());
  result.train_ref_ids.assign(ref_ids.begin(), ref_ids.end() - n_val);
  const std::set<std::string> val_set(result.val_ref_ids.begin(),
                                      result.val_ref_ids.end());

  std::vector<SampleRecord> train_samples, val_samples;
  for (const auto& r : dist_records)
    (val_set.count(r.ref_id) ? val_samples : train_samples).push_back(r);
  if (train_samples.empty())
    throw Error("train: training split is empty");

  ModelState model = init_model(config);
  const bool memory_on = config.memory.enabled;
  const std::size_t in_size = config.extractor.input_size;

  if (memory_on)
    seed_memory_bank(model, train_samples, result.train_ref_ids, image_of,
                     reference_of, config);

  AdamOptimizer opt({config.training.learning_rate, 0.9, 0.999, 1e-8,
                     config.training.weight_decay});
  opt.add_group("extractor", model.extractor.parameters());
  if (memory_on) {
    opt.add_group("memory", {model.bank.units});
    opt.add_group("awn", model.awn.parameters());
  }

  {
    // Routing audit on the first training sample before any step.
    const auto& first = train_samples.front();
    const ImageBuffer ref_crop =
        center_crop(reference_of(first.ref_id), in_size, in_size);
    const ImageBuffer dist_crop =
        center_crop(image_of(first.path), in_size, in_size);
    audit_gradient_routing(model, ref_crop, dist_crop, first.q_true);
  }

  const double nan_v = std::numeric_limits<double>::quiet_NaN();
  auto validate_split =
      [&](ScoreMode mode) -> std::pair<double, double> {
    std::vector<double> qs, ts;
    for (const auto& r : val_samples) {
      const ImageBuffer& dist = image_of(r.path);
      const ImageBuffer* ref = mode == ScoreMode::kFullReference
                                   ? &reference_of(r.ref_id)
                                   : nullptr;
      const QualityResult qr = score_image(model, dist, ref);
      qs.push_back(qr.q);
      ts.push_back(r.q_true);
    }
    // Degenerate predictions (constant scores, tiny split) are reported as
    // NaN instead of failing the run.
    try {
      return {plcc(qs, ts), srcc(qs, ts)};
    } catch (const Error&) {
      return {nan_v, nan_v};
    }
  };
  // Selection follows the trained mode: FR when there are FR batches (or
  // the memory branch is off), NR for pure-NR training.
  const ScoreMode val_mode = (!memory_on || config.training.mode_mix > 0.0)
                                 ? ScoreMode::kFullReference
                                 : ScoreMode::kNoReference;

  auto params = model.parameters();
  std::vector<std::vector<double>> best_snapshot;
  bool have_best = false;
  result.best_val_srcc = -2.0;
  result.best_epoch = 0;

  for (std::size_t epoch = 0; epoch < config.training.epochs; ++epoch) {
    Rng rng(hash_mix(hash_mix(config.seed, 211), epoch));
    std::vector<std::size_t> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_in_place(order, rng);

    double sum_pre = 0.0, sum_mem = 0.0, sum_alpha_loss = 0.0;
    double sum_alpha = 0.0;
    std::size_t n_batches = 0, n_alpha = 0;

    for (std::size_t start = 0; start < order.size();
         start += config.training.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + config.training.batch_size);
      const bool fr_batch =
          !memory_on || rng.uniform() < config.training.mode_mix;

      std::vector<SamplePrediction> preds;
      preds.reserve(end - start);
      for (std::size_t bi = start; bi < end; ++bi) {
        const auto& rec = train_samples[order[bi]];
        const ImageBuffer& dist_img = image_of(rec.path);
        if (dist_img.width < in_size || dist_img.height < in_size)
          throw Error("train: sample " + rec.id() + " is smaller than the " +
                      std::to_string(in_size) + "px extractor input");
        const std::size_t mx = dist_img.width - in_size;
        const std::size_t my = dist_img.height - in_size;
        const std::size_t ox = mx ? rng.below(mx + 1) : 0;
        const std::size_t oy = my ? rng.below(my + 1) : 0;
        const ImageBuffer dist_crop = crop(dist_img, ox, oy, in_size, in_size);

        SamplePrediction sp;
        sp.q_true = rec.q_true;
        if (fr_batch) {
          const ImageBuffer ref_crop =
              crop(reference_of(rec.ref_id), ox, oy, in_size, in_size);
          const CropScore cs = score_crops(model, dist_crop, &ref_crop,
                                           ScoreMode::kFullReference);
          sp.q = cs.q;
          if (memory_on) {
            sp.alpha = cs.alpha;
            sp.alpha_target = alpha_target(
                cs.s_ref->item(), cs.s_dist.item(), rec.q_true,
                config.fusion.alpha_target_inverted);
            sum_alpha += cs.alpha->item();
            ++n_alpha;
          }
        } else {
          const CropScore cs =
              score_crops(model, dist_crop, nullptr, ScoreMode::kNoReference);
          sp.q = cs.q;
        }
        preds.push_back(std::move(sp));
      }

      const LossBreakdown loss = total_loss(
          preds, model.bank, config.memory.lambda, config.memory.epsilon,
          config.memory.covariance_axis, memory_on);
      if (!std::isfinite(loss.l_total))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + " step " +
                           std::to_string(n_batches));
      loss.total.backward();
      opt.step();
      opt.zero_grad();

      sum_pre += loss.l_pre;
      sum_mem += loss.l_memory;
      sum_alpha_loss += loss.l_alpha;
      ++n_batches;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.l_pre = sum_pre / static_cast<double>(n_batches);
    stats.l_memory = sum_mem / static_cast<double>(n_batches);
    stats.l_alpha = sum_alpha_loss / static_cast<double>(n_batches);
    stats.mean_alpha =
        n_alpha ? sum_alpha / static_cast<double>(n_alpha) : nan_v;
    if (!val_samples.empty()) {
      const auto [p, s] = validate_split(val_mode);
      stats.val_plcc = p;
      stats.val_srcc = s;
      if (s > result.best_val_srcc) {
        result.best_val_srcc = s;
        result.best_epoch = epoch;
        best_snapshot = snapshot_values(params);
        have_best = true;
      }
    } else {
      stats.val_plcc = nan_v;
      stats.val_srcc = nan_v;
    }
    result.log.push_back(stats);
  }

  if (have_best) {
    restore_values(params, best_snapshot);
  } else {
    result.best_epoch = config.training.epochs - 1;
    result.best_val_srcc = nan_v;
  }
  result.state = std::move(model);
  return result;
}

std::string metrics_csv(const TrainResult& result, const RunConfig& config) {
  std::ostringstream os;
  os << provenance_block(config);
  os << "epoch,l_pre,l_memory,l_alpha,mean_alpha,val_plcc,val_srcc\n";
  for (const auto& e : result.log) {
    os << e.epoch << "," << format_double(e.l_pre) << ","
       << format_double(e.l_memory) << "," << format_double(e.l_alpha) << ","
       << format_double(e.mean_alpha) << "," << format_double(e.val_plcc)
       << "," << format_double(e.val_srcc) << "\n";
  }
  return os.str();
}

}  // namespace mqaf
