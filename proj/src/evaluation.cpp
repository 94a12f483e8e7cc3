#include "mqaf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mqaf/metrics.hpp"
#include "mqaf/textio.hpp"

namespace mqaf {

namespace {

const char* mode_name(ScoreMode m) {
  return m == ScoreMode::kFullReference ? "FR" : "NR";
}

}  // namespace

EvalReport evaluate(const ModelState& model,
                    const std::vector<SampleRecord>& subset,
                    const CorpusManifest& manifest, ScoreMode mode,
                    std::vector<SampleScore>* dump) {
  EvalReport report;
  report.mode = mode;

  std::vector<double> qs, ts;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      by_type;

  for (const auto& rec : subset) {
    if (rec.is_reference()) continue;
    ImageBuffer dist;
    ImageBuffer ref;
    const ImageBuffer* ref_ptr = nullptr;
    try {
      dist = load_image(manifest.resolve(rec.path));
      if (mode == ScoreMode::kFullReference) {
        const SampleRecord* ref_rec = manifest.find_reference(rec.ref_id);
        if (!ref_rec)
          throw IoError("no reference record for id " + rec.ref_id);
        ref = load_image(manifest.resolve(ref_rec->path));
        ref_ptr = &ref;
      }
    } catch (const IoError&) {
      ++report.skipped;
      continue;
    }
    const QualityResult qr = score_image(model, dist, ref_ptr);
    qs.push_back(qr.q);
    ts.push_back(rec.q_true);
    auto& bucket = by_type[rec.type];
    bucket.first.push_back(qr.q);
    bucket.second.push_back(rec.q_true);
    if (dump) {
      SampleScore s;
      s.id = rec.id();
      s.q = qr.q;
      s.q_true = rec.q_true;
      s.s_dist = qr.s_dist;
      if (qr.s_ref) {
        s.s_ref = *qr.s_ref;
        s.has_fr_fields = true;
      }
      if (qr.alpha) s.alpha = *qr.alpha;
      dump->push_back(std::move(s));
    }
  }

  if (qs.size() < 2)
    throw Error("evaluate: need at least 2 scoreable samples, got " +
                std::to_string(qs.size()));
  report.n = qs.size();
  report.plcc = plcc(qs, ts);
  report.srcc = srcc(qs, ts);
  for (const auto& [type, bucket] : by_type) {
    if (bucket.first.size() < 2) continue;
    TypeCorrelation tc;
    tc.type = type;
    tc.n = bucket.first.size();
    tc.plcc = plcc(bucket.first, bucket.second);
    tc.srcc = srcc(bucket.first, bucket.second);
    report.per_type.push_back(std::move(tc));
  }
  return report;
}

std::vector<EvalReport> lodo_eval(
    const std::function<ModelState(const CorpusManifest&)>& train_fn,
    const CorpusManifest& manifest, ScoreMode eval_mode,
    std::vector<std::string>* warnings) {
  const auto types = manifest.distortion_types();
  if (types.size() < 2)
    throw Error("lodo: need at least 2 distortion types, manifest has " +
                std::to_string(types.size()));

  std::vector<EvalReport> reports;
  for (const std::string& held_out : types) {
    std::vector<SampleRecord> test;
    CorpusManifest train_manifest;
    train_manifest.seed = manifest.seed;
    train_manifest.config_hash = manifest.config_hash;
    train_manifest.base_dir = manifest.base_dir;
    for (const auto& rec : manifest.records) {
      if (!rec.is_reference() && rec.type == held_out)
        test.push_back(rec);
      else
        train_manifest.records.push_back(rec);
    }
    if (test.size() < 2) {
      if (warnings)
        warnings->push_back("lodo: type '" + held_out + "' has only " +
                            std::to_string(test.size()) +
                            " samples, skipped");
      continue;
    }
    const ModelState model = train_fn(train_manifest);
    EvalReport report = evaluate(model, test, manifest, eval_mode);
    report.split = "lodo:" + held_out;
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<GmadPair> gmad_search_scores(const std::vector<std::string>& ids,
                                         const std::vector<double>& defender,
                                         const std::vector<double>& attacker,
                                         double tolerance, std::size_t top_m) {
  if (ids.size() != defender.size() || ids.size() != attacker.size())
    throw Error("gmad: score lists and ids differ in length");
  if (ids.size() < 2)
    throw Error("gmad: need at least 2 samples, got " +
                std::to_string(ids.size()));

  std::vector<GmadPair> pairs;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double dgap = std::abs(defender[i] - defender[j]);
      if (dgap > tolerance) continue;
      GmadPair p;
      const bool ordered = ids[i] <= ids[j];
      p.id_a = ordered ? ids[i] : ids[j];
      p.id_b = ordered ? ids[j] : ids[i];
      p.defender_gap = dgap;
      p.attacker_gap = std::abs(attacker[i] - attacker[j]);
      pairs.push_back(std::move(p));
    }
  std::sort(pairs.begin(), pairs.end(),
            [](const GmadPair& a, const GmadPair& b) {
              if (a.attacker_gap != b.attacker_gap)
                return a.attacker_gap > b.attacker_gap;
              if (a.id_a != b.id_a) return a.id_a < b.id_a;
              return a.id_b < b.id_b;
            });
  if (pairs.size() > top_m) pairs.resize(top_m);
  return pairs;
}

std::vector<GmadPair> gmad_search(
    const ModelState& defender,
    const std::function<double(const SampleRecord&, const CorpusManifest&)>&
        attacker,
    const CorpusManifest& manifest, ScoreMode defender_mode, double tolerance,
    std::size_t top_m) {
  std::vector<std::string> ids;
  std::vector<double> def_scores, att_scores;
  for (const auto& rec : manifest.distorted()) {
    ImageBuffer dist = load_image(manifest.resolve(rec.path));
    ImageBuffer ref;
    const ImageBuffer* ref_ptr = nullptr;
    if (defender_mode == ScoreMode::kFullReference) {
      const SampleRecord* ref_rec = manifest.find_reference(rec.ref_id);
      if (!ref_rec) throw Error("gmad: no reference for id " + rec.ref_id);
      ref = load_image(manifest.resolve(ref_rec->path));
      ref_ptr = &ref;
    }
    ids.push_back(rec.id());
    def_scores.push_back(score_image(defender, dist, ref_ptr).q);
    att_scores.push_back(attacker(rec, manifest));
  }
  return gmad_search_scores(ids, def_scores, att_scores, tolerance, top_m);
}

double psnr_attacker(const SampleRecord& rec, const CorpusManifest& manifest) {
  const SampleRecord* ref_rec = manifest.find_reference(rec.ref_id);
  if (!ref_rec)
    throw Error("psnr attacker: no reference for id " + rec.ref_id);
  const ImageBuffer ref = load_image(manifest.resolve(ref_rec->path));
  const ImageBuffer dist = load_image(manifest.resolve(rec.path));
  const double v = psnr(dist, ref);
  // Identical images give +inf; cap so gaps stay finite.
  return std::isinf(v) ? 99.0 : v;
}

std::string report_csv(const std::vector<EvalReport>& reports,
                       const RunConfig& config) {
  std::ostringstream os;
  os << provenance_block(config);
  os << "split,mode,scope,plcc,srcc,n,skipped\n";
  for (const auto& r : reports) {
    os << r.split << "," << mode_name(r.mode) << ",overall,"
       << format_double(r.plcc) << "," << format_double(r.srcc) << "," << r.n
       << "," << r.skipped << "\n";
    for (const auto& t : r.per_type)
      os << r.split << "," << mode_name(r.mode) << "," << t.type << ","
         << format_double(t.plcc) << "," << format_double(t.srcc) << ","
         << t.n << ",0\n";
  }
  return os.str();
}

std::string sample_dump_csv(const std::vector<SampleScore>& scores,
                            const RunConfig& config) {
  std::ostringstream os;
  os << provenance_block(config);
  os << "id,s_ref,s_dist,alpha,q,q_true\n";
  for (const auto& s : scores) {
    const std::string s_ref = s.has_fr_fields ? format_double(s.s_ref) : "";
    const std::string alpha = s.has_fr_fields ? format_double(s.alpha) : "";
    os << s.id << "," << s_ref << "," << format_double(s.s_dist) << ","
       << alpha << "," << format_double(s.q) << "," << format_double(s.q_true)
       << "\n";
  }
  return os.str();
}

std::string gmad_csv(const std::vector<GmadPair>& pairs,
                     const RunConfig& config) {
  std::ostringstream os;
  os << provenance_block(config);
  os << "id_a,id_b,defender_gap,attacker_gap\n";
  for (const auto& p : pairs)
    os << p.id_a << "," << p.id_b << "," << format_double(p.defender_gap)
       << "," << format_double(p.attacker_gap) << "\n";
  return os.str();
}

std::string bank_cosine_csv(const ModelState& model) {
  const auto cos = bank_row_cosines(model.bank);
  const std::size_t k = model.bank.size();
  std::ostringstream os;
  os << provenance_block(model.config);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j)
      os << (j ? "," : "") << format_double(cos[i * k + j]);
    os << "\n";
  }
  return os.str();
}

}  // namespace mqaf
