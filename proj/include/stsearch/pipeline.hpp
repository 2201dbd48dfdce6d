#pragma once

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stsearch/features.hpp"
#include "stsearch/geometry.hpp"
#include "stsearch/model.hpp"
#include "stsearch/shards.hpp"

namespace stsearch {

struct QueryConfig {
  std::size_t k_classes = 3;
  std::size_t k_results = 20;
  std::size_t final_n = 10;
  std::size_t ef_search = 100;

  void validate() const {
    if (k_classes < 1 || k_results < 1 || final_n < 1)
      fail(ErrorKind::kUsage, "query sizes must be positive");
    if (final_n > k_classes * k_results)
      fail(ErrorKind::kUsage, "final_n exceeds k_classes * k_results");
  }
};

struct ClassScore {
  FineClassId fine_class = 0;
  double probability = 0;
};

struct QueryResult {
  std::size_t rank = 0;  // 1-based
  std::string item_id;
  FineClassId fine_class = 0;
  double distance = 0;
  ShardKey source_shard;
};

struct QueryOutcome {
  std::vector<QueryResult> results;
  std::vector<ClassScore> classes;  // selected fine classes
  Gender gender = Gender::kUnknown;
  std::string reason;               // set when results are empty
};

using ModelSet = std::map<HighClassId, MultiTaskModel>;

// Top-k product types by softmax probability, lower class on ties. The
// model's product-type head indexes `children` (the high class's fine ids).
inline std::vector<ClassScore> classify_topk(const MultiTaskModel& m, const RawFeature& f,
                                             std::size_t k,
                                             const std::vector<FineClassId>& children) {
  const int task = m.task_index(kProductTypeTask);
  if (task < 0) fail(ErrorKind::kUsage, "model has no product_type task");
  if (m.tasks[task].num_classes != static_cast<int>(children.size()))
    fail(ErrorKind::kUsage, "product_type head does not match the taxonomy");
  const auto probs = softmax(forward(m, f).logits[task]);
  std::vector<ClassScore> scores;
  for (Eigen::Index i = 0; i < probs.size(); ++i) scores.push_back({static_cast<int>(i), probs(i)});
  std::stable_sort(scores.begin(), scores.end(), [](const ClassScore& a, const ClassScore& b) {
    return a.probability > b.probability;
  });
  if (k > scores.size()) {
    std::cerr << "warning: k=" << k << " exceeds " << scores.size() << " classes; clamped\n";
    k = scores.size();
  }
  scores.resize(k);
  for (auto& s : scores) s.fine_class = children[s.fine_class];
  return scores;
}

inline std::vector<ClassScore> classify_topk(const MultiTaskModel& m, const Image& patch,
                                             std::size_t k,
                                             const std::vector<FineClassId>& children) {
  return classify_topk(m, baseline_featurize(patch), k, children);
}

// Genders searched for a query: the detected one, or both adult shards when
// the detector could not tell.
inline std::vector<Gender> search_genders(Gender g) {
  if (g == Gender::kUnknown) return {Gender::kMan, Gender::kWoman};
  return {g};
}

// Classify, search the selected shards, merge by distance.
inline QueryOutcome query_feature(const RawFeature& feature, HighClassId high_class, Gender gender,
                                  const ShardManager& mgr, const MultiTaskModel& model,
                                  const QueryConfig& cfg) {
  cfg.validate();
  const auto& tax = mgr.taxonomy();
  if (tax.high(high_class).person) fail(ErrorKind::kUsage, "queries need an apparel class");
  QueryOutcome out;
  out.gender = gender;
  const Embedding emb = extract_embedding(model, feature);
  out.classes = classify_topk(model, feature, cfg.k_classes, tax.fine_classes_of(high_class));
  bool any_shard = false;
  std::vector<QueryResult> merged;
  for (const auto& cls : out.classes) {
    for (Gender g : search_genders(gender)) {
      const ShardKey key{cls.fine_class, g};
      const Shard* shard = mgr.find(key);
      if (!shard) continue;
      any_shard = true;
      for (auto& hit : shard->search(emb.base, cfg.k_results, cfg.ef_search))
        merged.push_back({0, std::move(hit.item_id), cls.fine_class, hit.distance, key});
    }
  }
  if (!any_shard) {
    out.reason = "no shard exists for the selected classes";
    return out;
  }
  std::sort(merged.begin(), merged.end(), [](const QueryResult& a, const QueryResult& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.item_id < b.item_id;
  });
  if (merged.size() > cfg.final_n) merged.resize(cfg.final_n);
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i].rank = i + 1;
  out.results = std::move(merged);
  return out;
}

inline QueryOutcome query(const Image& image, const Detection& box, Gender gender,
                          const ShardManager& mgr, const MultiTaskModel& model,
                          const QueryConfig& cfg) {
  return query_feature(baseline_featurize(crop(image, box.box)), box.class_id, gender, mgr,
                       model, cfg);
}

// Produces one DetectionSet per detector for an image.
using DetectorPlugin = std::function<DetectionSet(const Image&, const std::string& image_id)>;

// Detections either come from a precomputed file (grouped by image and
// detector) or from a named plugin.
class DetectorSource {
 public:
  static DetectorSource precomputed(std::map<std::string, std::vector<DetectionSet>> by_image) {
    DetectorSource s;
    s.precomputed_ = std::move(by_image);
    return s;
  }

  static DetectorSource plugin(std::string name, DetectorPlugin fn) {
    DetectorSource s;
    s.name_ = std::move(name);
    s.plugin_ = std::move(fn);
    return s;
  }

  std::vector<DetectionSet> detect(const Image& image, const std::string& image_id) const {
    if (plugin_) return {plugin_(image, image_id)};
    auto it = precomputed_.find(image_id);
    if (it == precomputed_.end())
      fail(ErrorKind::kData, "detections do not cover image '" + image_id + "'");
    auto sets = it->second;
    for (auto& s : sets) {
      s.width = image.width();
      s.height = image.height();
      std::vector<Detection> kept;
      for (auto& d : s.detections)
        if (clamp_box(d.box, image.width(), image.height())) kept.push_back(std::move(d));
      s.detections = std::move(kept);
    }
    return sets;
  }

 private:
  std::map<std::string, std::vector<DetectionSet>> precomputed_;
  std::string name_;
  DetectorPlugin plugin_;
};

struct BoxQuery {
  Detection detection;
  QueryOutcome outcome;
};

// Fuses detector outputs, assigns each garment a gender from the person
// boxes and runs one query per garment box. Person boxes are not queried.
inline std::vector<BoxQuery> process_image(const Image& image, const std::string& image_id,
                                           const DetectorSource& detector, double fuse_threshold,
                                           const ShardManager& mgr, const ModelSet& models,
                                           const QueryConfig& cfg) {
  const auto& tax = mgr.taxonomy();
  const auto sets = detector.detect(image, image_id);
  std::vector<BoxQuery> out;
  if (sets.empty()) return out;
  const DetectionSet fused = fuse_ensemble(sets, fuse_threshold);
  std::vector<Detection> persons;
  for (const auto& d : fused.detections)
    if (tax.high(d.class_id).person) persons.push_back(d);
  for (const auto& d : fused.detections) {
    if (tax.high(d.class_id).person) continue;
    BoxQuery bq{d, {}};
    auto m = models.find(d.class_id);
    if (m == models.end()) {
      bq.outcome.reason = "no classifier for class '" + tax.high(d.class_id).name + "'";
    } else {
      bq.outcome = query(image, d, assign_gender(d, persons, tax), mgr, m->second, cfg);
    }
    out.push_back(std::move(bq));
  }
  return out;
}

}  // namespace stsearch
