#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "stsearch/catalog.hpp"
#include "stsearch/geometry.hpp"
#include "stsearch/pipeline.hpp"

namespace stsearch {

struct GroundTruthBox {
  std::string image_id;
  HighClassId class_id = 0;
  BoundingBox box;
};

struct ScoredDetection {
  std::string image_id;
  Detection det;
};

enum class ApInterpolation { kAllPoint, kElevenPoint };

struct PrPoint {
  double precision = 0;
  double recall = 0;
};

// Greedy matching in descending score order: each detection claims the
// unmatched same-image ground truth with the highest IoU >= threshold.
// Returns the precision/recall after each detection. Ties in score keep
// input order.
inline std::vector<PrPoint> precision_recall(const std::vector<ScoredDetection>& dets,
                                             const std::vector<GroundTruthBox>& gts,
                                             HighClassId cls, double iou_thresh) {
  std::vector<const GroundTruthBox*> truth;
  for (const auto& g : gts)
    if (g.class_id == cls) truth.push_back(&g);
  std::vector<const ScoredDetection*> order;
  for (const auto& d : dets)
    if (d.det.class_id == cls) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->det.score > b->det.score;
  });
  std::vector<std::uint8_t> matched(truth.size(), 0);
  std::vector<PrPoint> pr;
  double tp = 0, fp = 0;
  for (const auto* d : order) {
    double best = -1;
    std::size_t best_gt = truth.size();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (matched[g] || truth[g]->image_id != d->image_id) continue;
      const double o = iou(d->det.box, truth[g]->box);
      if (o >= iou_thresh && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best_gt < truth.size()) {
      matched[best_gt] = 1;
      ++tp;
    } else {
      ++fp;
    }
    pr.push_back({tp / (tp + fp), truth.empty() ? 0.0 : tp / truth.size()});
  }
  return pr;
}

// Area under the precision envelope (precision made non-increasing from the
// right). Returns nullopt when the class has no ground truth.
inline std::optional<double> average_precision(
    const std::vector<ScoredDetection>& dets, const std::vector<GroundTruthBox>& gts,
    HighClassId cls, double iou_thresh = 0.5,
    ApInterpolation interp = ApInterpolation::kAllPoint) {
  const bool any_gt = std::any_of(gts.begin(), gts.end(),
                                  [&](const GroundTruthBox& g) { return g.class_id == cls; });
  if (!any_gt) return std::nullopt;
  const auto pr = precision_recall(dets, gts, cls, iou_thresh);
  if (interp == ApInterpolation::kElevenPoint) {
    double ap = 0;
    for (int i = 0; i <= 10; ++i) {
      const double r = i / 10.0;
      double p = 0;
      for (const auto& pt : pr)
        if (pt.recall >= r) p = std::max(p, pt.precision);
      ap += p / 11.0;
    }
    return ap;
  }
  std::vector<double> envelope(pr.size());
  double running = 0;
  for (std::size_t i = pr.size(); i-- > 0;) {
    running = std::max(running, pr[i].precision);
    envelope[i] = running;
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    ap += (pr[i].recall - prev_recall) * envelope[i];
    prev_recall = pr[i].recall;
  }
  return ap;
}

struct ApResult {
  std::map<HighClassId, double> per_class;
  double mean = 0;
};

inline ApResult mean_ap(const std::vector<ScoredDetection>& dets,
                        const std::vector<GroundTruthBox>& gts, double iou_thresh = 0.5,
                        ApInterpolation interp = ApInterpolation::kAllPoint) {
  if (gts.empty()) fail(ErrorKind::kData, "no ground truth boxes");
  std::set<HighClassId> classes;
  for (const auto& g : gts) classes.insert(g.class_id);
  ApResult r;
  double sum = 0;
  for (HighClassId c : classes) {
    r.per_class[c] = *average_precision(dets, gts, c, iou_thresh, interp);
    sum += r.per_class[c];
  }
  r.mean = sum / static_cast<double>(classes.size());
  return r;
}

namespace detail {
inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}
}  // namespace detail

// Two-column table: apparel classes, then person classes, then Overall.
inline std::string format_ap_table(const ApResult& r, const Taxonomy& t) {
  std::ostringstream out;
  out << detail::pad("High Level Classes", 22) << "mAP\n" << std::string(28, '-') << '\n';
  bool printed_sep = false;
  for (bool person : {false, true}) {
    for (const auto& [cls, ap] : r.per_class) {
      if (t.high(cls).person != person) continue;
      if (person && !printed_sep) {
        out << std::string(28, '-') << '\n';
        printed_sep = true;
      }
      out << detail::pad(t.high(cls).name, 22) << detail::fixed2(ap) << '\n';
    }
  }
  out << std::string(28, '-') << '\n' << detail::pad("Overall", 22) << detail::fixed2(r.mean) << '\n';
  return out.str();
}

struct LabeledFeature {
  RawFeature feature;
  HighClassId high_class = 0;
  FineClassId fine_class = 0;
};

struct AccuracyRow {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

using FinePredictor = std::function<FineClassId(const LabeledFeature&)>;

// Top-1 product-type accuracy per high-level class.
inline std::map<HighClassId, AccuracyRow> classification_accuracy(
    const std::vector<LabeledFeature>& samples, const FinePredictor& predict) {
  std::map<HighClassId, AccuracyRow> rows;
  for (const auto& s : samples) {
    auto& row = rows[s.high_class];
    ++row.total;
    if (predict(s) == s.fine_class) ++row.correct;
  }
  return rows;
}

inline std::map<HighClassId, AccuracyRow> classification_accuracy(
    const std::vector<LabeledFeature>& samples, const ModelSet& models, const Taxonomy& t) {
  return classification_accuracy(samples, [&](const LabeledFeature& s) {
    auto it = models.find(s.high_class);
    if (it == models.end())
      fail(ErrorKind::kData, "no classifier for class '" + t.high(s.high_class).name + "'");
    return classify_topk(it->second, s.feature, 1, t.fine_classes_of(s.high_class)).front().fine_class;
  });
}

inline std::string format_accuracy_table(const std::map<HighClassId, AccuracyRow>& rows,
                                         const Taxonomy& t) {
  std::ostringstream out;
  out << detail::pad("Classifiers", 16) << detail::pad("Accuracy", 10) << "Samples\n"
      << std::string(34, '-') << '\n';
  for (const auto& [cls, row] : rows)
    out << detail::pad(t.high(cls).name, 16) << detail::pad(detail::fixed2(row.accuracy()), 10)
        << row.total << '\n';
  return out.str();
}

struct RetrievalQuery {
  RawFeature feature;
  HighClassId high_class = 0;
  Gender gender = Gender::kUnknown;
  int label = 0;  // the query's value for the attribute under test
};

// Mean over queries of the share of returned top-n items whose attribute
// equals the query's.
inline double retrieval_attribute_consistency(
    const ShardManager& mgr, const MultiTaskModel& model,
    const std::vector<RetrievalQuery>& queries,
    const std::unordered_map<std::string, std::map<std::string, int>>& catalog_attributes,
    const std::string& attribute, std::size_t n, QueryConfig cfg = {}) {
  if (queries.empty()) fail(ErrorKind::kData, "no retrieval queries");
  cfg.final_n = n;
  cfg.k_results = std::max(cfg.k_results, n);
  double sum = 0;
  for (const auto& q : queries) {
    const auto out = query_feature(q.feature, q.high_class, q.gender, mgr, model, cfg);
    if (out.results.empty()) continue;
    std::size_t same = 0;
    for (const auto& r : out.results) {
      auto it = catalog_attributes.find(r.item_id);
      const auto* attrs = it == catalog_attributes.end() ? nullptr : &it->second;
      if (!attrs || !attrs->count(attribute))
        fail(ErrorKind::kData, "catalog item '" + r.item_id + "' lacks attribute '" + attribute + "'");
      if (attrs->at(attribute) == q.label) ++same;
    }
    sum += static_cast<double>(same) / out.results.size();
  }
  return sum / static_cast<double>(queries.size());
}

enum class AbChoice { kABetter, kBBetter, kBothBad, kBothGood };

inline std::optional<AbChoice> parse_ab_choice(std::string_view s) {
  if (s == "A_better") return AbChoice::kABetter;
  if (s == "B_better") return AbChoice::kBBetter;
  if (s == "both_bad") return AbChoice::kBothBad;
  if (s == "both_good") return AbChoice::kBothGood;
  return std::nullopt;
}

struct AbVote {
  std::string query_id;
  std::string rater_id;
  AbChoice choice = AbChoice::kABetter;
};

struct AbSummary {
  double pct_a = 0, pct_b = 0, pct_both_bad = 0, pct_both_good = 0;
  std::size_t decided = 0;
  std::size_t undecided = 0;
};

// Plurality vote per query; a tie for first place leaves the query undecided.
// Percentages are over decided queries.
inline AbSummary aggregate_ab(const std::vector<AbVote>& votes, std::size_t raters_per_query = 5) {
  std::map<std::string, std::array<std::size_t, 4>> tally;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& v : votes) {
    if (!seen.emplace(v.query_id, v.rater_id).second)
      fail(ErrorKind::kData, "duplicate vote by '" + v.rater_id + "' on '" + v.query_id + "'");
    auto& t = tally[v.query_id];
    ++t[static_cast<int>(v.choice)];
    if (t[0] + t[1] + t[2] + t[3] > raters_per_query)
      fail(ErrorKind::kData, "query '" + v.query_id + "' has more than " +
                                 std::to_string(raters_per_query) + " votes");
  }
  AbSummary s;
  std::array<std::size_t, 4> wins{};
  for (const auto& [q, t] : tally) {
    const auto top = *std::max_element(t.begin(), t.end());
    if (std::count(t.begin(), t.end(), top) != 1) {
      ++s.undecided;
      continue;
    }
    ++wins[std::max_element(t.begin(), t.end()) - t.begin()];
    ++s.decided;
  }
  if (s.decided) {
    const double d = static_cast<double>(s.decided);
    s.pct_a = 100.0 * wins[0] / d;
    s.pct_b = 100.0 * wins[1] / d;
    s.pct_both_bad = 100.0 * wins[2] / d;
    s.pct_both_good = 100.0 * wins[3] / d;
  }
  return s;
}

}  // namespace stsearch
