#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stsearch/catalog.hpp"
#include "stsearch/evaluation.hpp"
#include "stsearch/geometry.hpp"
#include "stsearch/taxonomy.hpp"

// JSON-lines record formats shared by the CLI tools.
namespace stsearch::records {

inline BoundingBox box_from_json(const nlohmann::json& j) {
  BoundingBox b{j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                j.at("x_max").get<double>(), j.at("y_max").get<double>()};
  if (!b.valid()) fail(ErrorKind::kData, "invalid bounding box");
  return b;
}

inline void box_to_json(nlohmann::json& j, const BoundingBox& b) {
  j["x_min"] = b.x_min;
  j["y_min"] = b.y_min;
  j["x_max"] = b.x_max;
  j["y_max"] = b.y_max;
}

// {"image_id", "class", "score", "x_min", "y_min", "x_max", "y_max", "detector_id"}
inline ScoredDetection detection_from_json(const nlohmann::json& j, const Taxonomy& t) {
  ScoredDetection d;
  d.image_id = j.at("image_id").get<std::string>();
  d.det.class_id = t.high_id(j.at("class").get<std::string>());
  d.det.score = j.at("score").get<double>();
  if (!(d.det.score >= 0 && d.det.score <= 1)) fail(ErrorKind::kData, "score outside [0,1]");
  d.det.box = box_from_json(j);
  d.det.detector_id = j.value("detector_id", std::string("default"));
  return d;
}

inline nlohmann::json to_json(const ScoredDetection& d, const Taxonomy& t) {
  nlohmann::json j{{"image_id", d.image_id},
                   {"class", t.high(d.det.class_id).name},
                   {"score", d.det.score}};
  box_to_json(j, d.det.box);
  j["detector_id"] = d.det.detector_id;
  return j;
}

inline std::vector<ScoredDetection> read_detections(const std::filesystem::path& p,
                                                    const Taxonomy& t) {
  std::vector<ScoredDetection> out;
  for_each_json_line(p, [&](const nlohmann::json& j, int) { out.push_back(detection_from_json(j, t)); });
  return out;
}

// Groups detections by image, then by detector, for DetectorSource.
inline std::map<std::string, std::vector<DetectionSet>> group_detections(
    const std::vector<ScoredDetection>& dets) {
  std::map<std::string, std::map<std::string, DetectionSet>> nested;
  for (const auto& d : dets) {
    auto& set = nested[d.image_id][d.det.detector_id];
    set.image_id = d.image_id;
    set.detections.push_back(d.det);
  }
  std::map<std::string, std::vector<DetectionSet>> out;
  for (auto& [img, by_det] : nested)
    for (auto& [_, set] : by_det) out[img].push_back(std::move(set));
  return out;
}

// {"image_id", "class", "x_min", "y_min", "x_max", "y_max"}
inline std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& p,
                                                     const Taxonomy& t) {
  std::vector<GroundTruthBox> out;
  for_each_json_line(p, [&](const nlohmann::json& j, int) {
    out.push_back({j.at("image_id").get<std::string>(), t.high_id(j.at("class").get<std::string>()),
                   box_from_json(j)});
  });
  return out;
}

// {"query_id", "rater_id", "choice": "A_better"|"B_better"|"both_bad"|"both_good"}
inline std::vector<AbVote> read_votes(const std::filesystem::path& p) {
  std::vector<AbVote> out;
  for_each_json_line(p, [&](const nlohmann::json& j, int) {
    const auto c = parse_ab_choice(j.at("choice").get<std::string>());
    if (!c) fail(ErrorKind::kData, "unknown vote choice");
    out.push_back({j.at("query_id").get<std::string>(), j.at("rater_id").get<std::string>(), *c});
  });
  return out;
}

// Training line: {"image": path, optional "box": {x_min,...}, "labels": {task: label}}.
// Product-type labels may be fine class names; other labels are integers.
struct TrainingLine {
  std::string image;
  std::optional<BoundingBox> box;
  std::map<std::string, nlohmann::json> labels;
};

inline std::vector<TrainingLine> read_training_lines(const std::filesystem::path& p) {
  std::vector<TrainingLine> out;
  for_each_json_line(p, [&](const nlohmann::json& j, int) {
    TrainingLine line;
    line.image = j.at("image").get<std::string>();
    if (j.contains("box")) line.box = box_from_json(j.at("box"));
    for (const auto& [k, v] : j.at("labels").items()) line.labels[k] = v;
    out.push_back(std::move(line));
  });
  return out;
}

}  // namespace stsearch::records
