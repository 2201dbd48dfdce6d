// Command-line front end: ingest, train, augment, dedup, build-index, query,
// evaluation and demo-fixture generation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stsearch/augment.hpp"
#include "stsearch/catalog.hpp"
#include "stsearch/dedup.hpp"
#include "stsearch/demo_setup.hpp"
#include "stsearch/embedding_io.hpp"
#include "stsearch/evaluation.hpp"
#include "stsearch/model.hpp"
#include "stsearch/pipeline.hpp"
#include "stsearch/png_io.hpp"
#include "stsearch/records.hpp"
#include "stsearch/shards.hpp"

using namespace stsearch;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Taxonomy taxonomy_from(const std::string& path) {
  if (path.empty()) return default_taxonomy();
  const auto bytes = io::read_file(path);
  return load_taxonomy(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

fs::path model_path(const fs::path& dir, const Taxonomy& t, HighClassId h) {
  return dir / (t.high(h).name + ".stmd");
}

// One checkpoint per apparel class, named <class>.stmd. Classes without a
// checkpoint are left out; their boxes report "no classifier".
ModelSet load_models(const fs::path& dir, const Taxonomy& t) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kData, "model directory " + dir.string() + " does not exist");
  ModelSet models;
  for (HighClassId h = 0; h < static_cast<HighClassId>(t.high_classes().size()); ++h) {
    if (t.high(h).person) continue;
    const auto p = model_path(dir, t, h);
    if (fs::exists(p)) models.emplace(h, load_model(p));
  }
  if (models.empty()) fail(ErrorKind::kData, "no model checkpoints in " + dir.string());
  return models;
}

void write_json_file(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) fail(ErrorKind::kData, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kData, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

json box_json(const BoundingBox& b) {
  json j;
  records::box_to_json(j, b);
  return j;
}

// ---- ingest ----

struct IngestArgs {
  std::string catalog, images, models, out, catalog_out;
  int threshold = 240;
};

int run_ingest(const IngestArgs& a, const Taxonomy& t) {
  auto items = read_catalog(a.catalog, t);
  const auto models = load_models(a.models, t);
  EmbeddingTable table;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& item = items[i];
    const HighClassId h = t.fine(item.fine_class).parent;
    auto m = models.find(h);
    if (m == models.end())
      fail(ErrorKind::kData, "no model for class '" + t.high(h).name + "' (item '" + item.item_id + "')");
    const Image img = read_png(fs::path(a.images) / item.image_name);
    const auto emb = extract_embedding(m->second, baseline_featurize(crop(img, foreground_box(img, a.threshold))));
    if (table.ids.empty()) table.dim = static_cast<std::uint16_t>(emb.base.size());
    if (emb.base.size() != table.dim) fail(ErrorKind::kData, "models disagree on the embedding size");
    table.ids.push_back(item.item_id);
    table.values.insert(table.values.end(), emb.base.begin(), emb.base.end());
    item.embedding_row = static_cast<long>(i);
  }
  save_embeddings(a.out, table);
  if (!a.catalog_out.empty()) write_catalog(a.catalog_out, items, t);
  std::cout << "embedded " << items.size() << " items into " << a.out << '\n';
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string lines, images, high_class, out, variant = "V2";
  int epochs = 50, batch = 32, color_classes = 12, attr_classes = 6;
  std::uint64_t seed = 1;
  double base_lr = 0.005, max_lr = 0.05;
  std::int64_t step_size = 0;
};

int run_train(const TrainArgs& a, const Taxonomy& t) {
  const auto variant = parse_variant(a.variant);
  if (!variant) fail(ErrorKind::kUsage, "unknown variant '" + a.variant + "' (V1, V2 or V3)");
  const HighClassId high = t.high_id(a.high_class);
  if (t.high(high).person) fail(ErrorKind::kUsage, "person classes have no product types");
  const auto& children = t.fine_classes_of(high);
  const auto specs = variant_config(*variant, static_cast<int>(children.size()), {a.color_classes, a.attr_classes});
  std::map<std::string, int> classes;
  for (const auto& s : specs) classes[s.name] = s.num_classes;

  std::vector<TrainSample> samples;
  std::size_t skipped = 0;
  for (const auto& line : records::read_training_lines(a.lines)) {
    // lines labelled with another class's product type belong to that model
    auto pt = line.labels.find(kProductTypeTask);
    if (pt != line.labels.end() && pt->second.is_string() &&
        t.fine(t.fine_id(pt->second.get<std::string>())).parent != high) {
      ++skipped;
      continue;
    }
    const Image img = read_png(fs::path(a.images) / line.image);
    TrainSample s{baseline_featurize(line.box ? crop(img, *line.box) : img), {}};
    for (const auto& [task, v] : line.labels) {
      auto it = classes.find(task);
      if (it == classes.end()) continue;  // not trained by this variant
      int label;
      if (task == kProductTypeTask && v.is_string()) {
        label = t.local_index(t.fine_id(v.get<std::string>()));
      } else if (v.is_number_integer()) {
        label = v.get<int>();
      } else {
        fail(ErrorKind::kData, "label for '" + task + "' must be an integer");
      }
      if (label < 0 || label >= it->second)
        fail(ErrorKind::kData, "label " + std::to_string(label) + " out of range for '" + task + "'");
      s.labels[task] = label;
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) fail(ErrorKind::kData, "no training lines in " + a.lines);

  auto m = random_model(specs, a.seed);
  CyclicLRSchedule sched;
  sched.base_lr = a.base_lr;
  sched.max_lr = a.max_lr;
  const std::int64_t per_epoch = static_cast<std::int64_t>((samples.size() + a.batch - 1) / a.batch);
  sched.step_size = a.step_size > 0 ? a.step_size : std::max<std::int64_t>(1, per_epoch * a.epochs / 4);
  const auto rep = train(m, samples, sched, {a.epochs, a.batch, a.seed});
  save_model(a.out, m);
  std::cout << "trained " << a.variant << " on " << samples.size() << " samples (" << skipped
            << " lines of other classes skipped), step size " << sched.step_size;
  if (!rep.epoch_loss.empty())
    std::cout << ", loss " << rep.epoch_loss.front() << " -> " << rep.epoch_loss.back();
  std::cout << '\n';
  return 0;
}

// ---- augment ----

struct AugmentArgs {
  std::string input, backgrounds, out;
  int threshold = 240, dilate = 3;
  std::uint64_t seed = 0;
};

int run_augment(const AugmentArgs& a) {
  std::vector<Image> repo;
  for (const auto& p : png_files(a.backgrounds)) repo.push_back(read_png(p));
  if (repo.empty()) fail(ErrorKind::kData, "no background images in " + a.backgrounds);
  fs::create_directories(a.out);
  AugmentOptions opt;
  opt.threshold = a.threshold;
  opt.dilate_radius = a.dilate;
  std::size_t done = 0, passed = 0;
  const auto inputs = png_files(a.input);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto r = augment_catalog_image(read_png(inputs[i]), repo, a.seed + i, opt);
    if (r.passed_through) {
      ++passed;
      std::cerr << "warning: " << inputs[i].filename().string() << ": " << r.warning << '\n';
    }
    write_png(fs::path(a.out) / inputs[i].filename(), r.image);
    ++done;
  }
  std::cout << "augmented " << done - passed << " images, passed through " << passed << '\n';
  return 0;
}

// ---- dedup ----

struct DedupArgs {
  std::string catalog, embeddings, out;
  double tau = 0.05, min_priority = -std::numeric_limits<double>::infinity();
};

int run_dedup(const DedupArgs& a, const Taxonomy& t) {
  auto items = read_catalog(a.catalog, t);
  attach_embeddings(items, load_embeddings(a.embeddings));
  DedupOptions opt;
  opt.tau = a.tau;
  opt.min_priority = a.min_priority;
  const auto kept = dedup_catalog(items, opt);
  write_catalog(a.out, kept, t);
  std::cout << "kept " << kept.size() << " of " << items.size() << " items\n";
  return 0;
}

// ---- build-index ----

struct IndexArgs {
  std::string catalog, embeddings, out;
  int M = 16, ef_construction = 200, ef_search = 100;
  std::size_t flat_below = 32;
  std::uint64_t seed = 42;
};

int run_build_index(const IndexArgs& a, const Taxonomy& t) {
  auto items = read_catalog(a.catalog, t);
  attach_embeddings(items, load_embeddings(a.embeddings));
  ShardBuildOptions opt;
  opt.hnsw.M = a.M;
  opt.hnsw.ef_construction = a.ef_construction;
  opt.hnsw.ef_search = a.ef_search;
  opt.hnsw.seed = a.seed;
  opt.flat_below = a.flat_below;
  const auto mgr = build_shards(items, t, opt);
  save_shards(a.out, mgr);
  std::cout << "built " << mgr.size() << " shards over " << items.size() << " items in " << a.out << '\n';
  return 0;
}

// ---- query ----

struct QueryArgs {
  std::string index, models, image, image_id, detections, detector;
  double fuse_iou = 0.5;
  QueryConfig cfg;
};

// Built-in detector plugins. "frame:<class>" reports one box of that
// high-level class covering the whole image.
DetectorSource make_plugin(const std::string& spec, const Taxonomy& t) {
  const auto colon = spec.find(':');
  if (spec.substr(0, colon) != "frame" || colon == std::string::npos)
    fail(ErrorKind::kUsage, "unknown detector plugin '" + spec + "' (available: frame:<class>)");
  const HighClassId cls = t.high_id(spec.substr(colon + 1));
  return DetectorSource::plugin(spec, [cls, spec](const Image& img, const std::string& id) {
    return DetectionSet{id, img.width(), img.height(),
                        {Detection{{0, 0, double(img.width()), double(img.height())}, cls, 1.0, spec}}};
  });
}

int run_query(const QueryArgs& a) {
  if (a.detections.empty() == a.detector.empty())
    fail(ErrorKind::kUsage, "give exactly one of --detections or --detector");
  const auto mgr = load_shards(a.index);
  const auto& t = mgr.taxonomy();
  const auto models = load_models(a.models, t);
  const Image img = read_png(a.image);
  const std::string id = a.image_id.empty() ? fs::path(a.image).stem().string() : a.image_id;
  const auto source = a.detector.empty()
                          ? DetectorSource::precomputed(records::group_detections(records::read_detections(a.detections, t)))
                          : make_plugin(a.detector, t);
  for (const auto& bq : process_image(img, id, source, a.fuse_iou, mgr, models, a.cfg)) {
    json qb = box_json(bq.detection.box);
    qb["class"] = t.high(bq.detection.class_id).name;
    qb["score"] = bq.detection.score;
    if (bq.outcome.results.empty())
      std::cerr << "note: box of class '" << t.high(bq.detection.class_id).name << "': " << bq.outcome.reason << '\n';
    for (const auto& r : bq.outcome.results)
      std::cout << json{{"query_box", qb},
                        {"rank", r.rank},
                        {"item_id", r.item_id},
                        {"distance", r.distance},
                        {"fine_class", t.fine(r.fine_class).name}}
                       .dump()
                << '\n';
  }
  return 0;
}

// ---- evaluation ----

struct MapArgs {
  std::string detections, ground_truth, summary;
  double iou = 0.5;
  bool eleven_point = false;
};

int run_eval_map(const MapArgs& a, const Taxonomy& t) {
  const auto r = mean_ap(records::read_detections(a.detections, t), records::read_ground_truth(a.ground_truth, t),
                         a.iou, a.eleven_point ? ApInterpolation::kElevenPoint : ApInterpolation::kAllPoint);
  std::cout << format_ap_table(r, t);
  if (!a.summary.empty()) {
    json per;
    for (const auto& [c, ap] : r.per_class) per[t.high(c).name] = ap;
    write_json_file(a.summary, {{"iou_threshold", a.iou},
                                {"interpolation", a.eleven_point ? "11-point" : "all-point"},
                                {"per_class", per},
                                {"mean", r.mean}});
  }
  return 0;
}

struct AccuracyArgs {
  std::string samples, images, models, summary;
};

// Sample line: {"image", optional "box", "fine_class": name}.
int run_eval_accuracy(const AccuracyArgs& a, const Taxonomy& t) {
  std::vector<LabeledFeature> samples;
  for_each_json_line(a.samples, [&](const json& j, int) {
    const Image img = read_png(fs::path(a.images) / j.at("image").get<std::string>());
    const BoundingBox box = j.contains("box") ? records::box_from_json(j.at("box")) : foreground_box(img);
    const FineClassId f = t.fine_id(j.at("fine_class").get<std::string>());
    samples.push_back({baseline_featurize(crop(img, box)), t.fine(f).parent, f});
  });
  const auto rows = classification_accuracy(samples, load_models(a.models, t), t);
  std::cout << format_accuracy_table(rows, t);
  if (!a.summary.empty()) {
    json j;
    for (const auto& [h, row] : rows) j[t.high(h).name] = {{"accuracy", row.accuracy()}, {"samples", row.total}};
    write_json_file(a.summary, j);
  }
  return 0;
}

struct RetrievalArgs {
  std::string index, models, queries, images, catalog, attribute = "color", summary;
  std::size_t n = 5;
  QueryConfig cfg;
};

// Query line: {"image", "box", "class", optional "gender", "label"}.
int run_eval_retrieval(const RetrievalArgs& a) {
  const auto mgr = load_shards(a.index);
  const auto& t = mgr.taxonomy();
  const auto models = load_models(a.models, t);
  std::unordered_map<std::string, std::map<std::string, int>> attrs;
  for (const auto& it : read_catalog(a.catalog, t)) attrs[it.item_id] = it.attributes;
  std::map<HighClassId, std::vector<RetrievalQuery>> by_class;
  for_each_json_line(a.queries, [&](const json& j, int) {
    const Image img = read_png(fs::path(a.images) / j.at("image").get<std::string>());
    RetrievalQuery q;
    q.feature = baseline_featurize(crop(img, records::box_from_json(j.at("box"))));
    q.high_class = t.high_id(j.at("class").get<std::string>());
    const auto g = parse_gender(j.value("gender", std::string("unknown")));
    if (!g) fail(ErrorKind::kData, "bad gender");
    q.gender = *g;
    q.label = j.at("label").get<int>();
    by_class[q.high_class].push_back(std::move(q));
  });
  double weighted = 0;
  std::size_t total = 0;
  json per;
  for (const auto& [h, qs] : by_class) {
    auto m = models.find(h);
    if (m == models.end()) fail(ErrorKind::kData, "no model for class '" + t.high(h).name + "'");
    const double c = retrieval_attribute_consistency(mgr, m->second, qs, attrs, a.attribute, a.n, a.cfg);
    std::cout << t.high(h).name << ": top-" << a.n << " " << a.attribute << " consistency " << detail::fixed2(c)
              << " over " << qs.size() << " queries\n";
    per[t.high(h).name] = {{"consistency", c}, {"queries", qs.size()}};
    weighted += c * qs.size();
    total += qs.size();
  }
  if (!total) fail(ErrorKind::kData, "no retrieval queries");
  std::cout << "overall: " << detail::fixed2(weighted / total) << '\n';
  if (!a.summary.empty())
    write_json_file(a.summary, {{"attribute", a.attribute}, {"n", a.n}, {"per_class", per}, {"overall", weighted / total}});
  return 0;
}

struct AbArgs {
  std::string votes, summary;
  std::size_t raters = 5;
};

int run_eval_ab(const AbArgs& a) {
  const auto s = aggregate_ab(records::read_votes(a.votes), a.raters);
  std::cout << detail::pad("Outcome", 14) << "Share\n" << std::string(22, '-') << '\n'
            << detail::pad("A better", 14) << detail::fixed2(s.pct_a) << "%\n"
            << detail::pad("B better", 14) << detail::fixed2(s.pct_b) << "%\n"
            << detail::pad("both bad", 14) << detail::fixed2(s.pct_both_bad) << "%\n"
            << detail::pad("both good", 14) << detail::fixed2(s.pct_both_good) << "%\n"
            << std::string(22, '-') << '\n'
            << "decided " << s.decided << ", undecided " << s.undecided << '\n';
  if (!a.summary.empty())
    write_json_file(a.summary, {{"pct_a_better", s.pct_a},
                                {"pct_b_better", s.pct_b},
                                {"pct_both_bad", s.pct_both_bad},
                                {"pct_both_good", s.pct_both_good},
                                {"decided", s.decided},
                                {"undecided", s.undecided}});
  return 0;
}

// ---- demo fixture ----

struct DemoArgs {
  std::string out;
  int count = 200;
  demo::DemoTrainOptions train;
};

// Writes catalog images, backgrounds, street-style queries with oracle
// detections and ground truth, training lines, and trained checkpoints.
int run_make_demo(const DemoArgs& a, const Taxonomy& t) {
  if (a.count < 1) fail(ErrorKind::kUsage, "--count must be positive");
  const fs::path root(a.out);
  for (const char* d : {"catalog", "backgrounds", "queries", "models"}) fs::create_directories(root / d);
  const auto w = demo::make_world(t, a.count, a.train);
  for (std::size_t i = 0; i < w.backgrounds.size(); ++i)
    write_png(root / "backgrounds" / ("bg" + std::to_string(i) + ".png"), w.backgrounds[i]);
  std::vector<json> train_lines, det_lines, gt_lines, query_lines, accuracy_lines;
  std::vector<CatalogItem> catalog = w.catalog;
  for (std::size_t i = 0; i < w.items.size(); ++i) {
    const auto& it = w.items[i];
    write_png(root / "catalog" / catalog[i].image_name, w.renders[i].image);
    const std::string qid = "q" + it.item_id;
    write_png(root / "queries" / (qid + ".png"), demo::query_image(w, i));
    json labels = demo::item_labels(it, t);
    labels[kProductTypeTask] = it.garment.fine_class;
    train_lines.push_back({{"image", catalog[i].image_name}, {"box", box_json(w.renders[i].box)}, {"labels", labels}});
    for (const auto& d : demo::oracle_detections(w, i, qid).detections) {
      ScoredDetection sd{qid, d};
      det_lines.push_back(records::to_json(sd, t));
      json g{{"image_id", qid}, {"class", t.high(d.class_id).name}};
      records::box_to_json(g, d.box);
      gt_lines.push_back(g);
    }
    query_lines.push_back({{"image", qid + ".png"},
                           {"box", box_json(w.renders[i].box)},
                           {"class", it.garment.high_class},
                           {"gender", std::string(to_string(it.gender))},
                           {"label", it.garment.color}});
    accuracy_lines.push_back(
        {{"image", qid + ".png"}, {"box", box_json(w.renders[i].box)}, {"fine_class", it.garment.fine_class}});
    catalog[i].embedding_row = -1;
  }
  write_catalog(root / "items.jsonl", catalog, t);
  write_json_lines(root / "train.jsonl", train_lines);
  write_json_lines(root / "detections.jsonl", det_lines);
  write_json_lines(root / "ground_truth.jsonl", gt_lines);
  write_json_lines(root / "retrieval_queries.jsonl", query_lines);
  write_json_lines(root / "accuracy_samples.jsonl", accuracy_lines);
  for (const auto& [h, m] : w.models) save_model(model_path(root / "models", t, h), m);
  std::cout << "wrote " << w.items.size() << " demo items and " << w.models.size() << " models to " << root << '\n';
  return 0;
}

void add_query_config(CLI::App* cmd, QueryConfig& cfg) {
  cmd->add_option("--k-classes", cfg.k_classes, "fine classes searched per box")->capture_default_str();
  cmd->add_option("--k-results", cfg.k_results, "results taken from each shard")->capture_default_str();
  cmd->add_option("--final-n", cfg.final_n, "results kept after the merge")->capture_default_str();
  cmd->add_option("--ef", cfg.ef_search, "HNSW search beam width")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"street-to-shop visual search"};
  app.require_subcommand(1);
  std::string taxonomy_file;
  app.add_option("--taxonomy", taxonomy_file, "taxonomy JSON (built-in default when omitted)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "embed catalog images with the per-class models");
  c_ingest->add_option("--catalog", ingest.catalog, "catalog JSON lines")->required();
  c_ingest->add_option("--images", ingest.images, "catalog image directory")->required();
  c_ingest->add_option("--models", ingest.models, "directory of <class>.stmd checkpoints")->required();
  c_ingest->add_option("--out", ingest.out, "embedding file to write")->required();
  c_ingest->add_option("--catalog-out", ingest.catalog_out, "catalog copy with embedding rows");
  c_ingest->add_option("--threshold", ingest.threshold, "white level used to find the product")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train one high-level class's multi-task model");
  c_train->add_option("--lines", tr.lines, "training JSON lines")->required();
  c_train->add_option("--images", tr.images, "image directory")->required();
  c_train->add_option("--class", tr.high_class, "high-level class")->required();
  c_train->add_option("--out", tr.out, "checkpoint to write")->required();
  c_train->add_option("--variant", tr.variant, "V1, V2 or V3")->capture_default_str();
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--batch", tr.batch)->capture_default_str();
  c_train->add_option("--seed", tr.seed)->capture_default_str();
  c_train->add_option("--base-lr", tr.base_lr)->capture_default_str();
  c_train->add_option("--max-lr", tr.max_lr)->capture_default_str();
  c_train->add_option("--step-size", tr.step_size, "iterations per half cycle; 0 = a quarter of all iterations")
      ->capture_default_str();
  c_train->add_option("--color-classes", tr.color_classes)->capture_default_str();
  c_train->add_option("--attr-classes", tr.attr_classes, "classes per further attribute")->capture_default_str();

  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "replace white catalog backgrounds by Poisson blending");
  c_aug->add_option("--input", aug.input)->required();
  c_aug->add_option("--backgrounds", aug.backgrounds)->required();
  c_aug->add_option("--out", aug.out)->required();
  c_aug->add_option("--threshold", aug.threshold)->capture_default_str();
  c_aug->add_option("--dilate", aug.dilate)->capture_default_str();
  c_aug->add_option("--seed", aug.seed)->capture_default_str();

  DedupArgs dd;
  auto* c_dedup = app.add_subcommand("dedup", "drop near-duplicate catalog items");
  c_dedup->add_option("--catalog", dd.catalog)->required();
  c_dedup->add_option("--embeddings", dd.embeddings)->required();
  c_dedup->add_option("--out", dd.out)->required();
  c_dedup->add_option("--tau", dd.tau, "cosine distance threshold")->capture_default_str();
  c_dedup->add_option("--min-priority", dd.min_priority);

  IndexArgs ix;
  auto* c_index = app.add_subcommand("build-index", "build the per (class, gender) shard directory");
  c_index->add_option("--catalog", ix.catalog)->required();
  c_index->add_option("--embeddings", ix.embeddings)->required();
  c_index->add_option("--out", ix.out)->required();
  c_index->add_option("--M", ix.M)->capture_default_str();
  c_index->add_option("--ef-construction", ix.ef_construction)->capture_default_str();
  c_index->add_option("--ef-search", ix.ef_search)->capture_default_str();
  c_index->add_option("--flat-below", ix.flat_below, "shards smaller than this stay exact")->capture_default_str();
  c_index->add_option("--seed", ix.seed)->capture_default_str();

  QueryArgs qa;
  auto* c_query = app.add_subcommand("query", "search the catalog for each garment in an image");
  c_query->add_option("--index", qa.index)->required();
  c_query->add_option("--models", qa.models)->required();
  c_query->add_option("--image", qa.image)->required();
  c_query->add_option("--image-id", qa.image_id, "id used in the detections file (default: file stem)");
  c_query->add_option("--detections", qa.detections, "detections JSON lines");
  c_query->add_option("--detector", qa.detector, "detector plugin, e.g. frame:top");
  c_query->add_option("--fuse-iou", qa.fuse_iou, "ensemble NMS threshold")->capture_default_str();
  add_query_config(c_query, qa.cfg);

  MapArgs mp;
  auto* c_map = app.add_subcommand("eval-map", "per-class AP and mAP of detections");
  c_map->add_option("--detections", mp.detections)->required();
  c_map->add_option("--ground-truth", mp.ground_truth)->required();
  c_map->add_option("--iou", mp.iou)->capture_default_str();
  c_map->add_flag("--eleven-point", mp.eleven_point, "11-point interpolation");
  c_map->add_option("--summary", mp.summary, "machine-readable summary JSON");

  AccuracyArgs ac;
  auto* c_acc = app.add_subcommand("eval-accuracy", "top-1 product-type accuracy per high-level class");
  c_acc->add_option("--samples", ac.samples)->required();
  c_acc->add_option("--images", ac.images)->required();
  c_acc->add_option("--models", ac.models)->required();
  c_acc->add_option("--summary", ac.summary);

  RetrievalArgs rt;
  auto* c_ret = app.add_subcommand("eval-retrieval", "attribute consistency of the top-n results");
  c_ret->add_option("--index", rt.index)->required();
  c_ret->add_option("--models", rt.models)->required();
  c_ret->add_option("--queries", rt.queries)->required();
  c_ret->add_option("--images", rt.images)->required();
  c_ret->add_option("--catalog", rt.catalog)->required();
  c_ret->add_option("--attribute", rt.attribute)->capture_default_str();
  c_ret->add_option("--n", rt.n)->capture_default_str();
  c_ret->add_option("--summary", rt.summary);
  add_query_config(c_ret, rt.cfg);

  AbArgs ab;
  auto* c_ab = app.add_subcommand("eval-ab", "aggregate A/B preference votes");
  c_ab->add_option("--votes", ab.votes)->required();
  c_ab->add_option("--raters", ab.raters)->capture_default_str();
  c_ab->add_option("--summary", ab.summary);

  DemoArgs dm;
  auto* c_demo = app.add_subcommand("make-demo", "write the procedural demo catalog and trained models");
  c_demo->add_option("--out", dm.out)->required();
  c_demo->add_option("--count", dm.count)->capture_default_str();
  c_demo->add_option("--epochs", dm.train.epochs)->capture_default_str();
  c_demo->add_option("--augmentations", dm.train.augmentations)->capture_default_str();

  auto* c_tax = app.add_subcommand("taxonomy", "print the taxonomy as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const Taxonomy t = taxonomy_from(taxonomy_file);
    if (*c_ingest) return run_ingest(ingest, t);
    if (*c_train) return run_train(tr, t);
    if (*c_aug) return run_augment(aug);
    if (*c_dedup) return run_dedup(dd, t);
    if (*c_index) return run_build_index(ix, t);
    if (*c_query) return run_query(qa);
    if (*c_map) return run_eval_map(mp, t);
    if (*c_acc) return run_eval_accuracy(ac, t);
    if (*c_ret) return run_eval_retrieval(rt);
    if (*c_ab) return run_eval_ab(ab);
    if (*c_demo) return run_make_demo(dm, t);
    if (*c_tax) {
      std::cout << to_json(t).dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error (data): " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (data): " << e.what() << '\n';
    return 2;
  }
  return 1;
}
