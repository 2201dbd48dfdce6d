#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stsearch/augment.hpp"
#include "stsearch/catalog.hpp"
#include "stsearch/demo.hpp"
#include "stsearch/features.hpp"
#include "stsearch/model.hpp"
#include "stsearch/pipeline.hpp"

// Trains per-class models on the procedural demo catalog and indexes it.
namespace stsearch::demo {

inline std::vector<Image> background_repository(int count = 12) {
  std::vector<Image> repo;
  for (int i = 0; i < count; ++i) repo.push_back(render_background(160, 160, 1000 + i));
  return repo;
}

// Labels every demo item carries: product type (local to its high class),
// colour, pattern and accent colour as the shape proxy.
inline TaskLabels item_labels(const DemoItem& item, const Taxonomy& t) {
  return {{kProductTypeTask, t.local_index(t.fine_id(item.garment.fine_class))},
          {kColorTask, item.garment.color},
          {"pattern", static_cast<int>(item.garment.pattern)},
          {"shape", item.garment.accent}};
}

struct DemoTrainOptions {
  int augmentations = 8;     // augmented copies per item, on top of the clean image
  int epochs = 30;
  int batch = 32;
  double max_lr = 0.05;      // base_lr is a tenth of this
  double shared_scale = 0.1; // shared layer starts at this multiple of the identity
  std::uint64_t seed = 5;
  std::uint64_t augment_seed = 100000;
};

struct DemoWorld {
  Taxonomy taxonomy;
  std::vector<DemoItem> items;
  std::vector<RenderedGarment> renders;
  std::vector<Image> backgrounds;
  ModelSet models;
  std::vector<CatalogItem> catalog;
};

inline RawFeature garment_feature(const Image& image, const BoundingBox& box) {
  return baseline_featurize(crop(image, box));
}

// V3 model for one high class, trained on the clean crop plus augmented
// copies of every item of that class.
inline MultiTaskModel train_class_model(const DemoWorld& w, HighClassId high,
                                        const DemoTrainOptions& opt) {
  const auto& t = w.taxonomy;
  std::vector<TrainSample> samples;
  for (std::size_t i = 0; i < w.items.size(); ++i) {
    if (t.high_id(w.items[i].garment.high_class) != high) continue;
    const auto labels = item_labels(w.items[i], t);
    const auto& r = w.renders[i];
    samples.push_back({garment_feature(r.image, r.box), labels});
    for (int a = 0; a < opt.augmentations; ++a) {
      const auto aug = augment_catalog_image(r.image, w.backgrounds, opt.augment_seed + i * 17 + a);
      samples.push_back({garment_feature(aug.image, r.box), labels});
    }
  }
  if (samples.empty()) fail(ErrorKind::kData, "no demo items for class '" + t.high(high).name + "'");
  const auto specs = variant_config(Variant::kV3, static_cast<int>(t.fine_classes_of(high).size()),
                                    {static_cast<int>(palette().size()), static_cast<int>(palette().size())});
  auto m = random_model(specs, opt.seed, {}, SharedInit::kIdentity);
  m.shared_w *= opt.shared_scale;
  CyclicLRSchedule s;
  s.base_lr = opt.max_lr / 10;
  s.max_lr = opt.max_lr;
  const std::size_t batch = static_cast<std::size_t>(opt.batch);
  const std::size_t steps_per_epoch = (samples.size() + batch - 1) / batch;
  s.step_size = static_cast<std::int64_t>(std::max<std::size_t>(1, steps_per_epoch * opt.epochs / 4));
  train(m, samples, s, {opt.epochs, opt.batch, opt.seed});
  return m;
}

// Items, renders, trained models and a catalog embedded from clean crops.
inline DemoWorld make_world(const Taxonomy& t, int count = 200, const DemoTrainOptions& opt = {}) {
  DemoWorld w;
  w.taxonomy = t;
  w.items = make_demo_items(t, count);
  for (const auto& it : w.items) w.renders.push_back(render_garment(it.garment));
  w.backgrounds = background_repository();
  std::vector<HighClassId> highs;
  for (const auto& it : w.items) {
    const auto h = t.high_id(it.garment.high_class);
    if (std::find(highs.begin(), highs.end(), h) == highs.end()) highs.push_back(h);
  }
  for (HighClassId h : highs) w.models.emplace(h, train_class_model(w, h, opt));
  for (std::size_t i = 0; i < w.items.size(); ++i) {
    const auto& it = w.items[i];
    CatalogItem c;
    c.item_id = it.item_id;
    c.image_name = it.item_id + ".png";
    c.fine_class = t.fine_id(it.garment.fine_class);
    c.gender = it.gender;
    c.priority = it.priority;
    c.embedding_row = static_cast<long>(i);
    c.attributes = item_labels(it, t);
    c.attributes.erase(kProductTypeTask);
    const auto& r = w.renders[i];
    c.embedding = extract_embedding(w.models.at(t.high_id(it.garment.high_class)),
                                    garment_feature(r.image, r.box));
    w.catalog.push_back(std::move(c));
  }
  return w;
}

// The street-style query for an item: its image composited onto a
// background with a seed disjoint from the training augmentations.
inline Image query_image(const DemoWorld& w, std::size_t i, std::uint64_t seed = 77) {
  return augment_catalog_image(w.renders[i].image, w.backgrounds, seed + i).image;
}

// What a perfect detector reports for a query image: the garment box and a
// person box of the item's gender covering the frame.
inline DetectionSet oracle_detections(const DemoWorld& w, std::size_t i, const std::string& image_id) {
  const auto& t = w.taxonomy;
  const auto& it = w.items[i];
  DetectionSet s{image_id, kImageSize, kImageSize, {}};
  s.detections.push_back({w.renders[i].box, t.high_id(it.garment.high_class), 0.99, "oracle"});
  const std::string person = it.gender == Gender::kMan ? "man" : "woman";
  s.detections.push_back({{0, 0, double(kImageSize), double(kImageSize)}, t.high_id(person), 0.95, "oracle"});
  return s;
}

}  // namespace stsearch::demo
