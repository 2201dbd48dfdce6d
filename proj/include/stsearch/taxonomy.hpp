#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stsearch/error.hpp"

namespace stsearch {

using HighClassId = int;
using FineClassId = int;

enum class Gender { kMan, kWoman, kBoy, kGirl, kUnknown };

inline constexpr Gender kStoredGenders[] = {Gender::kMan, Gender::kWoman, Gender::kBoy,
                                            Gender::kGirl};

inline std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kMan: return "man";
    case Gender::kWoman: return "woman";
    case Gender::kBoy: return "boy";
    case Gender::kGirl: return "girl";
    case Gender::kUnknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "man") return Gender::kMan;
  if (s == "woman") return Gender::kWoman;
  if (s == "boy") return Gender::kBoy;
  if (s == "girl") return Gender::kGirl;
  if (s == "unknown") return Gender::kUnknown;
  return std::nullopt;
}

struct HighLevelClass {
  HighClassId id = 0;
  std::string name;
  bool person = false;  // boy/girl/woman/man: detected, never a product parent
};

struct FineGrainedClass {
  FineClassId id = 0;
  std::string name;
  HighClassId parent = 0;
};

// Two-level class hierarchy. Immutable once built; ids are dense from 0 in
// document order.
class Taxonomy {
 public:
  Taxonomy() = default;

  // Validates and indexes the given classes. `fine` parents refer to
  // positions in `high`.
  Taxonomy(std::vector<HighLevelClass> high, std::vector<FineGrainedClass> fine)
      : high_(std::move(high)), fine_(std::move(fine)) {
    children_.resize(high_.size());
    for (std::size_t i = 0; i < high_.size(); ++i) {
      high_[i].id = static_cast<HighClassId>(i);
      if (!high_by_name_.emplace(high_[i].name, high_[i].id).second)
        fail(ErrorKind::kData, "duplicate class name '" + high_[i].name + "'");
    }
    for (std::size_t i = 0; i < fine_.size(); ++i) {
      auto& f = fine_[i];
      f.id = static_cast<FineClassId>(i);
      if (f.parent < 0 || static_cast<std::size_t>(f.parent) >= high_.size())
        fail(ErrorKind::kData, "fine class '" + f.name + "' has a dangling parent");
      if (high_[f.parent].person)
        fail(ErrorKind::kData, "person class '" + high_[f.parent].name + "' cannot have children");
      if (high_by_name_.count(f.name) || !fine_by_name_.emplace(f.name, f.id).second)
        fail(ErrorKind::kData, "duplicate class name '" + f.name + "'");
      children_[f.parent].push_back(f.id);
    }
  }

  const std::vector<HighLevelClass>& high_classes() const { return high_; }
  const std::vector<FineGrainedClass>& fine_classes() const { return fine_; }

  const HighLevelClass& high(HighClassId id) const {
    check_high(id);
    return high_[id];
  }

  const FineGrainedClass& fine(FineClassId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= fine_.size())
      fail(ErrorKind::kData, "unknown fine class id " + std::to_string(id));
    return fine_[id];
  }

  const std::vector<FineClassId>& fine_classes_of(HighClassId id) const {
    check_high(id);
    return children_[id];
  }

  std::optional<HighClassId> find_high(std::string_view name) const {
    auto it = high_by_name_.find(std::string(name));
    if (it == high_by_name_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<FineClassId> find_fine(std::string_view name) const {
    auto it = fine_by_name_.find(std::string(name));
    if (it == fine_by_name_.end()) return std::nullopt;
    return it->second;
  }

  HighClassId high_id(std::string_view name) const {
    if (auto id = find_high(name)) return *id;
    fail(ErrorKind::kData, "unknown high-level class '" + std::string(name) + "'");
  }

  FineClassId fine_id(std::string_view name) const {
    if (auto id = find_fine(name)) return *id;
    fail(ErrorKind::kData, "unknown fine class '" + std::string(name) + "'");
  }

  // Position of a fine class among its parent's children; this is the
  // product-type label index used by that parent's classifier.
  int local_index(FineClassId id) const {
    const auto& siblings = children_[fine(id).parent];
    for (std::size_t i = 0; i < siblings.size(); ++i)
      if (siblings[i] == id) return static_cast<int>(i);
    return -1;
  }

  // Gender carried by a person class, or unknown for apparel classes.
  Gender person_gender(HighClassId id) const {
    const auto& h = high(id);
    if (!h.person) return Gender::kUnknown;
    return parse_gender(h.name).value_or(Gender::kUnknown);
  }

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
    if (a.high_.size() != b.high_.size() || a.fine_.size() != b.fine_.size()) return false;
    for (std::size_t i = 0; i < a.high_.size(); ++i)
      if (a.high_[i].name != b.high_[i].name || a.high_[i].person != b.high_[i].person)
        return false;
    for (std::size_t i = 0; i < a.fine_.size(); ++i)
      if (a.fine_[i].name != b.fine_[i].name || a.fine_[i].parent != b.fine_[i].parent)
        return false;
    return true;
  }

 private:
  void check_high(HighClassId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= high_.size())
      fail(ErrorKind::kData, "unknown high-level class id " + std::to_string(id));
  }

  std::vector<HighLevelClass> high_;
  std::vector<FineGrainedClass> fine_;
  std::vector<std::vector<FineClassId>> children_;
  std::map<std::string, HighClassId, std::less<>> high_by_name_;
  std::map<std::string, FineClassId, std::less<>> fine_by_name_;
};

// Document schema:
//   { "high_classes": [ {"name": "top"}, {"name": "woman", "person": true} ],
//     "fine_classes": [ {"name": "t-shirt", "parent": "top"} ] }
inline Taxonomy load_taxonomy(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("high_classes") || !doc.contains("fine_classes"))
    fail(ErrorKind::kData, "taxonomy needs 'high_classes' and 'fine_classes' sections");
  std::vector<HighLevelClass> high;
  std::map<std::string, HighClassId> names;
  try {
    for (const auto& h : doc.at("high_classes")) {
      HighLevelClass c;
      c.name = h.at("name").get<std::string>();
      c.person = h.value("person", false);
      names.emplace(c.name, static_cast<HighClassId>(high.size()));
      high.push_back(std::move(c));
    }
    std::vector<FineGrainedClass> fine;
    for (const auto& f : doc.at("fine_classes")) {
      FineGrainedClass c;
      c.name = f.at("name").get<std::string>();
      const auto parent = f.at("parent").get<std::string>();
      auto it = names.find(parent);
      if (it == names.end())
        fail(ErrorKind::kData,
             "fine class '" + c.name + "' names missing parent '" + parent + "'");
      c.parent = it->second;
      fine.push_back(std::move(c));
    }
    return Taxonomy(std::move(high), std::move(fine));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed taxonomy: ") + e.what());
  }
}

inline Taxonomy load_taxonomy(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kData, std::string("taxonomy does not parse: ") + e.what());
  }
  return load_taxonomy(doc);
}

inline nlohmann::json to_json(const Taxonomy& t) {
  nlohmann::json doc;
  doc["high_classes"] = nlohmann::json::array();
  for (const auto& h : t.high_classes()) {
    nlohmann::json j{{"name", h.name}};
    if (h.person) j["person"] = true;
    doc["high_classes"].push_back(std::move(j));
  }
  doc["fine_classes"] = nlohmann::json::array();
  for (const auto& f : t.fine_classes())
    doc["fine_classes"].push_back({{"name", f.name}, {"parent", t.high(f.parent).name}});
  return doc;
}

namespace detail {

// Placeholder product-type names; only the per-parent counts are meaningful.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>& default_tree() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> tree = {
      {"headwear",
       {"baseball-cap", "beanie", "bucket-hat", "fedora", "sun-hat", "beret", "visor",
        "cowboy-hat", "headband"}},
      {"eyewear",
       {"aviator-sunglasses", "wayfarer-sunglasses", "round-sunglasses", "cat-eye-sunglasses",
        "sport-sunglasses", "eyeglass-frames"}},
      {"earring", {"stud-earrings", "hoop-earrings", "drop-earrings", "chandelier-earrings",
                   "huggie-earrings", "ear-cuffs"}},
      {"belt", {"leather-belt", "dress-belt", "canvas-belt", "chain-belt", "waist-belt"}},
      {"bottom",
       {"jeans", "chinos", "dress-pants", "cargo-pants", "joggers", "leggings", "shorts",
        "denim-shorts", "mini-skirt", "maxi-skirt"}},
      {"dress", {"casual-dress", "cocktail-dress", "maxi-dress", "sheath-dress", "sundress"}},
      {"top",
       {"t-shirt",       "polo-shirt",    "dress-shirt",   "casual-shirt",  "flannel-shirt",
        "blouse",        "tunic",         "tank-top",      "camisole",      "crop-top",
        "henley",        "sweatshirt",    "hoodie",        "pullover-sweater", "cardigan",
        "turtleneck",    "vest",          "sweater-vest",  "denim-jacket",  "leather-jacket",
        "bomber-jacket", "blazer",        "windbreaker",   "puffer-jacket", "parka",
        "trench-coat",   "pea-coat",      "rain-jacket",   "fleece-jacket", "shacket",
        "kimono",        "poncho",        "tube-top"}},
      {"suit", {"two-piece-suit", "three-piece-suit", "tuxedo", "pant-suit", "skirt-suit",
                "suit-jacket", "suit-pants", "suit-vest"}},
      {"tie", {"necktie", "bow-tie", "skinny-tie", "bolo-tie"}},
      {"footwear",
       {"sneakers", "running-shoes", "loafers", "oxfords", "boat-shoes", "ankle-boots",
        "chelsea-boots", "knee-high-boots", "hiking-boots", "sandals", "flip-flops", "pumps",
        "ballet-flats", "wedges", "mules", "slippers"}},
      {"swimsuit", {"one-piece-swimsuit", "bikini-top", "bikini-bottom", "tankini",
                    "swim-trunks", "board-shorts", "rash-guard", "cover-up"}},
      {"bag", {"tote", "backpack", "crossbody-bag", "clutch", "shoulder-bag", "satchel",
               "messenger-bag", "duffel", "belt-bag", "bucket-bag", "hobo-bag", "wallet"}},
      {"wristwear", {"analog-watch", "digital-watch", "smartwatch", "bangle", "cuff-bracelet",
                     "chain-bracelet", "beaded-bracelet", "charm-bracelet"}},
      {"scarf", {"infinity-scarf", "blanket-scarf", "silk-scarf", "knit-scarf", "bandana"}},
      {"necklace", {"pendant-necklace", "choker", "chain-necklace", "statement-necklace",
                    "pearl-necklace", "lariat"}},
      {"one-piece", {"jumpsuit", "romper", "overalls", "onesie", "bodysuit"}},
  };
  return tree;
}

}  // namespace detail

// 16 apparel classes with 146 product types, plus the 4 person classes.
inline Taxonomy default_taxonomy() {
  std::vector<HighLevelClass> high;
  std::vector<FineGrainedClass> fine;
  for (const auto& [parent, children] : detail::default_tree()) {
    const auto pid = static_cast<HighClassId>(high.size());
    high.push_back({pid, parent, false});
    for (const auto& c : children) fine.push_back({0, c, pid});
  }
  for (const char* p : {"boy", "girl", "woman", "man"})
    high.push_back({0, p, true});
  return Taxonomy(std::move(high), std::move(fine));
}

}  // namespace stsearch
