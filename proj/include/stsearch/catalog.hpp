#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stsearch/embedding_io.hpp"
#include "stsearch/error.hpp"
#include "stsearch/features.hpp"
#include "stsearch/taxonomy.hpp"

namespace stsearch {

struct CatalogItem {
  std::string item_id;
  std::string image_name;
  FineClassId fine_class = 0;
  Gender gender = Gender::kUnknown;
  double priority = 0;  // higher is better; stands in for sales volume
  Embedding embedding;
  long embedding_row = -1;
  std::map<std::string, int> attributes;
};

// Reads a JSON-lines file, calling `fn(json, line_number)` per non-blank line.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot open " + path.string());
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::kData, path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
    try {
      fn(j, no);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kData, path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

inline void write_json_lines(const std::filesystem::path& path,
                             const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kData, "cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

// Catalog line: {"item_id", "image_name", "fine_class": name, "gender",
// "priority", optional "embedding_row", optional "attributes": {task: label}}.
inline CatalogItem catalog_item_from_json(const nlohmann::json& j, const Taxonomy& t) {
  CatalogItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.image_name = j.value("image_name", std::string());
  item.fine_class = t.fine_id(j.at("fine_class").get<std::string>());
  const auto g = parse_gender(j.at("gender").get<std::string>());
  if (!g || *g == Gender::kUnknown)
    fail(ErrorKind::kData, "catalog item '" + item.item_id + "' lacks a stored gender");
  item.gender = *g;
  item.priority = j.value("priority", 0.0);
  if (!std::isfinite(item.priority))
    fail(ErrorKind::kData, "catalog item '" + item.item_id + "' has a non-finite priority");
  item.embedding_row = j.value("embedding_row", -1L);
  if (j.contains("attributes"))
    for (const auto& [k, v] : j.at("attributes").items()) item.attributes[k] = v.get<int>();
  return item;
}

inline nlohmann::json to_json(const CatalogItem& item, const Taxonomy& t) {
  nlohmann::json j{{"item_id", item.item_id},
                   {"image_name", item.image_name},
                   {"fine_class", t.fine(item.fine_class).name},
                   {"gender", std::string(to_string(item.gender))},
                   {"priority", item.priority}};
  if (item.embedding_row >= 0) j["embedding_row"] = item.embedding_row;
  if (!item.attributes.empty()) j["attributes"] = item.attributes;
  return j;
}

inline std::vector<CatalogItem> read_catalog(const std::filesystem::path& path,
                                             const Taxonomy& t) {
  std::vector<CatalogItem> items;
  for_each_json_line(path, [&](const nlohmann::json& j, int) {
    items.push_back(catalog_item_from_json(j, t));
  });
  return items;
}

inline void write_catalog(const std::filesystem::path& path,
                          const std::vector<CatalogItem>& items, const Taxonomy& t) {
  std::vector<nlohmann::json> rows;
  rows.reserve(items.size());
  for (const auto& i : items) rows.push_back(to_json(i, t));
  write_json_lines(path, rows);
}

// Fills each item's base embedding from the table, by embedding_row when
// set and by item id otherwise.
inline void attach_embeddings(std::vector<CatalogItem>& items, const EmbeddingTable& table) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < table.ids.size(); ++i) by_id.emplace(table.ids[i], i);
  for (auto& item : items) {
    std::size_t row;
    if (item.embedding_row >= 0) {
      row = static_cast<std::size_t>(item.embedding_row);
      if (row >= table.ids.size() || table.ids[row] != item.item_id)
        fail(ErrorKind::kData, "embedding row of '" + item.item_id + "' does not match the table");
    } else {
      auto it = by_id.find(item.item_id);
      if (it == by_id.end()) fail(ErrorKind::kData, "no embedding for item '" + item.item_id + "'");
      row = it->second;
    }
    const auto v = table.row(row);
    item.embedding.base.assign(v.begin(), v.end());
  }
}

}  // namespace stsearch
