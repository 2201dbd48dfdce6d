#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stsearch/catalog.hpp"
#include "stsearch/error.hpp"
#include "stsearch/index.hpp"
#include "stsearch/taxonomy.hpp"

namespace stsearch {

struct ShardKey {
  FineClassId fine_class = 0;
  Gender gender = Gender::kWoman;

  friend auto operator<=>(const ShardKey&, const ShardKey&) = default;
};

// A shard holds either an HNSW graph or, below the size cutoff, a flat array
// searched exactly.
class Shard {
 public:
  explicit Shard(HnswIndex idx) : index_(std::move(idx)) {}
  explicit Shard(FlatIndex idx) : index_(std::move(idx)) {}

  std::vector<SearchHit> search(std::span<const float> q, std::size_t k, std::size_t ef) const {
    return std::visit(
        [&](const auto& idx) {
          if constexpr (std::is_same_v<std::decay_t<decltype(idx)>, HnswIndex>)
            return idx.search(q, k, ef);
          else
            return idx.search(q, k);
        },
        index_);
  }

  std::size_t size() const {
    return std::visit([](const auto& idx) { return idx.size(); }, index_);
  }
  bool is_flat() const { return std::holds_alternative<FlatIndex>(index_); }
  bool contains(const std::string& id) const {
    return std::visit([&](const auto& idx) { return idx.contains(id); }, index_);
  }
  const std::vector<std::string>& item_ids() const {
    return std::visit([](const auto& idx) -> const std::vector<std::string>& {
      return idx.item_ids();
    }, index_);
  }
  const std::variant<HnswIndex, FlatIndex>& index() const { return index_; }

  std::vector<std::uint8_t> serialize() const {
    return std::visit([](const auto& idx) { return idx.serialize(); }, index_);
  }

  static Shard deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() > 6 && bytes[6] == static_cast<std::uint8_t>(detail::IndexKind::kFlat))
      return Shard(FlatIndex::deserialize(bytes));
    return Shard(HnswIndex::deserialize(bytes));
  }

 private:
  std::variant<HnswIndex, FlatIndex> index_;
};

struct ShardBuildOptions {
  HnswParams hnsw;
  std::size_t flat_below = 32;  // shards smaller than this stay flat
  unsigned threads = 0;         // 0 = hardware concurrency
};

// Shards keyed by (fine class, gender). After construction the manager is
// immutable and safe for concurrent queries.
class ShardManager {
 public:
  ShardManager() = default;
  explicit ShardManager(Taxonomy taxonomy) : taxonomy_(std::move(taxonomy)) {}

  const Taxonomy& taxonomy() const { return taxonomy_; }
  const std::map<ShardKey, Shard>& shards() const { return shards_; }
  std::size_t size() const { return shards_.size(); }

  const Shard* find(const ShardKey& key) const {
    auto it = shards_.find(key);
    return it == shards_.end() ? nullptr : &it->second;
  }

  std::vector<SearchHit> search(const ShardKey& key, std::span<const float> q, std::size_t k,
                                std::size_t ef) const {
    const Shard* s = find(key);
    if (!s) return {};
    return s->search(q, k, ef);
  }

  void put(const ShardKey& key, Shard shard) {
    shards_.insert_or_assign(key, std::move(shard));
  }

 private:
  Taxonomy taxonomy_;
  std::map<ShardKey, Shard> shards_;
};

// One index per non-empty (fine class, gender); items inserted in item-id
// order. Distinct shards build on separate threads.
inline ShardManager build_shards(const std::vector<CatalogItem>& items, const Taxonomy& taxonomy,
                                 const ShardBuildOptions& opt = {}) {
  std::map<ShardKey, std::vector<const CatalogItem*>> groups;
  for (const auto& it : items) {
    if (it.gender == Gender::kUnknown)
      fail(ErrorKind::kData, "item '" + it.item_id + "' has unknown gender");
    taxonomy.fine(it.fine_class);
    groups[{it.fine_class, it.gender}].push_back(&it);
  }
  std::vector<std::pair<ShardKey, std::vector<const CatalogItem*>>> jobs(groups.begin(),
                                                                          groups.end());
  for (auto& [_, g] : jobs)
    std::sort(g.begin(), g.end(),
              [](const CatalogItem* a, const CatalogItem* b) { return a->item_id < b->item_id; });

  std::vector<std::unique_ptr<Shard>> built(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto build_one = [&](std::size_t j) {
    try {
      const auto& group = jobs[j].second;
      const std::size_t dim = group.front()->embedding.base.size();
      if (group.size() < opt.flat_below) {
        FlatIndex idx(dim);
        for (const auto* it : group) idx.insert(it->item_id, it->embedding.base);
        built[j] = std::make_unique<Shard>(std::move(idx));
      } else {
        HnswIndex idx(opt.hnsw, dim);
        for (const auto* it : group) idx.insert(it->item_id, it->embedding.base);
        built[j] = std::make_unique<Shard>(std::move(idx));
      }
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) build_one(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t j; (j = next++) < jobs.size();) build_one(j);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ShardManager mgr(taxonomy);
  for (std::size_t j = 0; j < jobs.size(); ++j) mgr.put(jobs[j].first, std::move(*built[j]));
  return mgr;
}

inline std::string shard_file_name(const ShardKey& key) {
  return "shard_" + std::to_string(key.fine_class) + "_" + std::string(to_string(key.gender)) +
         ".stix";
}

// Directory layout: taxonomy.json, one .stix file per shard, and
// manifest.json written last.
inline void save_shards(const std::filesystem::path& dir, const ShardManager& mgr) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream t(dir / "taxonomy.json", std::ios::trunc);
    t << to_json(mgr.taxonomy()).dump(2) << '\n';
  }
  nlohmann::json manifest;
  manifest["shards"] = nlohmann::json::array();
  for (const auto& [key, shard] : mgr.shards()) {
    const auto name = shard_file_name(key);
    io::write_file_atomic(dir / name, shard.serialize());
    manifest["shards"].push_back({{"fine_class", mgr.taxonomy().fine(key.fine_class).name},
                                  {"gender", std::string(to_string(key.gender))},
                                  {"file", name},
                                  {"items", shard.size()},
                                  {"kind", shard.is_flat() ? "flat" : "hnsw"}});
  }
  const auto text = manifest.dump(2) + "\n";
  io::write_file_atomic(dir / "manifest.json",
                        {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline ShardManager load_shards(const std::filesystem::path& dir) {
  const auto tax_bytes = io::read_file(dir / "taxonomy.json");
  Taxonomy taxonomy = load_taxonomy(
      std::string_view(reinterpret_cast<const char*>(tax_bytes.data()), tax_bytes.size()));
  const auto man_bytes = io::read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(man_bytes.begin(), man_bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kData, std::string("bad shard manifest: ") + e.what());
  }
  ShardManager mgr(taxonomy);
  for (const auto& s : manifest.at("shards")) {
    const auto gender = parse_gender(s.at("gender").get<std::string>());
    if (!gender || *gender == Gender::kUnknown) fail(ErrorKind::kData, "bad shard gender");
    ShardKey key{taxonomy.fine_id(s.at("fine_class").get<std::string>()), *gender};
    mgr.put(key, Shard::deserialize(io::read_file(dir / s.at("file").get<std::string>())));
  }
  return mgr;
}

}  // namespace stsearch
