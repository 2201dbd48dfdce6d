#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stsearch/catalog.hpp"
#include "stsearch/error.hpp"
#include "stsearch/index.hpp"
#include "stsearch/union_find.hpp"

namespace stsearch {

struct DuplicationGraph {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j, sorted, unique
};

using Component = std::vector<std::string>;

struct DedupOptions {
  double tau = 0.05;  // cosine distance
  double min_priority = -std::numeric_limits<double>::infinity();
  std::size_t k = 20;
};

namespace detail {
inline bool better_item(const CatalogItem& a, const CatalogItem& b) {
  return a.priority != b.priority ? a.priority > b.priority : a.item_id < b.item_id;
}
}  // namespace detail

// Drops low-priority items, then keeps the best item per image name.
// Survivors stay in input order.
inline std::vector<CatalogItem> prefilter(const std::vector<CatalogItem>& items,
                                          double min_priority) {
  std::unordered_map<std::string, std::size_t> best;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].priority < min_priority) continue;
    auto [it, inserted] = best.emplace(items[i].image_name, i);
    if (!inserted && detail::better_item(items[i], items[it->second])) it->second = i;
  }
  std::vector<CatalogItem> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = best.find(items[i].image_name);
    if (it != best.end() && it->second == i) out.push_back(items[i]);
  }
  return out;
}

// Near-duplicate edges from an exact k-NN corpus. Whenever an item's k-th
// neighbour is still within tau, the item is re-queried with 2k, so the edge
// set equals the full pairwise scan.
inline DuplicationGraph build_dup_graph(const std::vector<CatalogItem>& items, double tau,
                                        std::size_t k = 20) {
  DuplicationGraph g;
  if (items.empty()) return g;
  const std::size_t dim = items.front().embedding.base.size();
  FlatIndex corpus(dim);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < items.size(); ++i) {
    corpus.insert(items[i].item_id, items[i].embedding.base);
    g.nodes.push_back(items[i].item_id);
    pos.emplace(items[i].item_id, i);
  }
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::size_t kk = std::max<std::size_t>(k, 1) + 1;  // +1 for the item itself
    std::vector<SearchHit> hits;
    for (;;) {
      hits = corpus.search(items[i].embedding.base, kk);
      if (hits.size() < kk || hits.back().distance > tau) break;
      kk *= 2;
    }
    for (const auto& h : hits) {
      if (h.distance > tau) break;
      const std::size_t j = pos.at(h.item_id);
      if (j != i) edges.emplace(std::min(i, j), std::max(i, j));
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

// Components as id sets; members ascend by node position, components by
// their first member.
inline std::vector<Component> connected_components(const DuplicationGraph& g) {
  UnionFind uf(g.nodes.size());
  for (const auto& [a, b] : g.edges) {
    if (a >= g.nodes.size() || b >= g.nodes.size())
      fail(ErrorKind::kData, "edge references a missing node");
    uf.unite(a, b);
  }
  std::vector<std::size_t> root_first(g.nodes.size(), g.nodes.size());
  std::vector<Component> out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const std::size_t r = uf.find(i);
    if (root_first[r] == g.nodes.size()) {
      root_first[r] = out.size();
      out.emplace_back();
    }
    out[root_first[r]].push_back(g.nodes[i]);
  }
  return out;
}

// Keeps the highest-priority item of each component (smallest id on ties),
// in input order.
inline std::vector<CatalogItem> retain_top(const std::vector<CatalogItem>& items,
                                           const std::vector<Component>& components) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < items.size(); ++i) pos.emplace(items[i].item_id, i);
  std::vector<std::uint8_t> keep(items.size(), 0);
  for (const auto& comp : components) {
    std::size_t best = items.size();
    for (const auto& id : comp) {
      auto it = pos.find(id);
      if (it == pos.end()) fail(ErrorKind::kData, "component references unknown item '" + id + "'");
      if (best == items.size() || detail::better_item(items[it->second], items[best]))
        best = it->second;
    }
    if (best < items.size()) keep[best] = 1;
  }
  std::vector<CatalogItem> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (keep[i]) out.push_back(items[i]);
  return out;
}

// Prefilter, then near-duplicate removal within each fine class.
inline std::vector<CatalogItem> dedup_catalog(const std::vector<CatalogItem>& items,
                                              const DedupOptions& opt = {}) {
  const auto filtered = prefilter(items, opt.min_priority);
  std::map<FineClassId, std::vector<CatalogItem>> groups;
  for (const auto& it : filtered) groups[it.fine_class].push_back(it);
  std::set<std::string> survivors;
  for (const auto& [cls, group] : groups) {
    const auto kept = retain_top(group, connected_components(build_dup_graph(group, opt.tau, opt.k)));
    for (const auto& it : kept) survivors.insert(it.item_id);
  }
  std::vector<CatalogItem> out;
  for (const auto& it : filtered)
    if (survivors.count(it.item_id)) out.push_back(it);
  return out;
}

}  // namespace stsearch
