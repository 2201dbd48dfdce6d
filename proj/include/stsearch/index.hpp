#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stsearch/binary_io.hpp"
#include "stsearch/error.hpp"

namespace stsearch {

struct SearchHit {
  std::string item_id;
  double distance = 0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

// Cosine distance on unit float vectors, fixed accumulation order.
inline float unit_cosine_distance(const float* a, const float* b, std::size_t dim) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const std::size_t blocks = dim / 8;
  for (std::size_t j = 0; j < blocks; ++j)
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[8 * j + k] * b[8 * j + k];
  std::size_t i = 8 * blocks;
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < dim; ++i) s += a[i] * b[i];
  return 1.0f - s;
}

namespace detail {

inline void check_unit(std::span<const float> v, std::size_t dim) {
  if (v.size() != dim)
    fail(ErrorKind::kData, "vector has dimension " + std::to_string(v.size()) + ", expected " +
                               std::to_string(dim));
  double n = 0;
  for (float x : v) n += static_cast<double>(x) * x;
  if (std::abs(std::sqrt(n) - 1.0) > 1e-4) fail(ErrorKind::kData, "vector is not unit norm");
}

inline void sort_hits(std::vector<SearchHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.item_id < b.item_id;
  });
}

inline constexpr char kIndexMagic[4] = {'S', 'T', 'I', 'X'};
inline constexpr std::uint16_t kIndexVersion = 1;
enum class IndexKind : std::uint8_t { kHnsw = 0, kFlat = 1 };

}  // namespace detail

// Exact linear-scan index.
class FlatIndex {
 public:
  explicit FlatIndex(std::size_t dim = 512) : dim_(dim) {}

  void insert(const std::string& item_id, std::span<const float> v) {
    detail::check_unit(v, dim_);
    if (!ids_.emplace(item_id, nodes_.size()).second)
      fail(ErrorKind::kData, "duplicate item id '" + item_id + "'");
    nodes_.push_back(item_id);
    vectors_.insert(vectors_.end(), v.begin(), v.end());
  }

  std::vector<SearchHit> search(std::span<const float> q, std::size_t k) const {
    if (nodes_.empty()) fail(ErrorKind::kData, "index is empty");
    if (k < 1) fail(ErrorKind::kUsage, "k must be >= 1");
    if (q.size() != dim_) fail(ErrorKind::kData, "query dimension mismatch");
    std::vector<SearchHit> hits;
    hits.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      hits.push_back({nodes_[i], unit_cosine_distance(q.data(), vector(i), dim_)});
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      [](const SearchHit& a, const SearchHit& b) {
                        return a.distance != b.distance ? a.distance < b.distance
                                                        : a.item_id < b.item_id;
                      });
    hits.resize(keep);
    return hits;
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t dim() const { return dim_; }
  bool contains(const std::string& id) const { return ids_.count(id) != 0; }
  const std::vector<std::string>& item_ids() const { return nodes_; }
  const float* vector(std::size_t node) const { return vectors_.data() + node * dim_; }

  std::vector<std::uint8_t> serialize() const;
  static FlatIndex deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const FlatIndex& a, const FlatIndex& b) {
    return a.dim_ == b.dim_ && a.nodes_ == b.nodes_ && a.vectors_ == b.vectors_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> nodes_;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct HnswParams {
  int M = 16;
  int ef_construction = 200;
  int ef_search = 100;
  double level_lambda = 0;  // 0 selects 1/ln(M)
  std::uint64_t seed = 42;

  double lambda() const { return level_lambda > 0 ? level_lambda : 1.0 / std::log(M); }

  void validate() const {
    if (M < 2) fail(ErrorKind::kUsage, "HNSW needs M >= 2");
    if (ef_construction < M) fail(ErrorKind::kUsage, "HNSW needs ef_construction >= M");
    if (ef_search < 1) fail(ErrorKind::kUsage, "HNSW needs ef_search >= 1");
  }

  friend bool operator==(const HnswParams&, const HnswParams&) = default;
};

// Hierarchical navigable small-world graph over unit vectors with cosine
// distance. Insert-only; searches are const and need no locking.
class HnswIndex {
 public:
  using NodeId = std::uint32_t;

  explicit HnswIndex(HnswParams params = {}, std::size_t dim = 512)
      : params_(params), dim_(dim) {
    params_.validate();
  }

  const HnswParams& params() const { return params_; }
  std::size_t size() const { return item_ids_.size(); }
  std::size_t dim() const { return dim_; }
  int max_level() const { return max_level_; }
  NodeId entry_point() const { return entry_; }
  int level_of(NodeId n) const { return static_cast<int>(links_[n].size()) - 1; }
  const std::vector<NodeId>& neighbors(NodeId n, int level) const { return links_[n][level]; }
  const std::string& item_id(NodeId n) const { return item_ids_[n]; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
  const float* vector(NodeId n) const { return vectors_.data() + std::size_t{n} * dim_; }

  int max_degree(int level) const { return level == 0 ? 2 * params_.M : params_.M; }

  // Level for the n-th inserted node: floor(-ln(U) * lambda), with U drawn
  // from a counter-based generator keyed by (seed, n).
  int draw_level(std::uint64_t n) const {
    std::uint64_t z = params_.seed + (n + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    const double u = (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
    return static_cast<int>(std::floor(-std::log(u) * params_.lambda()));
  }

  void insert(const std::string& item_id, std::span<const float> v) {
    detail::check_unit(v, dim_);
    if (by_id_.count(item_id)) fail(ErrorKind::kData, "duplicate item id '" + item_id + "'");
    const auto node = static_cast<NodeId>(item_ids_.size());
    const int level = draw_level(node);
    item_ids_.push_back(item_id);
    by_id_.emplace(item_id, node);
    vectors_.insert(vectors_.end(), v.begin(), v.end());
    links_.emplace_back(static_cast<std::size_t>(level) + 1);

    if (node == 0) {
      entry_ = 0;
      max_level_ = level;
      return;
    }
    const float* q = vector(node);
    NodeId cur = entry_;
    float cur_dist = dist(q, cur);
    for (int lc = max_level_; lc > level; --lc) greedy_step(q, cur, cur_dist, lc);

    std::vector<Candidate> entries{{cur_dist, cur}};
    for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
      auto found = search_layer(q, entries, static_cast<std::size_t>(params_.ef_construction), lc);
      auto selected = select_neighbors(found, static_cast<std::size_t>(params_.M));
      auto& mine = links_[node][lc];
      for (const auto& c : selected) mine.push_back(c.node);
      for (const auto& c : selected) connect(c.node, node, c.dist, lc);
      entries = std::move(found);
    }
    if (level > max_level_) {
      max_level_ = level;
      entry_ = node;
    }
  }

  // Up to k nearest items, ascending by distance then item id.
  std::vector<SearchHit> search(std::span<const float> query, std::size_t k,
                                std::size_t ef = 0) const {
    if (item_ids_.empty()) fail(ErrorKind::kData, "index is empty");
    if (k < 1) fail(ErrorKind::kUsage, "k must be >= 1");
    if (query.size() != dim_) fail(ErrorKind::kData, "query dimension mismatch");
    if (ef == 0) ef = static_cast<std::size_t>(params_.ef_search);
    ef = std::max(ef, k);
    const float* q = query.data();
    if (ef >= item_ids_.size()) {
      // The beam would cover the whole corpus anyway; scan it exactly.
      std::vector<SearchHit> hits;
      hits.reserve(item_ids_.size());
      for (NodeId n = 0; n < item_ids_.size(); ++n) hits.push_back({item_ids_[n], dist(q, n)});
      detail::sort_hits(hits);
      if (hits.size() > k) hits.resize(k);
      return hits;
    }
    NodeId cur = entry_;
    float cur_dist = dist(q, cur);
    for (int lc = max_level_; lc > 0; --lc) greedy_step(q, cur, cur_dist, lc);
    auto found = search_layer(q, {{cur_dist, cur}}, ef, 0);
    std::vector<SearchHit> hits;
    hits.reserve(found.size());
    for (const auto& c : found) hits.push_back({item_ids_[c.node], c.dist});
    detail::sort_hits(hits);
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  std::vector<std::uint8_t> serialize() const;
  static HnswIndex deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const HnswIndex& a, const HnswIndex& b) {
    return a.params_ == b.params_ && a.dim_ == b.dim_ && a.item_ids_ == b.item_ids_ &&
           a.vectors_ == b.vectors_ && a.links_ == b.links_ && a.entry_ == b.entry_ &&
           a.max_level_ == b.max_level_;
  }

 private:
  struct Candidate {
    float dist;
    NodeId node;
    bool operator<(const Candidate& o) const {
      return dist != o.dist ? dist < o.dist : node < o.node;
    }
    bool operator>(const Candidate& o) const { return o < *this; }
  };

  float dist(const float* q, NodeId n) const { return unit_cosine_distance(q, vector(n), dim_); }

  void greedy_step(const float* q, NodeId& cur, float& cur_dist, int level) const {
    for (bool changed = true; changed;) {
      changed = false;
      for (NodeId nb : links_[cur][level]) {
        const Candidate c{dist(q, nb), nb};
        if (c < Candidate{cur_dist, cur}) {
          cur = nb;
          cur_dist = c.dist;
          changed = true;
        }
      }
    }
  }

  // Beam search on one layer; returns up to ef candidates in ascending order.
  std::vector<Candidate> search_layer(const float* q, const std::vector<Candidate>& entries,
                                      std::size_t ef, int level) const {
    std::vector<std::uint8_t> visited(item_ids_.size(), 0);
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;
    for (const auto& e : entries) {
      if (visited[e.node]) continue;
      visited[e.node] = 1;
      frontier.push(e);
      best.push(e);
      if (best.size() > ef) best.pop();
    }
    while (!frontier.empty()) {
      const Candidate c = frontier.top();
      if (best.size() >= ef && best.top() < c) break;
      frontier.pop();
      for (NodeId nb : links_[c.node][level]) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        const Candidate cand{dist(q, nb), nb};
        if (best.size() < ef || cand < best.top()) {
          frontier.push(cand);
          best.push(cand);
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Nearest-first selection that skips a candidate when some already
  // selected neighbour is closer to it than the base point is.
  std::vector<Candidate> select_neighbors(const std::vector<Candidate>& sorted,
                                          std::size_t m) const {
    std::vector<Candidate> selected;
    for (const auto& c : sorted) {
      if (selected.size() >= m) break;
      bool keep = true;
      for (const auto& s : selected)
        if (unit_cosine_distance(vector(c.node), vector(s.node), dim_) < c.dist) {
          keep = false;
          break;
        }
      if (keep) selected.push_back(c);
    }
    return selected;
  }

  void connect(NodeId from, NodeId to, float d, int level) {
    auto& list = links_[from][level];
    const auto cap = static_cast<std::size_t>(max_degree(level));
    if (list.size() < cap) {
      list.push_back(to);
      return;
    }
    std::vector<Candidate> cands{{d, to}};
    const float* base = vector(from);
    for (NodeId nb : list) cands.push_back({dist(base, nb), nb});
    std::sort(cands.begin(), cands.end());
    const auto kept = select_neighbors(cands, cap);
    list.clear();
    for (const auto& c : kept) list.push_back(c.node);
  }

  HnswParams params_;
  std::size_t dim_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, NodeId> by_id_;
  std::vector<float> vectors_;
  std::vector<std::vector<std::vector<NodeId>>> links_;  // node -> level -> neighbours
  NodeId entry_ = 0;
  int max_level_ = -1;
};

namespace detail {

inline constexpr std::size_t kLengthOffset = 7;

// Header: magic, u16 version, u8 kind, u64 total file length. The length
// is patched in by finish() once the body is written.
inline void put_header(io::ByteWriter& w, IndexKind kind) {
  w.put_bytes({kIndexMagic, 4});
  w.put<std::uint16_t>(kIndexVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(kind));
  w.put<std::uint64_t>(0);
}

inline std::vector<std::uint8_t> finish(io::ByteWriter& w) {
  w.patch<std::uint64_t>(kLengthOffset, w.size() + 4);
  w.put_checksum();
  return w.bytes();
}

// Checks magic and version, then length (truncation) and checksum before
// any of the body is trusted.
inline IndexKind read_header(io::ByteReader& r, std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || r.get_bytes(4) != std::string(kIndexMagic, 4))
    fail(ErrorKind::kFormat, "not an index file (bad magic)");
  if (r.get<std::uint16_t>() != kIndexVersion)
    fail(ErrorKind::kFormat, "unsupported index file version");
  const auto kind = r.get<std::uint8_t>();
  const auto length = r.get<std::uint64_t>();
  if (bytes.size() < length) fail(ErrorKind::kTruncated, "index file is truncated");
  if (bytes.size() != length || !io::checksum_matches(bytes))
    fail(ErrorKind::kChecksum, "index checksum mismatch");
  if (kind > 1) fail(ErrorKind::kFormat, "unknown index kind");
  return static_cast<IndexKind>(kind);
}

}  // namespace detail

// Flat layout: header, u16 dim, u64 count, f32 vectors, id table, CRC-32.
inline std::vector<std::uint8_t> FlatIndex::serialize() const {
  io::ByteWriter w;
  detail::put_header(w, detail::IndexKind::kFlat);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(dim_));
  w.put<std::uint64_t>(nodes_.size());
  w.put_floats(vectors_);
  for (const auto& id : nodes_) w.put_string(id);
  return detail::finish(w);
}

inline FlatIndex FlatIndex::deserialize(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (detail::read_header(r, bytes) != detail::IndexKind::kFlat)
    fail(ErrorKind::kFormat, "expected a flat index");
  FlatIndex idx(r.get<std::uint16_t>());
  const auto count = r.get<std::uint64_t>();
  if (idx.dim_ != 0 && count > r.remaining() / (4 * idx.dim_))
    fail(ErrorKind::kTruncated, "index file is truncated");
  idx.vectors_.resize(count * idx.dim_);
  r.get_floats(idx.vectors_);
  for (std::uint64_t i = 0; i < count; ++i) {
    idx.nodes_.push_back(r.get_string());
    idx.ids_.emplace(idx.nodes_.back(), i);
  }
  return idx;
}

// HNSW layout: header, params (u32 M, u32 ef_construction, u32 ef_search,
// f64 lambda, u64 seed), u16 dim, u64 count, u32 entry, i32 max level,
// f32 vectors, per node u32 level then per level u32 degree + u32 ids,
// id table, CRC-32.
inline std::vector<std::uint8_t> HnswIndex::serialize() const {
  io::ByteWriter w;
  detail::put_header(w, detail::IndexKind::kHnsw);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.M));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.ef_construction));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.ef_search));
  w.put<double>(params_.level_lambda);
  w.put<std::uint64_t>(params_.seed);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(dim_));
  w.put<std::uint64_t>(item_ids_.size());
  w.put<std::uint32_t>(entry_);
  w.put<std::int32_t>(max_level_);
  w.put_floats(vectors_);
  for (const auto& levels : links_) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(levels.size() - 1));
    for (const auto& l : levels) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.size()));
      for (NodeId n : l) w.put<std::uint32_t>(n);
    }
  }
  for (const auto& id : item_ids_) w.put_string(id);
  return detail::finish(w);
}

inline HnswIndex HnswIndex::deserialize(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (detail::read_header(r, bytes) != detail::IndexKind::kHnsw)
    fail(ErrorKind::kFormat, "expected an HNSW index");
  HnswParams p;
  p.M = static_cast<int>(r.get<std::uint32_t>());
  p.ef_construction = static_cast<int>(r.get<std::uint32_t>());
  p.ef_search = static_cast<int>(r.get<std::uint32_t>());
  p.level_lambda = r.get<double>();
  p.seed = r.get<std::uint64_t>();
  if (p.M < 2 || p.ef_construction < p.M || p.ef_search < 1)
    fail(ErrorKind::kFormat, "index parameters are invalid");
  const auto dim = r.get<std::uint16_t>();
  HnswIndex idx(p, dim);
  const auto count = r.get<std::uint64_t>();
  idx.entry_ = r.get<std::uint32_t>();
  idx.max_level_ = r.get<std::int32_t>();
  if (dim != 0 && count > r.remaining() / (4u * dim))
    fail(ErrorKind::kTruncated, "index file is truncated");
  idx.vectors_.resize(count * dim);
  r.get_floats(idx.vectors_);
  idx.links_.resize(count);
  for (auto& levels : idx.links_) {
    const auto top = r.get<std::uint32_t>();
    if (top > 64) fail(ErrorKind::kFormat, "index level table is invalid");
    levels.resize(top + 1);
    for (auto& l : levels) {
      const auto degree = r.get<std::uint32_t>();
      r.require(std::size_t{degree} * 4);
      l.resize(degree);
      for (auto& n : l) n = r.get<std::uint32_t>();
    }
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    idx.item_ids_.push_back(r.get_string());
    idx.by_id_.emplace(idx.item_ids_.back(), static_cast<NodeId>(i));
  }
  return idx;
}

}  // namespace stsearch
