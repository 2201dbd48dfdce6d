#include <deque>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "stsearch/index.hpp"
#include "stsearch/shards.hpp"
#include "test_util.hpp"

using namespace stsearch;
using testutil::random_unit_f;

namespace {

struct Corpus {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vectors;
};

Corpus random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "v%05zu", i);
    c.ids.push_back(buf);
    c.vectors.push_back(random_unit_f(rng, dim));
  }
  return c;
}

HnswIndex build(const Corpus& c, HnswParams p, std::size_t dim) {
  HnswIndex idx(p, dim);
  for (std::size_t i = 0; i < c.ids.size(); ++i) idx.insert(c.ids[i], c.vectors[i]);
  return idx;
}

// Nodes reachable from the entry point along layer-0 links.
std::size_t reachable_at_layer0(const HnswIndex& idx) {
  std::vector<bool> seen(idx.size(), false);
  std::deque<HnswIndex::NodeId> q{idx.entry_point()};
  seen[idx.entry_point()] = true;
  std::size_t count = 0;
  while (!q.empty()) {
    const auto v = q.front();
    q.pop_front();
    ++count;
    for (auto w : idx.neighbors(v, 0))
      if (!seen[w]) {
        seen[w] = true;
        q.push_back(w);
      }
  }
  return count;
}

std::vector<float> axis(std::size_t dim, std::size_t i) {
  std::vector<float> v(dim, 0.0f);
  v[i] = 1.0f;
  return v;
}

}  // namespace

TEST(Flat, ExactSearch) {
  std::mt19937_64 rng(1);
  const auto c = random_corpus(rng, 100, 16);
  FlatIndex f(16);
  for (std::size_t i = 0; i < c.ids.size(); ++i) f.insert(c.ids[i], c.vectors[i]);
  for (int q = 0; q < 20; ++q) {
    const auto v = random_unit_f(rng, 16);
    EXPECT_EQ(f.search(v, 7), oracle::linear_scan(c.ids, c.vectors, v, 7));
  }
  EXPECT_EQ(f.search(c.vectors[0], 500).size(), 100u);
}

TEST(Flat, Errors) {
  FlatIndex f(4);
  EXPECT_ERROR_KIND(f.search(axis(4, 0), 1), ErrorKind::kData);
  f.insert("a", axis(4, 0));
  EXPECT_ERROR_KIND(f.insert("a", axis(4, 1)), ErrorKind::kData);
  EXPECT_ERROR_KIND(f.insert("b", axis(5, 1)), ErrorKind::kData);
  EXPECT_ERROR_KIND(f.insert("c", std::vector<float>{2, 0, 0, 0}), ErrorKind::kData);
  EXPECT_ERROR_KIND(f.search(axis(4, 0), 0), ErrorKind::kUsage);
}

TEST(Hnsw, FirstInsertBecomesEntryPoint) {
  HnswIndex idx({}, 8);
  idx.insert("a", axis(8, 0));
  EXPECT_EQ(idx.entry_point(), 0u);
  EXPECT_EQ(idx.max_level(), idx.draw_level(0));
  EXPECT_EQ(idx.level_of(0), idx.draw_level(0));
}

TEST(Hnsw, SelfQueries) {
  std::mt19937_64 rng(2);
  HnswIndex idx;
  std::vector<std::vector<float>> vs;
  for (int i = 0; i < 3; ++i) {
    vs.push_back(random_unit_f(rng, 512));
    idx.insert("i" + std::to_string(i), vs.back());
  }
  for (int i = 0; i < 3; ++i) {
    const auto hits = idx.search(vs[i], 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].item_id, "i" + std::to_string(i));
    EXPECT_NEAR(hits[0].distance, 0.0, 1e-6);
  }
}

TEST(Hnsw, OrthogonalPair) {
  HnswIndex idx({}, 512);
  idx.insert("e1", axis(512, 0));
  idx.insert("e2", axis(512, 1));
  const auto hits = idx.search(axis(512, 0), 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0], (SearchHit{"e1", 0.0}));
}

TEST(Hnsw, GraphInvariantsOnRandomCorpus) {
  std::mt19937_64 rng(3);
  const auto c = random_corpus(rng, 200, 512);
  const auto idx = build(c, {}, 512);
  EXPECT_EQ(reachable_at_layer0(idx), idx.size());
  for (HnswIndex::NodeId n = 0; n < idx.size(); ++n) {
    EXPECT_LE(idx.level_of(n), idx.max_level());
    for (int l = 0; l <= idx.level_of(n); ++l) {
      EXPECT_LE(idx.neighbors(n, l).size(), std::size_t(idx.max_degree(l)));
      std::set<HnswIndex::NodeId> uniq(idx.neighbors(n, l).begin(), idx.neighbors(n, l).end());
      EXPECT_EQ(uniq.size(), idx.neighbors(n, l).size());
      EXPECT_FALSE(uniq.count(n));
      for (auto w : idx.neighbors(n, l)) EXPECT_GE(idx.level_of(w), l);  // monotone levels
    }
  }
  EXPECT_EQ(idx.level_of(idx.entry_point()), idx.max_level());
}

TEST(Hnsw, LayerZeroConnectedAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t dim = seed % 2 ? 512 : 8;
    const auto c = random_corpus(rng, 50 + seed * 20, dim);
    HnswParams p;
    p.seed = seed;
    const auto idx = build(c, p, dim);
    EXPECT_EQ(reachable_at_layer0(idx), idx.size()) << "seed " << seed;
  }
}

TEST(Hnsw, LevelDistributionIsGeometric) {
  HnswIndex idx;  // M = 16, lambda = 1/ln 16: P(level >= l) = 16^-l
  int at_least_one = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) at_least_one += idx.draw_level(i) >= 1;
  const double p = 1.0 / 16, sigma = std::sqrt(n * p * (1 - p));
  EXPECT_NEAR(at_least_one, n * p, 4 * sigma);
}

TEST(Hnsw, SmallCorpusWithFullBeamIsExact) {
  std::mt19937_64 rng(4);
  const auto c = random_corpus(rng, 64, 512);
  const auto idx = build(c, {}, 512);
  for (int q = 0; q < 50; ++q) {
    const auto v = random_unit_f(rng, 512);
    EXPECT_EQ(idx.search(v, 10, 64), oracle::linear_scan(c.ids, c.vectors, v, 10));
  }
}

TEST(Hnsw, ResultsAscendAndAreMembers) {
  std::mt19937_64 rng(5);
  const auto c = random_corpus(rng, 300, 32);
  const auto idx = build(c, {}, 32);
  for (int q = 0; q < 30; ++q) {
    const auto hits = idx.search(random_unit_f(rng, 32), 15, 40);
    EXPECT_LE(hits.size(), 15u);
    for (std::size_t i = 1; i < hits.size(); ++i) {
      EXPECT_TRUE(hits[i - 1].distance < hits[i].distance ||
                  (hits[i - 1].distance == hits[i].distance && hits[i - 1].item_id < hits[i].item_id));
    }
    for (const auto& h : hits) EXPECT_TRUE(idx.contains(h.item_id));
  }
}

TEST(Hnsw, DeterministicGraph) {
  std::mt19937_64 rng(6);
  const auto c = random_corpus(rng, 300, 64);
  EXPECT_EQ(build(c, {}, 64), build(c, {}, 64));
  HnswParams other;
  other.seed = 7;
  EXPECT_FALSE(build(c, other, 64) == build(c, {}, 64));
}

TEST(Hnsw, RecallGrowsWithBeam) {
  std::mt19937_64 rng(7);
  const auto c = random_corpus(rng, 2000, 64);
  HnswParams p;
  p.ef_construction = 100;
  const auto idx = build(c, p, 64);
  std::vector<std::vector<float>> queries;
  for (int q = 0; q < 50; ++q) queries.push_back(random_unit_f(rng, 64));
  double prev = 0;
  for (std::size_t ef : {10, 20, 40, 80, 160}) {
    double recall = 0;
    for (const auto& q : queries) {
      std::set<std::string> truth;
      for (const auto& h : oracle::linear_scan(c.ids, c.vectors, q, 10)) truth.insert(h.item_id);
      for (const auto& h : idx.search(q, 10, ef)) recall += truth.count(h.item_id) / 10.0;
    }
    recall /= queries.size();
    EXPECT_GE(recall, prev) << "ef " << ef;
    prev = recall;
  }
  EXPECT_GE(prev, 0.9);
}

TEST(Hnsw, Errors) {
  HnswIndex idx({}, 4);
  EXPECT_ERROR_KIND(idx.search(axis(4, 0), 1), ErrorKind::kData);
  idx.insert("a", axis(4, 0));
  EXPECT_ERROR_KIND(idx.insert("a", axis(4, 1)), ErrorKind::kData);
  EXPECT_ERROR_KIND(idx.insert("b", axis(3, 1)), ErrorKind::kData);
  EXPECT_ERROR_KIND(idx.search(axis(4, 0), 0), ErrorKind::kUsage);
  HnswParams bad;
  bad.M = 1;
  EXPECT_ERROR_KIND(HnswIndex(bad, 4), ErrorKind::kUsage);
  bad.M = 16;
  bad.ef_construction = 8;
  EXPECT_ERROR_KIND(HnswIndex(bad, 4), ErrorKind::kUsage);
}

namespace {

CatalogItem item(const std::string& id, FineClassId cls, Gender g, std::vector<float> v) {
  CatalogItem c;
  c.item_id = id;
  c.image_name = id + ".png";
  c.fine_class = cls;
  c.gender = g;
  c.embedding.base = std::move(v);
  return c;
}

}  // namespace

TEST(Shards, OnePerClassAndGender) {
  const auto t = default_taxonomy();
  std::mt19937_64 rng(8);
  std::vector<CatalogItem> items;
  for (int i = 0; i < 40; ++i)
    items.push_back(item("i" + std::to_string(i), i % 2 ? 3 : 40,
                         i % 4 < 2 ? Gender::kMan : Gender::kWoman, random_unit_f(rng, 16)));
  const auto mgr = build_shards(items, t);
  EXPECT_EQ(mgr.size(), 4u);
  std::size_t total = 0;
  for (const auto& [key, shard] : mgr.shards()) {
    total += shard.size();
    for (const auto& it : items)
      EXPECT_EQ(shard.contains(it.item_id), it.fine_class == key.fine_class && it.gender == key.gender);
  }
  EXPECT_EQ(total, items.size());
  EXPECT_EQ(build_shards({}, t).size(), 0u);
}

TEST(Shards, CensusOverDefaultTaxonomy) {
  const auto t = default_taxonomy();
  std::mt19937_64 rng(9);
  std::vector<CatalogItem> items;
  std::map<ShardKey, std::size_t> census;
  int n = 0;
  for (const auto& f : t.fine_classes())
    for (Gender g : kStoredGenders) {
      if ((f.id + int(g)) % 3 == 0) continue;
      const int count = 1 + (f.id * 7 + int(g)) % 3;
      for (int k = 0; k < count; ++k) {
        items.push_back(item("n" + std::to_string(n++), f.id, g, random_unit_f(rng, 8)));
        ++census[{f.id, g}];
      }
    }
  const auto mgr = build_shards(items, t);
  ASSERT_EQ(mgr.size(), census.size());
  for (const auto& [key, count] : census) {
    ASSERT_NE(mgr.find(key), nullptr);
    EXPECT_EQ(mgr.find(key)->size(), count);
  }
}

TEST(Shards, FlatBelowCutoffHnswAbove) {
  const auto t = default_taxonomy();
  std::mt19937_64 rng(10);
  std::vector<CatalogItem> items;
  for (int i = 0; i < 31; ++i) items.push_back(item("a" + std::to_string(i), 0, Gender::kMan, random_unit_f(rng, 8)));
  for (int i = 0; i < 32; ++i) items.push_back(item("b" + std::to_string(i), 1, Gender::kMan, random_unit_f(rng, 8)));
  const auto mgr = build_shards(items, t);
  EXPECT_TRUE(mgr.find({0, Gender::kMan})->is_flat());
  EXPECT_FALSE(mgr.find({1, Gender::kMan})->is_flat());
}

TEST(Shards, BuildOrderIndependentOfInputOrder) {
  const auto t = default_taxonomy();
  std::mt19937_64 rng(11);
  std::vector<CatalogItem> items;
  for (int i = 0; i < 80; ++i) items.push_back(item("x" + std::to_string(i), 2, Gender::kWoman, random_unit_f(rng, 8)));
  auto shuffled = items;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  ShardBuildOptions one;
  one.threads = 1;
  EXPECT_EQ(build_shards(items, t, one).find({2, Gender::kWoman})->serialize(),
            build_shards(shuffled, t).find({2, Gender::kWoman})->serialize());
}

TEST(Shards, RejectsUnknownGenderAndClass) {
  const auto t = default_taxonomy();
  EXPECT_ERROR_KIND(build_shards({item("a", 0, Gender::kUnknown, axis(4, 0))}, t), ErrorKind::kData);
  EXPECT_ERROR_KIND(build_shards({item("a", 999, Gender::kMan, axis(4, 0))}, t), ErrorKind::kData);
}
