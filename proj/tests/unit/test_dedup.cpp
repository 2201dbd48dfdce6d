#include <random>
#include <set>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "stsearch/dedup.hpp"
#include "stsearch/union_find.hpp"
#include "test_util.hpp"

using namespace stsearch;
using testutil::random_unit_f;

namespace {

CatalogItem item(const std::string& id, const std::string& image, double priority,
                 std::vector<float> v = {1, 0, 0, 0}, FineClassId cls = 0) {
  CatalogItem c;
  c.item_id = id;
  c.image_name = image;
  c.priority = priority;
  c.fine_class = cls;
  c.gender = Gender::kWoman;
  c.embedding.base = std::move(v);
  return c;
}

std::vector<std::string> ids(const std::vector<CatalogItem>& items) {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(i.item_id);
  return out;
}

// Points scattered around a few centres so that near-duplicate pairs exist.
std::vector<CatalogItem> clustered(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                   int centres, double spread) {
  std::vector<std::vector<float>> c;
  for (int i = 0; i < centres; ++i) c.push_back(random_unit_f(rng, dim));
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<CatalogItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v = c[rng() % c.size()];
    double s = 0;
    for (auto& x : v) {
      x += static_cast<float>(noise(rng));
      s += double(x) * x;
    }
    for (auto& x : v) x = static_cast<float>(x / std::sqrt(s));
    out.push_back(item("c" + std::to_string(i), "img" + std::to_string(i), double(rng() % 10), v));
  }
  return out;
}

std::set<std::pair<std::size_t, std::size_t>> pairwise_edges(const std::vector<CatalogItem>& items,
                                                             double tau) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size(); ++j)
      if (unit_cosine_distance(items[i].embedding.base.data(), items[j].embedding.base.data(),
                               items[i].embedding.base.size()) <= tau)
        out.emplace(i, j);
  return out;
}

}  // namespace

TEST(Prefilter, KeepsHigherPriorityPerImage) {
  const auto out = prefilter({item("a", "x.png", 5), item("b", "x.png", 9)}, -1e300);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].item_id, "b");
}

TEST(Prefilter, IdentityOnUniqueNames) {
  std::vector<CatalogItem> items{item("a", "1", 1), item("b", "2", 0), item("c", "3", -4)};
  EXPECT_EQ(ids(prefilter(items, -std::numeric_limits<double>::infinity())), ids(items));
}

TEST(Prefilter, MatchesSortGroupReduce) {
  std::vector<CatalogItem> items{item("a", "p", 3), item("b", "q", 1), item("c", "p", 3),
                                 item("d", "r", 0.5), item("e", "q", 7), item("f", "s", 2),
                                 item("g", "p", 1), item("h", "r", 0.2), item("i", "t", 9),
                                 item("j", "s", 2)};
  const double min_priority = 0.4;
  // oracle: drop below min, sort by (image, -priority, id), take the head of each group
  auto pool = items;
  pool.erase(std::remove_if(pool.begin(), pool.end(),
                            [&](const CatalogItem& c) { return c.priority < min_priority; }),
             pool.end());
  std::sort(pool.begin(), pool.end(), [](const CatalogItem& a, const CatalogItem& b) {
    return std::tie(a.image_name, b.priority, a.item_id) < std::tie(b.image_name, a.priority, b.item_id);
  });
  std::set<std::string> expect;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (i == 0 || pool[i].image_name != pool[i - 1].image_name) expect.insert(pool[i].item_id);
  const auto got = ids(prefilter(items, min_priority));
  EXPECT_EQ(std::set<std::string>(got.begin(), got.end()), expect);
  EXPECT_EQ(expect, (std::set<std::string>{"a", "e", "d", "f", "i"}));
}

TEST(DupGraph, IdenticalEmbeddingsShareAnEdge) {
  const auto g = build_dup_graph({item("a", "1", 0), item("b", "2", 0)}, 0.05);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0], (std::pair<std::size_t, std::size_t>{0, 1}));
}

TEST(DupGraph, FarApartHasNoEdges) {
  const auto g = build_dup_graph({item("a", "1", 0, {1, 0, 0, 0}), item("b", "2", 0, {0, 1, 0, 0}),
                                  item("c", "3", 0, {0, 0, 1, 0})},
                                 0.05);
  EXPECT_TRUE(g.edges.empty());
}

TEST(DupGraph, MatchesPairwiseScan) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto items = clustered(rng, 30, 64, 4, 0.02);
    const auto g = build_dup_graph(items, 0.05, 3);  // small k forces re-queries
    const std::set<std::pair<std::size_t, std::size_t>> got(g.edges.begin(), g.edges.end());
    EXPECT_EQ(got, pairwise_edges(items, 0.05));
    EXPECT_FALSE(got.empty());
  }
}

TEST(Components, Basics) {
  DuplicationGraph g{{"a", "b", "c"}, {{0, 1}, {1, 2}}};
  EXPECT_EQ(connected_components(g), (std::vector<Component>{{"a", "b", "c"}}));
  DuplicationGraph none{{"a", "b", "c", "d"}, {}};
  EXPECT_EQ(connected_components(none).size(), 4u);
  DuplicationGraph bad{{"a"}, {{0, 3}}};
  EXPECT_ERROR_KIND(connected_components(bad), ErrorKind::kData);
}

TEST(Components, MatchBfsClosure) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 50;
    DuplicationGraph g;
    for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("n" + std::to_string(i));
    const std::size_t m = rng() % (n + 5);
    for (std::size_t e = 0; e < m; ++e) {
      std::size_t a = rng() % n, b = rng() % n;
      if (a != b) g.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) pos[g.nodes[i]] = i;
    std::vector<std::vector<std::size_t>> got;
    for (const auto& c : connected_components(g)) {
      std::vector<std::size_t> idx;
      for (const auto& id : c) idx.push_back(pos[id]);
      std::sort(idx.begin(), idx.end());
      got.push_back(idx);
    }
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, oracle::bfs_components(n, g.edges));
  }
}

TEST(UnionFindTest, Basics) {
  UnionFind uf(6);
  uf.unite(0, 1);
  uf.unite(2, 3);
  uf.unite(1, 0);
  EXPECT_NE(uf.find(0), uf.find(2));
  uf.unite(1, 3);
  EXPECT_EQ(uf.find(0), uf.find(2));
  EXPECT_NE(uf.find(4), uf.find(5));
}

TEST(RetainTop, PicksHighestPriority) {
  std::vector<CatalogItem> items{item("a", "1", 3), item("b", "2", 7)};
  EXPECT_EQ(ids(retain_top(items, {{"a", "b"}})), (std::vector<std::string>{"b"}));
  EXPECT_EQ(ids(retain_top(items, {{"a"}, {"b"}})), ids(items));
  EXPECT_ERROR_KIND(retain_top(items, {{"zz"}}), ErrorKind::kData);
}

TEST(RetainTop, MatchesPerGroupMax) {
  std::vector<CatalogItem> items{item("a", "1", 3), item("b", "2", 7), item("c", "3", 1),
                                 item("d", "4", 4), item("e", "5", 4), item("f", "6", 0)};
  const std::vector<Component> comps{{"a", "b", "c"}, {"d", "e"}, {"f"}};
  std::set<std::string> expect;
  for (const auto& comp : comps) {
    std::string best = comp[0];
    double bp = -1;
    for (const auto& id : comp)
      for (const auto& it : items)
        if (it.item_id == id && (it.priority > bp || (it.priority == bp && id < best))) {
          bp = it.priority;
          best = id;
        }
    expect.insert(best);
  }
  const auto got = ids(retain_top(items, comps));
  EXPECT_EQ(std::set<std::string>(got.begin(), got.end()), expect);
  EXPECT_EQ(expect, (std::set<std::string>{"b", "d", "f"}));
}

TEST(DedupPipeline, IdempotentAndSeparated) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto items = clustered(rng, 60, 32, 6, 0.03);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].fine_class = static_cast<int>(i % 2);
    const auto once = dedup_catalog(items);
    EXPECT_EQ(ids(dedup_catalog(once)), ids(once));
    // survivors of the same class are never near-duplicates
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t j = i + 1; j < once.size(); ++j)
        if (once[i].fine_class == once[j].fine_class) {
          EXPECT_GT(unit_cosine_distance(once[i].embedding.base.data(), once[j].embedding.base.data(), 32), 0.05);
        }
  }
}

TEST(DedupPipeline, ClassesAreDedupedSeparately) {
  std::vector<CatalogItem> items{item("a", "1", 1, {1, 0, 0, 0}, 0), item("b", "2", 2, {1, 0, 0, 0}, 1)};
  EXPECT_EQ(dedup_catalog(items).size(), 2u);
  items[1].fine_class = 0;
  EXPECT_EQ(ids(dedup_catalog(items)), (std::vector<std::string>{"b"}));
}
