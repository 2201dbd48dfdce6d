#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "stsearch/taxonomy.hpp"
#include "test_util.hpp"

using namespace stsearch;

namespace {

const char* kMinimal = R"({"high_classes":[{"name":"top"}],
                           "fine_classes":[{"name":"t-shirt","parent":"top"}]})";

}  // namespace

TEST(Taxonomy, DefaultHasPaperCounts) {
  const auto t = default_taxonomy();
  int apparel = 0, persons = 0;
  for (const auto& h : t.high_classes()) (h.person ? persons : apparel)++;
  EXPECT_EQ(apparel, 16);
  EXPECT_EQ(persons, 4);
  EXPECT_EQ(t.fine_classes().size(), 146u);
}

TEST(Taxonomy, DefaultChildrenCounts) {
  const auto t = default_taxonomy();
  EXPECT_EQ(t.fine_classes_of(t.high_id("top")).size(), 33u);
  EXPECT_EQ(t.fine_classes_of(t.high_id("dress")).size(), 5u);
  EXPECT_EQ(t.fine_classes_of(t.high_id("bottom")).size(), 10u);
}

TEST(Taxonomy, EveryFineClassHasExactlyOneApparelParent) {
  const auto t = default_taxonomy();
  std::vector<int> seen(t.fine_classes().size(), 0);
  for (const auto& h : t.high_classes()) {
    if (h.person) {
      EXPECT_TRUE(t.fine_classes_of(h.id).empty());
      continue;
    }
    EXPECT_FALSE(t.fine_classes_of(h.id).empty()) << h.name;
    for (auto f : t.fine_classes_of(h.id)) {
      EXPECT_EQ(t.fine(f).parent, h.id);
      ++seen[f];
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Taxonomy, MinimalConfig) {
  const auto t = load_taxonomy(std::string_view(kMinimal));
  ASSERT_EQ(t.high_classes().size(), 1u);
  ASSERT_EQ(t.fine_classes().size(), 1u);
  const auto& kids = t.fine_classes_of(t.high_id("top"));
  ASSERT_EQ(kids.size(), 1u);
  EXPECT_EQ(t.fine(kids[0]).name, "t-shirt");
}

TEST(Taxonomy, DanglingParentRejected) {
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view(
                        R"({"high_classes":[{"name":"top"}],
                            "fine_classes":[{"name":"t-shirt","parent":"hat"}]})")),
                    ErrorKind::kData);
}

TEST(Taxonomy, DuplicateNamesRejected) {
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view(
                        R"({"high_classes":[{"name":"top"},{"name":"top"}],
                            "fine_classes":[]})")),
                    ErrorKind::kData);
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view(
                        R"({"high_classes":[{"name":"top"}],
                            "fine_classes":[{"name":"a","parent":"top"},{"name":"a","parent":"top"}]})")),
                    ErrorKind::kData);
}

TEST(Taxonomy, PersonClassCannotHaveChildren) {
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view(
                        R"({"high_classes":[{"name":"woman","person":true}],
                            "fine_classes":[{"name":"a","parent":"woman"}]})")),
                    ErrorKind::kData);
}

TEST(Taxonomy, MalformedDocumentRejected) {
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view("{")), ErrorKind::kData);
  EXPECT_ERROR_KIND(load_taxonomy(std::string_view(R"({"high_classes":[]})")), ErrorKind::kData);
}

TEST(Taxonomy, UnknownIdsAreErrors) {
  const auto t = load_taxonomy(std::string_view(kMinimal));
  EXPECT_ERROR_KIND(t.fine_classes_of(7), ErrorKind::kData);
  EXPECT_ERROR_KIND(t.fine(-1), ErrorKind::kData);
  EXPECT_ERROR_KIND(t.high_id("hat"), ErrorKind::kData);
  EXPECT_FALSE(t.find_fine("hat").has_value());
}

TEST(Taxonomy, JsonRoundTrip) {
  const auto t = default_taxonomy();
  EXPECT_EQ(load_taxonomy(to_json(t)), t);
}

TEST(Taxonomy, BundledFileMatchesDefault) {
  std::ifstream in(STSEARCH_DATA_DIR "/taxonomy.json");
  ASSERT_TRUE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(load_taxonomy(std::string_view(ss.str())), default_taxonomy());
}

TEST(Taxonomy, LocalIndexFollowsChildOrder) {
  const auto t = default_taxonomy();
  const auto& kids = t.fine_classes_of(t.high_id("footwear"));
  for (std::size_t i = 0; i < kids.size(); ++i) EXPECT_EQ(t.local_index(kids[i]), int(i));
}

TEST(Taxonomy, PersonGenders) {
  const auto t = default_taxonomy();
  EXPECT_EQ(t.person_gender(t.high_id("woman")), Gender::kWoman);
  EXPECT_EQ(t.person_gender(t.high_id("man")), Gender::kMan);
  EXPECT_EQ(t.person_gender(t.high_id("boy")), Gender::kBoy);
  EXPECT_EQ(t.person_gender(t.high_id("girl")), Gender::kGirl);
  EXPECT_EQ(t.person_gender(t.high_id("top")), Gender::kUnknown);
}

TEST(Taxonomy, GenderStringsRoundTrip) {
  for (Gender g : kStoredGenders) EXPECT_EQ(parse_gender(to_string(g)), g);
  EXPECT_EQ(parse_gender("unknown"), Gender::kUnknown);
  EXPECT_FALSE(parse_gender("robot").has_value());
}
