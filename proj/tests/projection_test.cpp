#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "nerproj/projection.hpp"
#include "soren_fixture.hpp"
#include "test_support.hpp"

using namespace nerproj;

namespace {

DirectionalMapping mapping(std::size_t domain, std::size_t codomain,
                           const std::vector<std::pair<std::size_t, std::vector<std::size_t>>>& entries) {
  DirectionalMapping m(domain, codomain);
  for (const auto& [key, values] : entries)
    for (auto v : values) m.add(key, v);
  return m;
}

ProjectionInput soren_input() {
  const auto pair = testing::soren_pair();
  return {pair, testing::soren_english_spans(),
          mapping_from_links(testing::soren_forward_links(), 5, 7, KeySide::Source),
          mapping_from_links(testing::soren_backward_links(), 5, 7, KeySide::Target)};
}

DirectionalMapping random_mapping(std::mt19937_64& rng) {
  const auto domain = testing::uniform(rng, 12);
  const auto codomain = 1 + testing::uniform(rng, 12);
  DirectionalMapping m(domain, codomain);
  for (std::size_t k = 0; k < domain; ++k) {
    const auto n = testing::uniform(rng, 4);
    for (std::size_t i = 0; i < n; ++i) m.add(k, testing::uniform(rng, codomain));
  }
  return m;
}

}  // namespace

TEST_CASE("reverse_mapping") {
  const auto backward = mapping(7, 5, {{0, {0}}, {2, {1, 2}}, {3, {3}}, {4, {4}}});
  const auto expected = mapping(5, 7, {{0, {0}}, {1, {2}}, {2, {2}}, {3, {3}}, {4, {4}}});
  CHECK(reverse_mapping(backward) == expected);
  CHECK(reverse_mapping(DirectionalMapping{}) == DirectionalMapping{});

  std::mt19937_64 rng(41);
  for (int round = 0; round < 500; ++round) {
    const auto m = random_mapping(rng);
    const auto r = reverse_mapping(m);
    CHECK(r.num_links() == m.num_links());
    CHECK(reverse_mapping(r) == m);
  }
}

TEST_CASE("intersect_mappings") {
  const auto a = mapping(5, 7, {{4, {4, 5, 6}}});
  const auto b = mapping(5, 7, {{4, {4}}});
  CHECK(intersect_mappings(a, b) == b);
  CHECK(intersect_mappings(a, a) == a);

  const auto c = mapping(5, 7, {{4, {0, 1}}, {2, {3}}});
  const auto none = intersect_mappings(a, c);
  CHECK(none.domain() == 5);
  CHECK(none.num_links() == 0);

  CHECK_THROWS_AS(intersect_mappings(a, DirectionalMapping(5, 6)), DataError);
}

TEST_CASE("mapping helpers reject and round-trip") {
  DirectionalMapping m(2, 3);
  CHECK_THROWS_AS(m.add(2, 0), DataError);
  CHECK_THROWS_AS(m.add(0, 3), DataError);
  CHECK_THROWS_AS(mapping_from_links(testing::links_of({{5, 0}}), 5, 7, KeySide::Source), DataError);

  std::mt19937_64 rng(43);
  for (int round = 0; round < 200; ++round) {
    auto [links, s, t] = testing::random_links(rng);
    for (auto side : {KeySide::Source, KeySide::Target}) {
      CHECK(links_from_mapping(mapping_from_links(links, s, t, side), side) == links);
    }
    CHECK(reverse_mapping(mapping_from_links(links, s, t, KeySide::Source)) ==
          mapping_from_links(links, s, t, KeySide::Target));
  }
}

TEST_CASE("projection mode names") {
  CHECK(projection_mode_from_string("forward_only") == ProjectionMode::ForwardOnly);
  CHECK(projection_mode_from_string("intersected") == ProjectionMode::Intersected);
  CHECK(to_string(ProjectionMode::Intersected) == "intersected");
  CHECK_THROWS_AS(projection_mode_from_string("union"), UsageError);
}

TEST_CASE("Soren pair: forward links drag the photo credit into PER") {
  const auto result = project_spans(soren_input(), ProjectionMode::ForwardOnly);
  const std::vector<EntitySpan> expected = {{EntityType::LOC, 0, 0}, {EntityType::PER, 3, 6}};
  CHECK(spans_from_iob(result.labeled.tags) == expected);
  CHECK(result.dropped_spans.empty());
  CHECK(result.labeled.tokens == testing::soren_pair().tgt_tokens);
}

TEST_CASE("Soren pair: intersection restores the correct PER span") {
  const auto result = project_spans(soren_input(), ProjectionMode::Intersected);
  const std::vector<EntitySpan> expected = {{EntityType::LOC, 0, 0}, {EntityType::PER, 3, 4}};
  CHECK(spans_from_iob(result.labeled.tags) == expected);
  CHECK(result.mapping_used.at(4) == std::vector<std::size_t>{4});
  CHECK(result.mapping_used.at(1).empty());
}

TEST_CASE("unaligned span is dropped, others survive") {
  auto input = soren_input();
  input.english2indic = mapping(5, 7, {{0, {0}}});
  const auto result = project_spans(input, ProjectionMode::ForwardOnly);
  CHECK(spans_from_iob(result.labeled.tags) == std::vector<EntitySpan>{{EntityType::LOC, 0, 0}});
  REQUIRE(result.dropped_spans.size() == 1);
  CHECK(result.dropped_spans[0].reason == DropReason::Unaligned);
  CHECK(result.dropped_spans[0].span == EntitySpan{EntityType::PER, 3, 4});
}

TEST_CASE("partially aligned name covers the unaligned middle word") {
  const SentencePair pair{"7",
                          {"Union", "minister", "Shri", "Ravi", "Shankar", "Prasad"},
                          {"केंद्रीय", "मंत्री", "श्री", "x", "y", "रवि", "शंकर", "प्रसाद"}};
  ProjectionInput input{pair, {{EntityType::PER, 3, 5}},
                        mapping(6, 8, {{3, {5}}, {5, {7}}}), DirectionalMapping(8, 6)};
  const auto result = project_spans(input, ProjectionMode::ForwardOnly);
  CHECK(spans_from_iob(result.labeled.tags) == std::vector<EntitySpan>{{EntityType::PER, 5, 7}});
}

TEST_CASE("colliding projections: the earlier source span wins") {
  const SentencePair pair{"9", {"A", "B", "C", "D"}, {"w", "x", "y"}};
  ProjectionInput input{pair,
                        {{EntityType::ORG, 2, 3}, {EntityType::PER, 0, 0}},
                        mapping(4, 3, {{0, {1}}, {2, {0}}, {3, {2}}}), DirectionalMapping(3, 4)};
  const auto result = project_spans(input, ProjectionMode::ForwardOnly);
  CHECK(spans_from_iob(result.labeled.tags) == std::vector<EntitySpan>{{EntityType::PER, 1, 1}});
  REQUIRE(result.dropped_spans.size() == 1);
  CHECK(result.dropped_spans[0].reason == DropReason::Overlap);
  CHECK(result.dropped_spans[0].span.etype == EntityType::ORG);
}

TEST_CASE("adjacent same-type entities stay distinct") {
  const SentencePair pair{"3", {"A", "B"}, {"x", "y"}};
  ProjectionInput input{pair, {{EntityType::PER, 0, 0}, {EntityType::PER, 1, 1}},
                        mapping(2, 2, {{0, {0}}, {1, {1}}}), DirectionalMapping(2, 2)};
  const auto result = project_spans(input, ProjectionMode::ForwardOnly);
  CHECK(spans_from_iob(result.labeled.tags).size() == 2);
  CHECK(to_string(result.labeled.tags[1]) == "B-PER");
}

TEST_CASE("project_spans rejects mismatched shapes") {
  auto input = soren_input();
  input.english2indic = DirectionalMapping(5, 6);
  CHECK_THROWS_AS(project_spans(input, ProjectionMode::ForwardOnly), DataError);
}

TEST_CASE("projection invariants on random instances") {
  std::mt19937_64 rng(47);
  for (int round = 0; round < 500; ++round) {
    auto [fwd, s, t] = testing::random_links(rng);
    auto [bwd_raw, s2, t2] = testing::random_links(rng);
    AlignmentLinks bwd;
    for (const auto& l : bwd_raw) bwd.insert({l.src % s, l.tgt % t, std::nullopt});
    SentencePair pair{"r", std::vector<std::string>(s, "e"), std::vector<std::string>(t, "i")};
    const auto spans = testing::random_spans(rng, s);
    ProjectionInput input{pair, spans, mapping_from_links(fwd, s, t, KeySide::Source),
                          mapping_from_links(bwd, s, t, KeySide::Target)};
    const auto forward = project_spans(input, ProjectionMode::ForwardOnly);
    const auto both = project_spans(input, ProjectionMode::Intersected);
    for (const auto* r : {&forward, &both}) {
      CHECK(is_iob_valid(r->labeled.tags));
      CHECK(spans_from_iob(r->labeled.tags).size() + r->dropped_spans.size() == spans.size());
    }
    for (std::size_t k = 0; k < s; ++k) {
      for (auto v : both.mapping_used.at(k)) CHECK(forward.mapping_used.contains(k, v));
    }
  }
}

TEST_CASE("monotone bijection projects by index substitution") {
  std::mt19937_64 rng(53);
  for (int round = 0; round < 200; ++round) {
    const auto s = 1 + testing::uniform(rng, 20);
    const auto t = s + testing::uniform(rng, 10);
    std::vector<std::size_t> positions(t);
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(s);
    std::sort(positions.begin(), positions.end());
    AlignmentLinks links;
    for (std::size_t k = 0; k < s; ++k) links.insert({k, positions[k], std::nullopt});
    SentencePair pair{"m", std::vector<std::string>(s, "e"), std::vector<std::string>(t, "i")};
    const auto spans = testing::random_spans(rng, s);
    ProjectionInput input{pair, spans, mapping_from_links(links, s, t, KeySide::Source),
                          mapping_from_links(links, s, t, KeySide::Target)};
    std::vector<EntitySpan> expected;
    for (const auto& sp : spans) expected.push_back({sp.etype, positions[sp.start], positions[sp.end]});
    CHECK(spans_from_iob(project_spans(input, ProjectionMode::Intersected).labeled.tags) == expected);
  }
}

TEST_CASE("project_corpus") {
  const auto pair = testing::soren_pair();
  const auto english = testing::soren_english();
  CHECK(project_corpus({}, {}, {}, {}, ProjectionMode::Intersected).results.empty());

  const auto corpus = project_corpus({pair, pair}, {english, english},
                                     {testing::soren_forward_links(), testing::soren_forward_links()},
                                     {testing::soren_backward_links(), testing::soren_backward_links()},
                                     ProjectionMode::Intersected, 2);
  REQUIRE(corpus.results.size() == 2);
  CHECK(spans_from_iob(corpus.results[1].labeled.tags) ==
        std::vector<EntitySpan>{{EntityType::LOC, 0, 0}, {EntityType::PER, 3, 4}});
  CHECK(corpus.stats.source_spans == 4);
  CHECK(corpus.stats.projected_spans == 4);

  auto renamed = english;
  renamed.id = "2";
  CHECK_THROWS_WITH_AS(project_corpus({pair}, {renamed}, {AlignmentLinks{}}, {AlignmentLinks{}},
                                      ProjectionMode::ForwardOnly),
                       doctest::Contains("pair 1"), DataError);
  CHECK_THROWS_AS(project_corpus({pair}, {}, {}, {}, ProjectionMode::ForwardOnly), DataError);
}

TEST_CASE("drop log lists every dropped span") {
  const auto pair = testing::soren_pair();
  const auto corpus = project_corpus({pair}, {testing::soren_english()},
                                     {testing::links_of({{0, 0}})}, {AlignmentLinks{}},
                                     ProjectionMode::ForwardOnly);
  CHECK(corpus.stats.unaligned == 1);
  CHECK(write_drop_log(corpus) == "1\tPER\t3\t4\tunaligned\n");
}
