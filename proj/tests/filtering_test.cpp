#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nerproj/filtering.hpp"
#include "test_support.hpp"

using namespace nerproj;

namespace {

std::vector<ScoredSentence> scored_corpus(std::mt19937_64& rng, std::size_t n, int score_levels) {
  std::vector<ScoredSentence> out;
  for (auto& s : testing::random_corpus(rng, n)) {
    const double score = static_cast<double>(testing::uniform(rng, score_levels)) / score_levels;
    out.push_back(make_scored(std::move(s), score));
  }
  return out;
}

// Stable sort by descending score, take the head, restore input order.
std::vector<std::string> sort_oracle(const std::vector<ScoredSentence>& corpus, std::size_t k) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return corpus[a].score > corpus[b].score; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<std::string> ids;
  for (auto i : order) ids.push_back(corpus[i].sentence.id);
  return ids;
}

std::vector<std::string> ids_of(const std::vector<ScoredSentence>& corpus) {
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.sentence.id);
  return ids;
}

LabeledSentence plain(std::string id, std::size_t n, bool entity) {
  LabeledSentence s{std::move(id), std::vector<std::string>(n, "w"), TagSequence(n, Tag::outside())};
  if (entity) s.tags[0] = Tag::begin(EntityType::ORG);
  return s;
}

}  // namespace

TEST_CASE("make_scored") {
  CHECK(make_scored(plain("1", 3, true), 0.5).has_entity);
  CHECK_FALSE(make_scored(plain("1", 3, false), 0.5).has_entity);
  CHECK_THROWS_AS(make_scored(plain("1", 3, false), 1.5), DataError);
  CHECK_THROWS_AS(make_scored(plain("1", 3, false), -0.1), DataError);
}

TEST_CASE("unit_interval stays in [0, 1)") {
  CHECK(unit_interval(0) == 0.0);
  CHECK(unit_interval(~std::uint64_t{0}) < 1.0);
  CHECK(unit_interval(std::uint64_t{1} << 63) == 0.5);
}

TEST_CASE("top_fraction_count") {
  CHECK(top_fraction_count(0.35, 100) == 35);
  CHECK(top_fraction_count(0.35, 101) == 36);
  CHECK(top_fraction_count(0.1, 10) == 1);
  CHECK(top_fraction_count(0.7, 10) == 7);
  CHECK(top_fraction_count(1.0, 9) == 9);
  CHECK(top_fraction_count(0.0, 9) == 0);
  CHECK(top_fraction_count(0.5, 0) == 0);
}

TEST_CASE("filter_top_fraction matches a sort-based oracle") {
  std::mt19937_64 rng(59);
  for (int levels : {3, 50, 1000000}) {
    const auto corpus = scored_corpus(rng, 3000, levels);
    for (double f : {0.0, 0.01, 0.35, 0.5, 0.999, 1.0}) {
      const auto kept = filter_top_fraction(corpus, f);
      CHECK(kept.size() == top_fraction_count(f, corpus.size()));
      CHECK(ids_of(kept) == sort_oracle(corpus, kept.size()));
    }
  }
  CHECK(filter_top_fraction({}, 0.35).empty());
  CHECK_THROWS_AS(filter_top_fraction({}, 1.5), UsageError);
}

TEST_CASE("ties are broken toward earlier sentences") {
  std::vector<ScoredSentence> corpus;
  for (int k = 0; k < 4; ++k) corpus.push_back(make_scored(plain(std::to_string(k), 1, false), 0.5));
  CHECK(ids_of(filter_top_fraction(corpus, 0.5)) == std::vector<std::string>{"0", "1"});
}

TEST_CASE("downsample_no_entity") {
  std::vector<ScoredSentence> corpus;
  for (int k = 0; k < 20000; ++k) {
    corpus.push_back(make_scored(plain(std::to_string(k), 2, k % 2 == 0), 0.5));
  }
  const auto kept = downsample_no_entity(corpus, 0.01, 7);
  std::size_t entity = 0, free = 0;
  for (const auto& s : kept) (s.has_entity ? entity : free)++;
  CHECK(entity == 10000);
  const double mean = 100.0, sigma = std::sqrt(10000 * 0.01 * 0.99);
  CHECK(std::abs(static_cast<double>(free) - mean) <= 3 * sigma);

  // Same draws as an explicit replay of the generator.
  std::mt19937_64 rng(7);
  std::vector<std::string> expected;
  for (const auto& s : corpus) {
    if (s.has_entity || unit_interval(rng()) < 0.01) expected.push_back(s.sentence.id);
  }
  CHECK(ids_of(kept) == expected);

  CHECK(ids_of(downsample_no_entity(corpus, 0.01, 7)) == ids_of(kept));
  CHECK(ids_of(downsample_no_entity(corpus, 0.0, 7)).size() == 10000);
  CHECK(downsample_no_entity(corpus, 1.0, 7).size() == corpus.size());
  CHECK_THROWS_AS(downsample_no_entity(corpus, -0.5, 7), UsageError);
}

TEST_CASE("corpus_stats") {
  const std::vector<LabeledSentence> corpus = {
      {"1", {"a", "b", "c"},
       {Tag::begin(EntityType::PER), Tag::inside(EntityType::PER), Tag::begin(EntityType::LOC)}},
      {"2", {"a"}, {Tag::outside()}},
      {"3", {"a", "b"}, {Tag::begin(EntityType::ORG), Tag::begin(EntityType::ORG)}}};
  const auto stats = corpus_stats(corpus);
  CHECK(stats.sentences == 3);
  CHECK(stats.tokens == 6);
  CHECK(stats.entity_free_sentences == 1);
  CHECK(stats.entity_count(EntityType::PER) == 1);
  CHECK(stats.entity_count(EntityType::LOC) == 1);
  CHECK(stats.entity_count(EntityType::ORG) == 2);
  CHECK(stats.total_entities() == 4);

  auto sum = corpus_stats({corpus[0]});
  sum += corpus_stats({corpus[1], corpus[2]});
  CHECK(sum == stats);

  const auto table = stats_table({{"train", stats}});
  CHECK(table.find("Sentences") != std::string::npos);
  CHECK(table.find("No-entity") != std::string::npos);
  const auto kv = stats_key_values({{"train", stats}});
  CHECK(kv.find("train.sentences=3\n") != std::string::npos);
}

TEST_CASE("shuffle_split") {
  std::mt19937_64 rng(61);
  const auto corpus = testing::random_corpus(rng, 1000);
  const auto splits = shuffle_split(corpus, {0.8, 0.1, 0.1}, 11);
  CHECK(splits.train.size() == 800);
  CHECK(splits.dev.size() == 100);
  CHECK(splits.test.size() == 100);

  // Partition of the input.
  std::vector<std::string> all;
  for (const auto* part : {&splits.train, &splits.dev, &splits.test})
    for (const auto& s : *part) all.push_back(s.id);
  std::sort(all.begin(), all.end());
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  CHECK(all == ids);

  const auto again = shuffle_split(corpus, {0.8, 0.1, 0.1}, 11);
  CHECK(again.train == splits.train);
  CHECK(again.dev == splits.dev);
  CHECK(again.test == splits.test);
  CHECK(shuffle_split(corpus, {0.8, 0.1, 0.1}, 12).dev != splits.dev);

  CorpusStats total = corpus_stats(splits.train);
  total += corpus_stats(splits.dev);
  total += corpus_stats(splits.test);
  CHECK(total == corpus_stats(corpus));

  const auto defaults = shuffle_split(corpus, {}, 1);
  CHECK(defaults.dev.size() == 10);
  CHECK(defaults.test.size() == 10);

  CHECK_THROWS_AS(shuffle_split(corpus, {0.5, 0.1, 0.1}, 1), UsageError);
  CHECK(shuffle_split({}, {}, 1).train.empty());
}

TEST_CASE("FilterConfig::check") {
  FilterConfig c;
  CHECK_NOTHROW(c.check());
  c.keep_fraction = 0.0;
  CHECK_THROWS_AS(c.check(), UsageError);
  c.keep_fraction = 1.01;
  CHECK_THROWS_AS(c.check(), UsageError);
  c = {};
  c.no_entity_rate = 2;
  CHECK_THROWS_AS(c.check(), UsageError);
}
