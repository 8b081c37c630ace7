#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ibm1_oracle.hpp"
#include "nerproj/aligner.hpp"
#include "test_support.hpp"

using namespace nerproj;

namespace {

void check_row_stochastic(const TranslationTable& table) {
  for (std::uint32_t r = 0; r < table.num_rows(); ++r) {
    CHECK(std::abs(table.row_sum(r) - 1.0) <= 1e-9);
  }
}

void check_monotone(const std::vector<double>& ll) {
  for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-9);
}

std::vector<SentencePair> random_bitext(std::mt19937_64& rng, std::size_t n) {
  std::vector<SentencePair> pairs;
  for (std::size_t k = 0; k < n; ++k) {
    SentencePair p{std::to_string(k + 1), {}, {}};
    const auto len = 1 + rng() % 8;
    for (std::size_t i = 0; i < len; ++i) {
      const auto w = rng() % 30;
      p.src_tokens.push_back("s" + std::to_string(w));
      if (rng() % 5) p.tgt_tokens.push_back("t" + std::to_string((w * 7) % 30));
    }
    if (rng() % 3 == 0) p.tgt_tokens.push_back("x" + std::to_string(rng() % 4));
    if (p.tgt_tokens.empty()) p.tgt_tokens.push_back("t0");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

TEST_CASE("toy corpus: t(das|the) dominates after 10 iterations") {
  EmConfig config;
  config.iterations = 10;
  const auto table = train_ibm1(testing::toy_corpus(), Direction::SrcToTgt, config);
  CHECK(table.prob("the", "das") > 0.9);
  CHECK(table.prob("the", "das") > table.prob("the", "haus"));
  check_row_stochastic(table);
  check_monotone(table.log_likelihood());
  CHECK(table.log_likelihood().size() == 11);
}

TEST_CASE("trainer matches the dense EM oracle iteration by iteration") {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<SentencePair>> corpora = {testing::toy_corpus(),
                                                          random_bitext(rng, 40)};
  for (const auto& corpus : corpora) {
    for (bool use_null : {false, true}) {
      const auto oracle = testing::dense_ibm1(testing::as_src_tgt(corpus), 10, use_null);
      for (int k = 1; k <= 10; ++k) {
        EmConfig config;
        config.iterations = k;
        config.use_null = use_null;
        const auto table = train_ibm1(corpus, Direction::SrcToTgt, config);
        const auto& ref = oracle[static_cast<std::size_t>(k - 1)];
        double worst = 0.0;
        for (const auto& [key, p] : ref.t) {
          const auto& [cond, emit] = key;
          const double got = cond == "<NULL>" ? table.null_prob(emit) : table.prob(cond, emit);
          // Non-co-occurring entries are zero in the oracle and absent in the table.
          worst = std::max(worst, std::abs(got - (p < 1e-12 && got == 0.0 ? 0.0 : p)));
        }
        CHECK(worst <= 1e-9);
        REQUIRE(table.log_likelihood().size() == ref.log_likelihood.size());
        for (std::size_t i = 0; i < ref.log_likelihood.size(); ++i) {
          CHECK(table.log_likelihood()[i] == doctest::Approx(ref.log_likelihood[i]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("single pair without NULL is forced to probability one") {
  EmConfig config;
  config.use_null = false;
  const auto table = train_ibm1({{"1", {"a"}, {"x"}}}, Direction::SrcToTgt, config);
  CHECK(table.prob("a", "x") == 1.0);
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train_ibm1({}, Direction::SrcToTgt), DataError);
  EmConfig capped;
  capped.max_vocabulary = 3;
  CHECK_THROWS_AS(train_ibm1({{"1", {"a", "b", "c", "d"}, {"x"}}}, Direction::SrcToTgt, capped),
                  DataError);
  EmConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(train_ibm1(testing::toy_corpus(), Direction::SrcToTgt, bad), UsageError);
  bad = {};
  bad.prob_floor = 0.01;
  CHECK_THROWS_AS(train_ibm1(testing::toy_corpus(), Direction::SrcToTgt, bad), UsageError);
}

TEST_CASE("EM invariants on random corpora, both directions") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 5; ++round) {
    const auto corpus = random_bitext(rng, 200);
    for (auto dir : {Direction::SrcToTgt, Direction::TgtToSrc}) {
      EmConfig config;
      config.iterations = 8;
      const auto table = train_ibm1(corpus, dir, config);
      check_row_stochastic(table);
      check_monotone(table.log_likelihood());
    }
  }
}

TEST_CASE("training is bit-identical regardless of worker count") {
  std::mt19937_64 rng(23);
  const auto corpus = random_bitext(rng, 2000);
  EmConfig one;
  one.jobs = 1;
  EmConfig many;
  many.jobs = 7;
  std::ostringstream a, b;
  train_ibm1(corpus, Direction::SrcToTgt, one).save(a);
  train_ibm1(corpus, Direction::SrcToTgt, many).save(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("table save/load round-trip") {
  std::mt19937_64 rng(29);
  const auto table = train_ibm1(random_bitext(rng, 100), Direction::TgtToSrc);
  std::ostringstream first;
  table.save(first);
  std::istringstream in(first.str());
  const auto loaded = TranslationTable::load(in);
  CHECK(loaded.direction() == Direction::TgtToSrc);
  CHECK(loaded.num_entries() == table.num_entries());
  std::ostringstream second;
  loaded.save(second);
  CHECK(first.str() == second.str());
  const auto pair = random_bitext(rng, 1)[0];
  CHECK(align_viterbi(loaded, pair) == align_viterbi(table, pair));

  std::istringstream bad("cond\temit\t0.5\n");
  CHECK_THROWS_AS(TranslationTable::load(bad), DataError);
  std::istringstream mismatch("#ibm1\tdirection=src2tgt\tnull=0\tcond_vocab=1\temit_vocab=1\tentries=2\na\tx\t1\n");
  CHECK_THROWS_AS(TranslationTable::load(mismatch), DataError);
}

TEST_CASE("align_viterbi on the toy corpus") {
  EmConfig config;
  config.iterations = 10;
  for (bool use_null : {true, false}) {
    config.use_null = use_null;
    const auto forward = train_ibm1(testing::toy_corpus(), Direction::SrcToTgt, config);
    const auto links = align_viterbi(forward, testing::toy_corpus()[0]);
    AlignmentLinks expected;
    expected.insert({0, 0, std::nullopt});
    expected.insert({1, 1, std::nullopt});
    CHECK(links == expected);
    CHECK(links.all_have_probability());
    CHECK(*links.find(0, 0)->prob == forward.prob("the", "das"));

    // Backward links come out in (src, tgt) orientation as well.
    const auto backward = train_ibm1(testing::toy_corpus(), Direction::TgtToSrc, config);
    CHECK(align_viterbi(backward, testing::toy_corpus()[0]) == expected);
  }
}

TEST_CASE("align_viterbi edge cases") {
  const auto table = train_ibm1(testing::toy_corpus(), Direction::SrcToTgt);
  CHECK(align_viterbi(table, {"oov", {"the"}, {"unseen", "words"}}).empty());

  // Symmetric counts tie between "a" and "b"; the lower index wins.
  EmConfig config;
  config.use_null = false;
  const auto tie = train_ibm1({{"1", {"a", "b"}, {"x"}}}, Direction::SrcToTgt, config);
  CHECK(tie.prob("a", "x") == tie.prob("b", "x"));
  const auto links = align_viterbi(tie, {"1", {"a", "b"}, {"x"}});
  REQUIRE(links.size() == 1);
  CHECK(links.links()[0].src == 0);
}

TEST_CASE("symmetrize_intersection") {
  AlignmentLinks forward, backward;
  for (auto [i, j] : {std::pair{0, 0}, {4, 4}, {4, 5}, {4, 6}}) forward.insert({std::size_t(i), std::size_t(j), 0.5});
  for (auto [i, j] : {std::pair{0, 0}, {4, 4}}) backward.insert({std::size_t(i), std::size_t(j), std::nullopt});
  const auto both = symmetrize_intersection(forward, backward);
  AlignmentLinks expected;
  expected.insert({0, 0, std::nullopt});
  expected.insert({4, 4, std::nullopt});
  CHECK(both == expected);
  CHECK(both.find(4, 4)->prob == 0.5);

  CHECK(symmetrize_intersection(forward, forward) == forward);
  AlignmentLinks disjoint;
  disjoint.insert({1, 1, std::nullopt});
  CHECK(symmetrize_intersection(forward, disjoint).empty());
}

TEST_CASE("intersection properties on random link sets") {
  std::mt19937_64 rng(31);
  for (int round = 0; round < 300; ++round) {
    auto [a, src_len, tgt_len] = testing::random_links(rng);
    AlignmentLinks b;
    for (int k = 0; k < 20; ++k) b.insert({rng() % src_len, rng() % tgt_len, std::nullopt});
    for (const auto& l : a) {
      if (rng() % 2) b.insert(l);
    }
    const auto ab = symmetrize_intersection(a, b);
    for (const auto& l : ab) {
      CHECK(a.contains(l.src, l.tgt));
      CHECK(b.contains(l.src, l.tgt));
    }
    // Orientation swap commutes with intersection.
    CHECK(transpose(ab) == symmetrize_intersection(transpose(b), transpose(a)));
    CHECK(symmetrize_intersection(ab, ab) == ab);
  }
}

TEST_CASE("quality_score") {
  const SentencePair pair{"p", {"a", "b"}, {"w", "x", "y", "z"}};
  AlignmentLinks ones;
  ones.insert({0, 0, 1.0});
  ones.insert({1, 3, 1.0});
  CHECK(quality_score(pair, ones) == 1.0);

  AlignmentLinks quarter;
  quarter.insert({0, 0, 0.25});
  quarter.insert({1, 1, 0.25});
  CHECK(quality_score(pair, quarter) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(quality_score(pair, AlignmentLinks{}) == 0.0);

  AlignmentLinks bare;
  bare.insert({0, 0, std::nullopt});
  CHECK_THROWS_AS(quality_score(pair, bare), DataError);
}

TEST_CASE("quality_score never drops when a link probability rises") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int round = 0; round < 200; ++round) {
    const SentencePair pair{"p", {"a", "b", "c"}, {"w", "x", "y", "z", "v"}};
    AlignmentLinks links;
    std::vector<Link> raw;
    for (std::size_t j = 0; j < 5; ++j) {
      if (rng() % 4 == 0) continue;
      raw.push_back({rng() % 3, j, u(rng)});
    }
    if (raw.empty()) continue;
    for (const auto& l : raw) links.insert(l);
    const double before = quality_score(pair, links);
    auto k = rng() % raw.size();
    raw[k].prob = std::min(1.0, *raw[k].prob * (1.0 + u(rng)));
    AlignmentLinks raised;
    for (const auto& l : raw) raised.insert(l);
    CHECK(quality_score(pair, raised) >= before);
  }
}
