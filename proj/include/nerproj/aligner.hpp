#pragma once

// IBM Model 1 lexical translation trained with EM, Viterbi link extraction,
// symmetrization by intersection and per-pair alignment quality scores.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerproj/corpus_io.hpp"

namespace nerproj {

// SrcToTgt models t(tgt word | src word): every target word picks one source
// word (or NULL). TgtToSrc models t(src word | tgt word).
enum class Direction : std::uint8_t { SrcToTgt, TgtToSrc };

std::string_view to_string(Direction d);

struct EmConfig {
  int iterations = 5;
  double prob_floor = 1e-12;
  bool use_null = true;
  std::size_t max_vocabulary = 10'000'000;  // per side
  unsigned jobs = 1;

  void check() const;  // throws UsageError
};

class Vocabulary {
 public:
  // Returns the id of `word`, adding it if new.
  std::uint32_t intern(std::string_view word);
  // kUnknown when absent.
  std::uint32_t lookup(std::string_view word) const;
  const std::string& word(std::uint32_t id) const { return words_[id]; }
  std::size_t size() const { return words_.size(); }

  static constexpr std::uint32_t kUnknown = 0xffffffffu;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Sparse row-stochastic table t(emit | cond). Rows are conditioning words;
// when NULL is enabled it is conditioning id 0 and has the empty string as
// its spelling. Entries exist for co-occurring pairs only.
class TranslationTable {
 public:
  static constexpr std::uint32_t kNullId = 0;

  Direction direction() const { return direction_; }
  bool use_null() const { return use_null_; }
  const Vocabulary& cond_vocab() const { return cond_vocab_; }
  const Vocabulary& emit_vocab() const { return emit_vocab_; }

  // 0 when either word is unknown or the pair never co-occurred.
  double prob(std::uint32_t cond, std::uint32_t emit) const;
  double prob(std::string_view cond, std::string_view emit) const;
  double null_prob(std::string_view emit) const;

  // Sum of a row; 1 within rounding for every row of a trained table.
  double row_sum(std::uint32_t cond) const;
  std::size_t num_rows() const { return row_offset_.empty() ? 0 : row_offset_.size() - 1; }
  std::size_t num_entries() const { return probs_.size(); }

  // Corpus log-likelihood under the initial table and after each iteration:
  // iterations + 1 values.
  const std::vector<double>& log_likelihood() const { return log_likelihood_; }

  // Header line then "cond<TAB>emit<TAB>prob" lines sorted by (cond, emit).
  void save(std::ostream& out) const;
  static TranslationTable load(std::istream& in);

 private:
  friend class Ibm1Trainer;

  Direction direction_ = Direction::SrcToTgt;
  bool use_null_ = true;
  Vocabulary cond_vocab_;
  Vocabulary emit_vocab_;
  // CSR layout: row r covers [row_offset_[r], row_offset_[r + 1]) of cols_/probs_,
  // cols_ sorted within a row.
  std::vector<std::size_t> row_offset_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> probs_;
  std::vector<double> log_likelihood_;

  std::size_t slot(std::uint32_t cond, std::uint32_t emit) const;  // npos when absent
};

// Throws DataError on an empty corpus or when a vocabulary exceeds the cap.
TranslationTable train_ibm1(const std::vector<SentencePair>& corpus, Direction direction,
                            const EmConfig& config = {});

// Each emitted-side word links to its highest-probability conditioning word,
// ties going to the lowest conditioning index. The word stays unaligned when
// NULL is strictly more probable than every real word, or when it is unknown.
// Links are returned in (src, tgt) orientation with t attached.
AlignmentLinks align_viterbi(const TranslationTable& table, const SentencePair& pair);

// forward ∩ backward, both in (src, tgt) orientation. Probabilities are taken
// from the forward links.
AlignmentLinks symmetrize_intersection(const AlignmentLinks& forward,
                                       const AlignmentLinks& backward);

// Swaps src and tgt of every link.
AlignmentLinks transpose(const AlignmentLinks& links);

// exp(sum(log p) / n) with n the target token count; 0 without links.
// Throws DataError if a link carries no probability.
double quality_score(const SentencePair& pair, const AlignmentLinks& links);

}  // namespace nerproj
