#pragma once

// Exact-match span scoring and token-level Cohen's kappa.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "nerproj/corpus_io.hpp"

namespace nerproj {

struct SpanCounts {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  std::size_t support() const { return true_positive + false_negative; }
  double precision() const;
  double recall() const;
  double f1() const;  // 2PR/(P+R), 0 when P+R == 0

  SpanCounts& operator+=(const SpanCounts& o);
  friend bool operator==(const SpanCounts&, const SpanCounts&) = default;
};

struct EvalReport {
  std::array<SpanCounts, 3> per_type{};  // indexed by EntityType
  SpanCounts overall;                    // micro-average: sum of per_type

  const SpanCounts& of(EntityType t) const { return per_type[static_cast<std::size_t>(t)]; }
};

// A predicted span counts only when (type, start, end) matches a gold span of
// the same sentence. Sentences are matched by position and must agree in id
// and token count; throws DataError naming the first offending sentence.
EvalReport span_f1(const std::vector<LabeledSentence>& gold,
                   const std::vector<LabeledSentence>& pred);

// Rows PER, LOC, ORG, Overall with P, R, F1 (percent) and support.
std::string format_report(const EvalReport& report);
// "type.metric=value" lines; counts are integers, scores printed with 17 digits.
std::string report_key_values(const EvalReport& report);

struct AgreementReport {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t tokens = 0;
  bool degenerate = false;  // expected agreement == 1
  // contingency[a][b]: tokens tagged a by the first and b by the second
  // annotator, indices per Tag::index().
  std::array<std::array<std::size_t, kTagInventorySize>, kTagInventorySize> contingency{};
};

// Token-level kappa over the 7-tag IOB inventory including O. When expected
// agreement is 1 the statistic is 0/0; it is reported as 1 for identical
// annotations and 0 otherwise, with `degenerate` set. Throws DataError when
// the two annotations differ in tokenization or contain no tokens.
AgreementReport cohens_kappa(const std::vector<LabeledSentence>& first,
                             const std::vector<LabeledSentence>& second);

std::string format_agreement(const AgreementReport& report);

}  // namespace nerproj
