#include "nerproj/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace nerproj {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_parallel(const std::vector<LabeledSentence>& a, const std::vector<LabeledSentence>& b,
                    bool same_tokens) {
  if (a.size() != b.size()) {
    throw DataError("corpora differ in sentence count: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].id != b[k].id) {
      throw DataError("sentence id mismatch at position " + std::to_string(k + 1) + ": " +
                      a[k].id + " vs " + b[k].id);
    }
    if (a[k].tokens.size() != b[k].tokens.size() || (same_tokens && a[k].tokens != b[k].tokens)) {
      throw DataError("sentence " + a[k].id + ": tokenization differs");
    }
    if (a[k].tags.size() != a[k].tokens.size() || b[k].tags.size() != b[k].tokens.size()) {
      throw DataError("sentence " + a[k].id + ": tag count differs from token count");
    }
  }
}

}  // namespace

double SpanCounts::precision() const { return ratio(true_positive, true_positive + false_positive); }
double SpanCounts::recall() const { return ratio(true_positive, true_positive + false_negative); }

double SpanCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

SpanCounts& SpanCounts::operator+=(const SpanCounts& o) {
  true_positive += o.true_positive;
  false_positive += o.false_positive;
  false_negative += o.false_negative;
  return *this;
}

EvalReport span_f1(const std::vector<LabeledSentence>& gold,
                   const std::vector<LabeledSentence>& pred) {
  check_parallel(gold, pred, false);
  EvalReport report;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    const auto gold_spans = spans_from_iob(gold[k].tags);
    const auto pred_spans = spans_from_iob(pred[k].tags);
    for (const auto& p : pred_spans) {
      auto& counts = report.per_type[static_cast<std::size_t>(p.etype)];
      const bool hit = std::find(gold_spans.begin(), gold_spans.end(), p) != gold_spans.end();
      ++(hit ? counts.true_positive : counts.false_positive);
    }
    for (const auto& g : gold_spans) {
      if (std::find(pred_spans.begin(), pred_spans.end(), g) == pred_spans.end()) {
        ++report.per_type[static_cast<std::size_t>(g.etype)].false_negative;
      }
    }
  }
  for (const auto& counts : report.per_type) report.overall += counts;
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %9s\n", "", "Precision", "Recall", "F1",
                "Support");
  out << line;
  auto row = [&](const char* name, const SpanCounts& c) {
    std::snprintf(line, sizeof line, "%-8s %9.2f %9.2f %9.2f %9zu\n", name, 100.0 * c.precision(),
                  100.0 * c.recall(), 100.0 * c.f1(), c.support());
    out << line;
  };
  for (auto t : kEntityTypes) row(std::string(to_string(t)).c_str(), report.of(t));
  row("Overall", report.overall);
  return out.str();
}

std::string report_key_values(const EvalReport& report) {
  std::ostringstream out;
  auto emit = [&](const std::string& name, const SpanCounts& c) {
    out << name << ".tp=" << c.true_positive << '\n'
        << name << ".fp=" << c.false_positive << '\n'
        << name << ".fn=" << c.false_negative << '\n'
        << name << ".support=" << c.support() << '\n'
        << name << ".precision=" << format_probability(c.precision()) << '\n'
        << name << ".recall=" << format_probability(c.recall()) << '\n'
        << name << ".f1=" << format_probability(c.f1()) << '\n';
  };
  for (auto t : kEntityTypes) emit(std::string(to_string(t)), report.of(t));
  emit("overall", report.overall);
  return out.str();
}

AgreementReport cohens_kappa(const std::vector<LabeledSentence>& first,
                             const std::vector<LabeledSentence>& second) {
  check_parallel(first, second, true);
  AgreementReport report;
  for (std::size_t k = 0; k < first.size(); ++k) {
    for (std::size_t i = 0; i < first[k].tags.size(); ++i) {
      ++report.contingency[first[k].tags[i].index()][second[k].tags[i].index()];
      ++report.tokens;
    }
  }
  if (report.tokens == 0) throw DataError("no tokens to compare");

  std::size_t agree = 0;
  std::size_t marginal_product = 0;
  for (std::size_t a = 0; a < kTagInventorySize; ++a) {
    agree += report.contingency[a][a];
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t b = 0; b < kTagInventorySize; ++b) {
      row += report.contingency[a][b];
      col += report.contingency[b][a];
    }
    marginal_product += row * col;
  }
  const double n = static_cast<double>(report.tokens);
  report.observed_agreement = static_cast<double>(agree) / n;
  report.expected_agreement = static_cast<double>(marginal_product) / (n * n);
  if (marginal_product == report.tokens * report.tokens) {
    report.degenerate = true;
    report.kappa = agree == report.tokens ? 1.0 : 0.0;
  } else {
    report.kappa = (report.observed_agreement - report.expected_agreement) /
                   (1.0 - report.expected_agreement);
  }
  return report;
}

std::string format_agreement(const AgreementReport& report) {
  std::ostringstream out;
  out << "# token-level Cohen's kappa over the IOB tag inventory\n"
      << "tokens=" << report.tokens << '\n'
      << "observed_agreement=" << format_probability(report.observed_agreement) << '\n'
      << "expected_agreement=" << format_probability(report.expected_agreement) << '\n'
      << "kappa=" << format_probability(report.kappa) << '\n'
      << "degenerate=" << (report.degenerate ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace nerproj
