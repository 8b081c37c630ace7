#pragma once

// End-to-end workflow: align -> project -> filter/split, plus stats and eval.
// Every step reads and writes only the files named by its config.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nerproj/aligner.hpp"
#include "nerproj/evaluation.hpp"
#include "nerproj/filtering.hpp"
#include "nerproj/projection.hpp"

namespace nerproj {

// Flat "key = value" settings; '#' starts a comment line. Keys use dashes;
// underscores are accepted and normalized.
using Settings = std::map<std::string, std::string>;

// Every recognised key, in documentation order.
const std::vector<std::string>& config_keys();

// Throws UsageError on syntax errors and unknown keys.
Settings parse_settings(std::string_view text);

struct PipelineConfig {
  std::filesystem::path workdir = ".";

  // Parallel corpus: one tab-separated bitext, or two line-aligned files.
  std::filesystem::path bitext;
  std::filesystem::path src;
  std::filesystem::path tgt;

  // Pre-tagged English CoNLL, or an external tagger command that reads one
  // space-tokenized sentence per line on stdin and writes CoNLL to stdout.
  std::filesystem::path english;
  std::string tagger_command;
  std::size_t tagger_batch = 10000;

  // "builtin" or "external". External alignments come from the two Pharaoh
  // files below, in (src, tgt) orientation.
  std::string alignments = "builtin";
  std::filesystem::path forward_alignments;
  std::filesystem::path backward_alignments;
  // Trained tables to align with; trained in memory when unset.
  std::filesystem::path forward_table;
  std::filesystem::path backward_table;

  EmConfig em;
  FilterConfig filter;
  ProjectionMode mode = ProjectionMode::Intersected;
  SplitRatios split;
  unsigned jobs = 1;

  // Inputs of filter-split; default to the project/align outputs in workdir.
  std::filesystem::path projected;
  std::filesystem::path scores;

  std::filesystem::path out(const std::string& name) const { return workdir / name; }
  std::filesystem::path projected_path() const;
  std::filesystem::path scores_path() const;
};

// Layers `overrides` over `base`, then converts. Throws UsageError.
PipelineConfig make_config(const Settings& base, const Settings& overrides = {});

std::string read_file(const std::filesystem::path& path);  // throws DataError
void write_file(const std::filesystem::path& path, std::string_view content);

// Holds <workdir>/.nerproj.lock for its lifetime.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path path_;
};

std::vector<SentencePair> load_bitext(const PipelineConfig& config);
// English CoNLL (or tagger output) relabelled positionally with pair ids.
std::vector<LabeledSentence> load_english(const PipelineConfig& config,
                                          const std::vector<SentencePair>& pairs);
std::vector<LabeledSentence> run_external_tagger(const std::string& command,
                                                 const std::vector<SentencePair>& pairs,
                                                 std::size_t batch_size,
                                                 const std::filesystem::path& scratch_dir);

std::vector<AlignmentLinks> read_alignments(const std::filesystem::path& path,
                                            const std::vector<SentencePair>& pairs);
std::string write_alignments(const std::vector<AlignmentLinks>& links);

// "pair_id<TAB>score" lines, score with 17 significant digits.
std::string write_scores(const std::vector<SentencePair>& pairs, const std::vector<double>& scores);
std::map<std::string, double> parse_scores(std::string_view text);

struct AlignTrainSummary {
  std::vector<double> forward_log_likelihood;
  std::vector<double> backward_log_likelihood;
};
// Writes forward.table and backward.table.
AlignTrainSummary cmd_align_train(const PipelineConfig& config);

struct AlignSummary {
  std::size_t pairs = 0;
  std::size_t forward_links = 0;
  std::size_t backward_links = 0;
  std::size_t intersected_links = 0;
};
// Writes forward.align, backward.align, intersected.align and scores.tsv.
AlignSummary cmd_align(const PipelineConfig& config);

// Writes projected.conll and drops.tsv.
DropStats cmd_project(const PipelineConfig& config);

struct FilterSplitSummary {
  std::vector<NamedStats> stats;  // projected, filtered, train, dev, test
};
// Writes train.conll, dev.conll, test.conll, stats.txt and stats.kv.
FilterSplitSummary cmd_filter_split(const PipelineConfig& config);

std::vector<NamedStats> cmd_stats(const std::vector<std::filesystem::path>& files);
EvalReport cmd_eval(const std::filesystem::path& gold, const std::filesystem::path& pred);

}  // namespace nerproj
