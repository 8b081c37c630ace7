#include "nerproj/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nerproj/parallel.hpp"

namespace nerproj {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw UsageError(key + ": expected a number, got \"" + value + "\"");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError(key + ": expected a non-negative integer, got \"" + value + "\"");
  }
  try {
    return std::stoull(value);
  } catch (const std::out_of_range&) {
    throw UsageError(key + ": value out of range");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw UsageError(key + ": expected true or false, got \"" + value + "\"");
}

// Alignment inputs of the project step.
std::filesystem::path forward_alignment_path(const PipelineConfig& c) {
  return c.alignments == "external" ? c.forward_alignments : c.out("forward.align");
}

std::filesystem::path backward_alignment_path(const PipelineConfig& c) {
  return c.alignments == "external" ? c.backward_alignments : c.out("backward.align");
}

TranslationTable load_table(const std::filesystem::path& path, Direction expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  auto table = TranslationTable::load(in);
  if (table.direction() != expected) {
    throw DataError(path.string() + ": table direction is " + std::string(to_string(table.direction())) +
                    ", expected " + std::string(to_string(expected)));
  }
  return table;
}

void save_table(const TranslationTable& table, const std::filesystem::path& path) {
  std::ostringstream out;
  table.save(out);
  write_file(path, out.str());
}

// A lock whose recorded owner no longer exists was left by a killed run.
bool stale_lock(const std::filesystem::path& path) {
  std::ifstream in(path);
  long pid = 0;
  if (!(in >> pid) || pid <= 0) return false;
  return ::kill(static_cast<pid_t>(pid), 0) != 0 && errno == ESRCH;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "workdir",          "bitext",         "src",
      "tgt",              "english",        "tagger-command",
      "tagger-batch",     "alignments",     "forward-alignments",
      "backward-alignments", "forward-table", "backward-table",
      "iterations",       "prob-floor",     "use-null",
      "max-vocabulary",   "mode",           "keep-fraction",
      "no-entity-rate",   "seed",           "jobs",
      "train-ratio",      "dev-ratio",      "test-ratio",
      "projected",        "scores"};
  return keys;
}

Settings parse_settings(std::string_view text) {
  Settings settings;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = trim(lines[n]);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(n + 1) + ": expected key = value");
    }
    const auto key = normalize_key(trim(std::string_view(line).substr(0, eq)));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw UsageError("config line " + std::to_string(n + 1) + ": unknown key \"" + key + "\"");
    }
    settings[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return settings;
}

std::filesystem::path PipelineConfig::projected_path() const {
  return projected.empty() ? out("projected.conll") : projected;
}

std::filesystem::path PipelineConfig::scores_path() const {
  return scores.empty() ? out("scores.tsv") : scores;
}

PipelineConfig make_config(const Settings& base, const Settings& overrides) {
  Settings merged = base;
  for (const auto& [k, v] : overrides) merged[normalize_key(k)] = v;

  PipelineConfig c;
  const auto& keys = config_keys();
  for (const auto& [key, value] : merged) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw UsageError("unknown setting \"" + key + "\"");
    }
    if (key == "workdir") c.workdir = value;
    else if (key == "bitext") c.bitext = value;
    else if (key == "src") c.src = value;
    else if (key == "tgt") c.tgt = value;
    else if (key == "english") c.english = value;
    else if (key == "tagger-command") c.tagger_command = value;
    else if (key == "tagger-batch") c.tagger_batch = to_unsigned(key, value);
    else if (key == "alignments") c.alignments = value;
    else if (key == "forward-alignments") c.forward_alignments = value;
    else if (key == "backward-alignments") c.backward_alignments = value;
    else if (key == "forward-table") c.forward_table = value;
    else if (key == "backward-table") c.backward_table = value;
    else if (key == "iterations") c.em.iterations = static_cast<int>(to_unsigned(key, value));
    else if (key == "prob-floor") c.em.prob_floor = to_double(key, value);
    else if (key == "use-null") c.em.use_null = to_bool(key, value);
    else if (key == "max-vocabulary") c.em.max_vocabulary = to_unsigned(key, value);
    else if (key == "mode") c.mode = projection_mode_from_string(value);
    else if (key == "keep-fraction") c.filter.keep_fraction = to_double(key, value);
    else if (key == "no-entity-rate") c.filter.no_entity_rate = to_double(key, value);
    else if (key == "seed") c.filter.seed = to_unsigned(key, value);
    else if (key == "jobs") c.jobs = static_cast<unsigned>(to_unsigned(key, value));
    else if (key == "train-ratio") c.split.train = to_double(key, value);
    else if (key == "dev-ratio") c.split.dev = to_double(key, value);
    else if (key == "test-ratio") c.split.test = to_double(key, value);
    else if (key == "projected") c.projected = value;
    else if (key == "scores") c.scores = value;
  }
  if (c.alignments != "builtin" && c.alignments != "external") {
    throw UsageError("alignments must be builtin or external");
  }
  if (c.alignments == "external" && (c.forward_alignments.empty() || c.backward_alignments.empty())) {
    throw UsageError("external alignments need forward-alignments and backward-alignments");
  }
  if (c.jobs == 0) c.jobs = 1;
  if (c.tagger_batch == 0) throw UsageError("tagger-batch must be positive");
  c.em.jobs = c.jobs;
  c.em.check();
  c.filter.check();
  c.split.check();
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

WorkdirLock::WorkdirLock(const std::filesystem::path& workdir) : path_(workdir / ".nerproj.lock") {
  std::filesystem::create_directories(workdir);
  int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0 && errno == EEXIST && stale_lock(path_)) {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
    fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  }
  if (fd < 0) {
    const auto reason = errno == EEXIST ? std::string("another run holds the lock")
                                        : std::string(std::strerror(errno));
    throw DataError("cannot lock " + path_.string() + ": " + reason);
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

std::vector<SentencePair> load_bitext(const PipelineConfig& config) {
  std::vector<SentencePair> pairs;
  if (!config.bitext.empty()) {
    pairs = parse_bitext(read_file(config.bitext));
  } else if (!config.src.empty() && !config.tgt.empty()) {
    pairs = parse_bitext(read_file(config.src), read_file(config.tgt));
  } else {
    throw UsageError("no parallel corpus configured (set bitext, or src and tgt)");
  }
  if (pairs.empty()) throw DataError("parallel corpus is empty");
  return pairs;
}

std::vector<LabeledSentence> run_external_tagger(const std::string& command,
                                                 const std::vector<SentencePair>& pairs,
                                                 std::size_t batch_size,
                                                 const std::filesystem::path& scratch_dir) {
  std::vector<LabeledSentence> out;
  const auto in_path = scratch_dir / ".tagger.in";
  const auto out_path = scratch_dir / ".tagger.out";
  for (std::size_t first = 0; first < pairs.size(); first += batch_size) {
    const auto last = std::min(pairs.size(), first + batch_size);
    std::string input;
    for (auto k = first; k < last; ++k) {
      for (std::size_t t = 0; t < pairs[k].src_tokens.size(); ++t) {
        if (t) input += ' ';
        input += pairs[k].src_tokens[t];
      }
      input += '\n';
    }
    write_file(in_path, input);
    const auto shell = command + " < '" + in_path.string() + "' > '" + out_path.string() + "'";
    const int status = std::system(shell.c_str());
    if (status != 0) {
      throw DataError("tagger command failed with status " + std::to_string(status) + ": " + command);
    }
    auto batch = parse_conll(read_file(out_path)).sentences;
    if (batch.size() != last - first) {
      throw DataError("tagger returned " + std::to_string(batch.size()) + " sentences for a batch of " +
                      std::to_string(last - first));
    }
    for (auto& s : batch) out.push_back(std::move(s));
  }
  std::error_code ec;
  std::filesystem::remove(in_path, ec);
  std::filesystem::remove(out_path, ec);
  return out;
}

std::vector<LabeledSentence> load_english(const PipelineConfig& config,
                                          const std::vector<SentencePair>& pairs) {
  std::vector<LabeledSentence> english;
  if (!config.english.empty()) {
    english = parse_conll(read_file(config.english)).sentences;
  } else if (!config.tagger_command.empty()) {
    english = run_external_tagger(config.tagger_command, pairs, config.tagger_batch, config.workdir);
  } else {
    throw UsageError("no English annotations configured (set english or tagger-command)");
  }
  if (english.size() != pairs.size()) {
    throw DataError("English CoNLL has " + std::to_string(english.size()) +
                    " sentences but the bitext has " + std::to_string(pairs.size()) + " pairs");
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) english[k].id = pairs[k].id;
  return english;
}

std::vector<AlignmentLinks> read_alignments(const std::filesystem::path& path,
                                            const std::vector<SentencePair>& pairs) {
  const auto text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.size() != pairs.size()) {
    throw DataError(path.string() + " has " + std::to_string(lines.size()) + " lines but the bitext has " +
                    std::to_string(pairs.size()) + " pairs");
  }
  std::vector<AlignmentLinks> links;
  links.reserve(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) links.push_back(parse_pharaoh(lines[k], pairs[k]));
  return links;
}

std::string write_alignments(const std::vector<AlignmentLinks>& links) {
  std::string out;
  for (const auto& l : links) {
    out += write_pharaoh(l);
    out += '\n';
  }
  return out;
}

std::string write_scores(const std::vector<SentencePair>& pairs, const std::vector<double>& scores) {
  std::string out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out += pairs[k].id;
    out += '\t';
    out += format_probability(scores[k]);
    out += '\n';
  }
  return out;
}

std::map<std::string, double> parse_scores(std::string_view text) {
  std::map<std::string, double> scores;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = lines[n];
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(n + 1, "expected \"pair_id<TAB>score\"");
    const auto value = std::string(line.substr(tab + 1));
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !(v >= 0.0 && v <= 1.0)) {
      throw ParseError(n + 1, "score must be a number in [0, 1]");
    }
    if (!scores.emplace(std::string(line.substr(0, tab)), v).second) {
      throw ParseError(n + 1, "duplicate pair id");
    }
  }
  return scores;
}

AlignTrainSummary cmd_align_train(const PipelineConfig& config) {
  const auto pairs = load_bitext(config);
  const auto forward = train_ibm1(pairs, Direction::SrcToTgt, config.em);
  const auto backward = train_ibm1(pairs, Direction::TgtToSrc, config.em);
  save_table(forward, config.out("forward.table"));
  save_table(backward, config.out("backward.table"));
  return {forward.log_likelihood(), backward.log_likelihood()};
}

AlignSummary cmd_align(const PipelineConfig& config) {
  const auto pairs = load_bitext(config);
  std::vector<AlignmentLinks> forward(pairs.size());
  std::vector<AlignmentLinks> backward(pairs.size());

  if (config.alignments == "external") {
    forward = read_alignments(config.forward_alignments, pairs);
    backward = read_alignments(config.backward_alignments, pairs);
  } else {
    const auto forward_table = config.forward_table.empty()
                                   ? train_ibm1(pairs, Direction::SrcToTgt, config.em)
                                   : load_table(config.forward_table, Direction::SrcToTgt);
    const auto backward_table = config.backward_table.empty()
                                    ? train_ibm1(pairs, Direction::TgtToSrc, config.em)
                                    : load_table(config.backward_table, Direction::TgtToSrc);
    parallel_for(pairs.size(), config.jobs, [&](std::size_t k) {
      forward[k] = align_viterbi(forward_table, pairs[k]);
      backward[k] = align_viterbi(backward_table, pairs[k]);
    });
  }

  AlignSummary summary;
  summary.pairs = pairs.size();
  std::vector<AlignmentLinks> intersected(pairs.size());
  std::vector<double> scores(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    intersected[k] = symmetrize_intersection(forward[k], backward[k]);
    scores[k] = quality_score(pairs[k], forward[k]);
    summary.forward_links += forward[k].size();
    summary.backward_links += backward[k].size();
    summary.intersected_links += intersected[k].size();
  }
  write_file(config.out("forward.align"), write_alignments(forward));
  write_file(config.out("backward.align"), write_alignments(backward));
  write_file(config.out("intersected.align"), write_alignments(intersected));
  write_file(config.out("scores.tsv"), write_scores(pairs, scores));
  return summary;
}

DropStats cmd_project(const PipelineConfig& config) {
  const auto pairs = load_bitext(config);
  const auto english = load_english(config, pairs);
  const auto forward = read_alignments(forward_alignment_path(config), pairs);
  const auto backward = read_alignments(backward_alignment_path(config), pairs);
  const auto projected = project_corpus(pairs, english, forward, backward, config.mode, config.jobs);

  std::vector<LabeledSentence> labeled;
  labeled.reserve(projected.results.size());
  for (const auto& r : projected.results) labeled.push_back(r.labeled);
  write_file(config.projected_path(), write_conll(labeled));
  write_file(config.out("drops.tsv"), write_drop_log(projected));
  return projected.stats;
}

FilterSplitSummary cmd_filter_split(const PipelineConfig& config) {
  auto corpus = parse_conll(read_file(config.projected_path())).sentences;
  if (!config.bitext.empty() || (!config.src.empty() && !config.tgt.empty())) {
    const auto pairs = load_bitext(config);
    if (pairs.size() != corpus.size()) {
      throw DataError("projected corpus has " + std::to_string(corpus.size()) +
                      " sentences but the bitext has " + std::to_string(pairs.size()) + " pairs");
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) corpus[k].id = pairs[k].id;
  }
  const auto scores = parse_scores(read_file(config.scores_path()));

  std::vector<ScoredSentence> scored;
  scored.reserve(corpus.size());
  for (auto& s : corpus) {
    const auto it = scores.find(s.id);
    if (it == scores.end()) throw DataError("no score for pair " + s.id);
    scored.push_back(make_scored(std::move(s), it->second));
  }

  auto unwrap = [](const std::vector<ScoredSentence>& v) {
    std::vector<LabeledSentence> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(s.sentence);
    return out;
  };

  const auto before = corpus_stats(unwrap(scored));
  const auto sampled = downsample_no_entity(scored, config.filter.no_entity_rate, config.filter.seed);
  const auto kept = unwrap(filter_top_fraction(sampled, config.filter.keep_fraction));
  const auto after = corpus_stats(kept);
  const auto splits = shuffle_split(kept, config.split, config.filter.seed);

  write_file(config.out("train.conll"), write_conll(splits.train));
  write_file(config.out("dev.conll"), write_conll(splits.dev));
  write_file(config.out("test.conll"), write_conll(splits.test));

  FilterSplitSummary summary;
  summary.stats = {{"projected", before},
                   {"filtered", after},
                   {"train", corpus_stats(splits.train)},
                   {"dev", corpus_stats(splits.dev)},
                   {"test", corpus_stats(splits.test)}};
  write_file(config.out("stats.txt"), stats_table(summary.stats));
  write_file(config.out("stats.kv"), stats_key_values(summary.stats));
  return summary;
}

std::vector<NamedStats> cmd_stats(const std::vector<std::filesystem::path>& files) {
  std::vector<NamedStats> rows;
  CorpusStats total;
  for (const auto& f : files) {
    const auto stats = corpus_stats(parse_conll(read_file(f)).sentences);
    total += stats;
    rows.push_back({f.stem().string(), stats});
  }
  if (rows.size() > 1) rows.push_back({"total", total});
  return rows;
}

EvalReport cmd_eval(const std::filesystem::path& gold, const std::filesystem::path& pred) {
  return span_f1(parse_conll(read_file(gold)).sentences, parse_conll(read_file(pred)).sentences);
}

}  // namespace nerproj
