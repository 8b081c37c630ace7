// nerproj: build NER corpora for a target language by projecting English
// entity annotations across a word-aligned parallel corpus.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "nerproj/pipeline.hpp"
#include "nerproj/review.hpp"
#include "nerproj/review_http.hpp"

using namespace nerproj;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

// Adds --config and one --<key> flag per config key to a subcommand.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file");
    for (const auto& key : config_keys()) {
      app->add_option("--" + key, values[key], "overrides config key " + key);
    }
  }

  PipelineConfig resolve(const CLI::App* app) const {
    Settings base;
    if (!config_path.empty()) base = parse_settings(read_file(config_path));
    Settings overrides;
    for (const auto& key : config_keys()) {
      if (app->count("--" + key) > 0) overrides[key] = values.at(key);
    }
    return make_config(base, overrides);
  }
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    out.push_back(s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void print_log_likelihood(const char* name, const std::vector<double>& ll) {
  for (std::size_t i = 0; i < ll.size(); ++i) {
    std::printf("%s\titeration=%zu\tlog_likelihood=%.10f\n", name, i, ll[i]);
  }
}

int serve_review(const std::string& corpus_path, const std::string& host, int port,
                 const std::string& annotators, const std::string& adjudicator,
                 const std::string& log_path, double shared_fraction, const std::string& ui_dir,
                 const std::string& workdir) {
  ReviewConfig config;
  config.annotators = split_commas(annotators);
  if (!adjudicator.empty()) config.adjudicator = adjudicator;
  config.shared_fraction = shared_fraction;
  config.log_path = log_path.empty() ? std::filesystem::path(workdir) / "review.log"
                                     : std::filesystem::path(log_path);
  config.check();

  WorkdirLock lock(workdir);
  ReviewService service(parse_conll(read_file(corpus_path)).sentences, config);

  httplib::Server server;
  std::optional<std::filesystem::path> static_dir;
  if (!ui_dir.empty()) static_dir = ui_dir;
  register_review_routes(server, service, static_dir);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&server] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });

  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    g_stop = true;
    watcher.join();
    throw DataError("cannot bind " + host + ":" + std::to_string(port));
  }
  std::printf("serving %zu sentences on http://%s:%d (log %s)\n", service.size(), host.c_str(), bound,
              config.log_path.c_str());
  std::fflush(stdout);
  server.listen_after_bind();
  g_stop = true;
  watcher.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Project English NER annotations onto a target language through word alignments"};
  app.require_subcommand(1);

  ConfigFlags align_train_flags, align_flags, project_flags, filter_flags;

  auto* align_train = app.add_subcommand("align-train", "train IBM Model 1 tables in both directions");
  align_train_flags.attach(align_train);

  auto* align = app.add_subcommand("align", "write forward, backward and intersected alignments plus scores");
  align_flags.attach(align);

  auto* project = app.add_subcommand("project", "project English entities onto target sentences");
  project_flags.attach(project);

  auto* filter_split = app.add_subcommand("filter-split", "filter projected data and split train/dev/test");
  filter_flags.attach(filter_split);

  auto* stats = app.add_subcommand("stats", "entity statistics of CoNLL files");
  std::vector<std::string> stats_files;
  std::string stats_kv;
  stats->add_option("files", stats_files, "CoNLL files")->required()->check(CLI::ExistingFile);
  stats->add_option("--kv", stats_kv, "also write key=value stats to this file");

  auto* eval = app.add_subcommand("eval", "span-level precision, recall and F1");
  std::string gold_path, pred_path, eval_kv;
  eval->add_option("--gold", gold_path, "gold CoNLL")->required();
  eval->add_option("--pred", pred_path, "predicted CoNLL")->required();
  eval->add_option("--kv", eval_kv, "also write key=value report to this file");

  auto* kappa = app.add_subcommand("kappa", "token-level Cohen's kappa between two annotations");
  std::string kappa_a, kappa_b;
  kappa->add_option("first", kappa_a, "first annotator CoNLL")->required();
  kappa->add_option("second", kappa_b, "second annotator CoNLL")->required();

  auto* serve = app.add_subcommand("serve-review", "serve projected sentences for human review");
  std::string corpus_path, annotators, adjudicator, log_path, ui_dir, host = "127.0.0.1",
                                                                      workdir = ".";
  int port = 8080;
  double shared_fraction = 1.0;
  serve->add_option("--corpus", corpus_path, "CoNLL corpus to review")->required();
  serve->add_option("--port", port, "port; 0 picks a free one");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--annotators", annotators, "comma-separated annotator ids")->required();
  serve->add_option("--adjudicator", adjudicator, "annotator whose tags win conflicts");
  serve->add_option("--log", log_path, "record log (default <workdir>/review.log)");
  serve->add_option("--workdir", workdir, "working directory");
  serve->add_option("--shared-fraction", shared_fraction, "fraction of sentences every annotator sees");
  serve->add_option("--ui-dir", ui_dir, "static files served under /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*align_train) {
      const auto config = align_train_flags.resolve(align_train);
      WorkdirLock lock(config.workdir);
      const auto summary = cmd_align_train(config);
      print_log_likelihood("forward", summary.forward_log_likelihood);
      print_log_likelihood("backward", summary.backward_log_likelihood);
    } else if (*align) {
      const auto config = align_flags.resolve(align);
      WorkdirLock lock(config.workdir);
      const auto s = cmd_align(config);
      std::printf("pairs=%zu forward_links=%zu backward_links=%zu intersected_links=%zu\n", s.pairs,
                  s.forward_links, s.backward_links, s.intersected_links);
    } else if (*project) {
      const auto config = project_flags.resolve(project);
      WorkdirLock lock(config.workdir);
      const auto s = cmd_project(config);
      std::printf("mode=%s source_spans=%zu projected=%zu dropped_unaligned=%zu dropped_overlap=%zu\n",
                  std::string(to_string(config.mode)).c_str(), s.source_spans, s.projected_spans,
                  s.unaligned, s.overlap);
    } else if (*filter_split) {
      const auto config = filter_flags.resolve(filter_split);
      WorkdirLock lock(config.workdir);
      std::cout << stats_table(cmd_filter_split(config).stats);
    } else if (*stats) {
      std::vector<std::filesystem::path> files(stats_files.begin(), stats_files.end());
      const auto rows = cmd_stats(files);
      std::cout << stats_table(rows);
      if (!stats_kv.empty()) write_file(stats_kv, stats_key_values(rows));
    } else if (*eval) {
      const auto report = cmd_eval(gold_path, pred_path);
      std::cout << format_report(report);
      if (!eval_kv.empty()) write_file(eval_kv, report_key_values(report));
    } else if (*kappa) {
      std::cout << format_agreement(cohens_kappa(parse_conll(read_file(kappa_a)).sentences,
                                                 parse_conll(read_file(kappa_b)).sentences));
    } else if (*serve) {
      return serve_review(corpus_path, host, port, annotators, adjudicator, log_path, shared_fraction,
                          ui_dir, workdir);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
