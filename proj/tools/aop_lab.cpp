#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "aoplab/analysis.hpp"
#include "aoplab/cap.hpp"
#include "aoplab/metrics.hpp"
#include "aoplab/ngram.hpp"
#include "aoplab/pipeline.hpp"
#include "aoplab/predictors.hpp"
#include "aoplab/protocol.hpp"

namespace fs = std::filesystem;
using namespace aoplab;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kScorer = 3 };

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

void write_file(const fs::path& p, const std::string& data) {
  auto out = open_out(p);
  out << data;
}

struct ExtractArgs {
  fs::path treebank, lexicon, out;
  bool include_propn = false;
};

struct MetricsArgs {
  fs::path cap, out, summary, article_exceptions;
  std::string scorer;
  std::size_t random_contexts = 0;
  std::optional<std::uint64_t> seed;
  int timeout_ms = 30000;
  int retries = 0;
};

struct PredictorArgs {
  fs::path cap, treebank, ratings, out, summary;
  double pmi_alpha = 0.0;
};

struct CountArgs {
  fs::path corpus, cap, out, checkpoint_dir, timeline_out, splits_out;
  bool timeline = false;
  std::uint64_t batch_tokens = 0;
  bool case_sensitive = false, keep_punct = false, cross_documents = false;
  std::size_t chunk_bytes = std::size_t{1} << 22;
  std::string jsonl_field;
};

struct AnalyzeArgs {
  fs::path metrics, counts, out, cap, predictors, splits;
  bool case_sensitive = false, keep_punct = false;
};

struct RunArgs {
  fs::path config, output;
  std::string stages;
  std::optional<int> workers;
};

int cmd_extract(const ExtractArgs& a, int workers) {
  const auto lexicon = cap::load_lexicon(a.lexicon);
  cap::ExtractStats stats;
  const auto items = cap::extract_directory(a.treebank, lexicon, {a.include_propn}, workers, &stats);
  auto out = open_out(a.out);
  cap::write_jsonl(out, items);
  std::cerr << "sentences " << stats.sentences << ", items " << stats.items << ", skipped: arity "
            << stats.skipped_arity << ", not lexical " << stats.skipped_not_lexical << ", noncontiguous "
            << stats.skipped_noncontiguous << '\n';
  return kOk;
}

int cmd_metrics(const MetricsArgs& a, int workers) {
  if (a.random_contexts > 0 && !a.seed) throw UsageError("--seed is required with --random-contexts");
  const auto items = cap::read_jsonl(a.cap);
  scoring::RemoteOptions ro;
  ro.timeout = std::chrono::milliseconds(a.timeout_ms);
  ro.retries = a.retries;
  const auto scorer = scoring::scorer_from_spec(a.scorer, ro);
  std::optional<cap::ArticleRules> rules;
  if (!a.article_exceptions.empty()) rules = cap::ArticleRules::load(a.article_exceptions);
  const auto records = metrics::compute_all(items, *scorer,
                                            {a.random_contexts, a.seed.value_or(0), workers, rules ? &*rules : nullptr});
  auto out = open_out(a.out);
  metrics::write_jsonl(out, records);
  const auto summary = metrics::summary_json(metrics::summarize(records));
  if (!a.summary.empty())
    write_file(a.summary, summary + "\n");
  else
    std::cout << summary << '\n';
  return kOk;
}

int cmd_predictors(const PredictorArgs& a, int workers) {
  const auto items = cap::read_jsonl(a.cap);
  const auto table = predictors::pmi_table_from_conllu(a.treebank, a.pmi_alpha, workers);
  const auto ratings = predictors::SubjectivityRatings::load(a.ratings);
  const auto scores = predictors::score_items(items, &table, &ratings);
  auto out = open_out(a.out);
  predictors::write_jsonl(out, scores);
  const auto summary = predictors::summary_json(scores);
  if (!a.summary.empty())
    write_file(a.summary, summary + "\n");
  else
    std::cout << summary << '\n';
  return kOk;
}

int cmd_count(const CountArgs& a, int workers) {
  const auto items = cap::read_jsonl(a.cap);
  const auto index = ngram::TargetIndex::build(items, {!a.case_sensitive, !a.keep_punct});
  const auto shards = ngram::list_shards(a.corpus);
  ngram::CountOptions co;
  co.cross_documents = a.cross_documents;
  co.chunk_bytes = a.chunk_bytes;
  co.jsonl_field = a.jsonl_field;
  co.workers = workers;
  ngram::NgramCounts counts;
  if (a.timeline) {
    if (a.batch_tokens == 0) throw UsageError("--timeline needs --batch-tokens N with N > 0");
    ngram::TimelineOptions to;
    to.batch_tokens = a.batch_tokens;
    to.checkpoint_dir = a.checkpoint_dir;
    const auto run = ngram::build_timeline_files(shards, index, co, to);
    if (run.resumed) std::cerr << "resumed from checkpoint in " << a.checkpoint_dir << '\n';
    counts = run.timeline.final_counts();
    const auto dir = a.out.has_parent_path() ? a.out.parent_path() : fs::path(".");
    write_file(a.timeline_out.empty() ? dir / "timeline.json" : a.timeline_out,
               ngram::timeline_summary_json(run.timeline, index) + "\n");
    write_file(a.splits_out.empty() ? dir / "splits.json" : a.splits_out,
               ngram::splits_json(run.timeline, ngram::log_spaced_checkpoints(run.timeline.num_batches()), items,
                                  index) +
                   "\n");
  } else {
    counts = ngram::count_files(shards, index, co);
  }
  auto out = open_out(a.out);
  ngram::write_counts_tsv(out, counts, index);
  std::cerr << "patterns " << index.size() << ", tokens " << counts.tokens_processed << '\n';
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& a) {
  analysis::ReportInputs in;
  in.series = analysis::load_series(a.metrics);
  in.normalize = {!a.case_sensitive, !a.keep_punct};
  if (!a.cap.empty()) in.corpus = cap::read_jsonl(a.cap);
  if (!a.counts.empty()) {
    if (a.cap.empty()) throw UsageError("--counts needs --cap to map items onto n-grams");
    in.counts = ngram::read_counts_tsv(a.counts);
  }
  if (!a.predictors.empty()) {
    if (a.cap.empty()) throw UsageError("--predictors needs --cap");
    in.predictors = predictors::read_jsonl(a.predictors);
  }
  if (!a.splits.empty()) in.splits = analysis::read_splits_json(a.splits);
  const auto result = analysis::emit_report(in, a.out);
  for (const auto& f : result.files) std::cout << (a.out / f).string() << '\n';
  for (const auto& [section, reason] : result.omitted) std::cerr << "omitted " << section << ": " << reason << '\n';
  return kOk;
}

int print_errors(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "error: " << e << '\n';
  return kUsage;
}

int cmd_run(const RunArgs& a) {
  auto v = pipeline::validate_config(a.config);
  if (!v.config) return print_errors(v.errors);
  auto c = *v.config;
  if (a.workers) c.workers = *a.workers;
  if (!a.output.empty()) c.output = a.output;
  if (!a.stages.empty()) {
    c.stages.clear();
    for (auto part : text::split(a.stages, ',')) {
      const auto stage = pipeline::parse_stage(text::trim(part));
      if (!stage) throw UsageError("unknown stage '" + std::string(part) + "'");
      c.stages.push_back(*stage);
    }
    std::sort(c.stages.begin(), c.stages.end());
    c.stages.erase(std::unique(c.stages.begin(), c.stages.end()), c.stages.end());
  }
  const auto result = pipeline::run_pipeline(c);
  for (const auto& s : result.ran) std::cerr << "ran " << s << '\n';
  for (const auto& s : result.skipped) std::cerr << "skipped " << s << " (inputs unchanged)\n";
  std::cout << result.manifest.string() << '\n';
  return kOk;
}

int cmd_validate(const fs::path& config) {
  const auto v = pipeline::validate_config(config);
  if (!v.config) return print_errors(v.errors);
  std::cout << "ok: stages";
  for (auto s : v.config->stages) std::cout << ' ' << pipeline::to_string(s);
  std::cout << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adjective order preference toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  int workers = 0;
  app.add_option("-j,--workers", workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract double-adjective noun phrases from CoNLL-U");
  extract->add_option("--treebank", ex.treebank, "CoNLL-U file or directory")->required();
  extract->add_option("--lexicon", ex.lexicon, "Adjective lexicon, one per line")->required();
  extract->add_option("-o,--out", ex.out, "Output cap.jsonl")->required();
  extract->add_flag("--include-propn", ex.include_propn, "Accept proper-noun heads");

  MetricsArgs me;
  auto* metrics_cmd = app.add_subcommand("metrics", "Score natural and swapped orders");
  metrics_cmd->add_option("--cap", me.cap, "cap.jsonl")->required();
  metrics_cmd->add_option("--scorer", me.scorer, "oracle:corpus=PATH[,order=N,alpha=X] or remote:ADDR")->required();
  metrics_cmd->add_option("-o,--out", me.out, "Output metrics.jsonl")->required();
  metrics_cmd->add_option("--summary", me.summary, "Write the summary here instead of stdout");
  metrics_cmd->add_option("--random-contexts", me.random_contexts, "Contexts sampled per item (0: off)");
  metrics_cmd->add_option("--seed", me.seed, "Sampling seed");
  metrics_cmd->add_option("--timeout-ms", me.timeout_ms, "Remote scorer timeout")->check(CLI::PositiveNumber);
  metrics_cmd->add_option("--retries", me.retries, "Re-sends after a timeout")->check(CLI::NonNegativeNumber);
  metrics_cmd->add_option("--article-exceptions", me.article_exceptions, "a/an exception table replacing the bundled one");

  PredictorArgs pr;
  auto* pred = app.add_subcommand("predictors", "Length, PMI and subjectivity scores");
  pred->add_option("--cap", pr.cap, "cap.jsonl")->required();
  pred->add_option("--treebank", pr.treebank, "CoNLL-U source of amod counts")->required();
  pred->add_option("--ratings", pr.ratings, "Subjectivity ratings TSV")->required();
  pred->add_option("-o,--out", pr.out, "Output predictors.jsonl")->required();
  pred->add_option("--summary", pr.summary, "Write the summary here instead of stdout");
  pred->add_option("--pmi-alpha", pr.pmi_alpha, "Additive smoothing for PMI")->check(CLI::NonNegativeNumber);

  CountArgs co;
  auto* count = app.add_subcommand("count", "Exact n-gram counts of the item patterns");
  count->add_option("--corpus", co.corpus, "Text shard file or directory")->required();
  count->add_option("--cap", co.cap, "cap.jsonl")->required();
  count->add_option("-o,--out", co.out, "Output counts.tsv")->required();
  count->add_flag("--timeline", co.timeline, "Also build per-batch cumulative counts");
  count->add_option("--batch-tokens", co.batch_tokens, "Tokens per timeline batch");
  count->add_option("--checkpoint-dir", co.checkpoint_dir, "Save and resume timeline state here");
  count->add_option("--timeline-out", co.timeline_out, "Timeline summary JSON");
  count->add_option("--splits-out", co.splits_out, "Exposure splits JSON");
  count->add_flag("--case-sensitive", co.case_sensitive, "Do not lowercase tokens");
  count->add_flag("--keep-punct", co.keep_punct, "Do not strip token-edge punctuation");
  count->add_flag("--cross-documents", co.cross_documents, "Let matches span line breaks");
  count->add_option("--chunk-bytes", co.chunk_bytes, "Work unit size")->check(CLI::PositiveNumber);
  count->add_option("--jsonl-field", co.jsonl_field, "Read documents from this field of JSONL shards");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Correlations, quadrants and report tables");
  analyze->add_option("--metrics", an.metrics, "metrics.jsonl or a directory of checkpoint tables")->required();
  analyze->add_option("--counts", an.counts, "counts.tsv");
  analyze->add_option("--cap", an.cap, "cap.jsonl");
  analyze->add_option("--predictors", an.predictors, "predictors.jsonl");
  analyze->add_option("--splits", an.splits, "splits.json");
  analyze->add_option("-o,--out", an.out, "Report directory")->required();
  analyze->add_flag("--case-sensitive", an.case_sensitive, "Counts were built without lowercasing");
  analyze->add_flag("--keep-punct", an.keep_punct, "Counts were built without punctuation stripping");

  RunArgs ru;
  auto* run = app.add_subcommand("run", "Run the configured pipeline");
  run->add_option("-c,--config", ru.config, "Run configuration (INI)")->required();
  run->add_option("--output", ru.output, "Override paths.output");
  run->add_option("--stages", ru.stages, "Override run.stages, comma separated");

  fs::path validate_path;
  auto* validate = app.add_subcommand("validate", "Check a run configuration");
  validate->add_option("-c,--config", validate_path, "Run configuration (INI)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*extract) return cmd_extract(ex, workers);
    if (*metrics_cmd) return cmd_metrics(me, workers);
    if (*pred) return cmd_predictors(pr, workers);
    if (*count) return cmd_count(co, workers);
    if (*analyze) return cmd_analyze(an);
    if (*run) {
      if (app.get_option("--workers")->count() > 0) ru.workers = workers;
      return cmd_run(ru);
    }
    if (*validate) return cmd_validate(validate_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ScorerError& e) {
    std::cerr << "scorer error: " << e.what() << '\n';
    return kScorer;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
