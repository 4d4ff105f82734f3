#include "aoplab/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "aoplab/analysis.hpp"
#include "aoplab/cap.hpp"
#include "aoplab/hash.hpp"
#include "aoplab/metrics.hpp"
#include "aoplab/predictors.hpp"
#include "aoplab/protocol.hpp"

namespace aoplab::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* to_string(Stage s) {
  switch (s) {
    case Stage::extract:
      return "extract";
    case Stage::metrics:
      return "metrics";
    case Stage::predictors:
      return "predictors";
    case Stage::count:
      return "count";
    case Stage::analyze:
      return "analyze";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : {Stage::extract, Stage::metrics, Stage::predictors, Stage::count, Stage::analyze}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

bool RunConfig::has_stage(Stage s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

namespace {

std::optional<fs::path> oracle_corpus(const std::string& spec) {
  if (!spec.starts_with("oracle:")) return std::nullopt;
  for (auto part : text::split(std::string_view(spec).substr(7), ',')) {
    part = text::trim(part);
    if (part.starts_with("corpus=")) return fs::path(std::string(part.substr(7)));
  }
  return std::nullopt;
}

std::string canonical_scorer(const std::string& spec) {
  if (!spec.starts_with("oracle:")) return spec;
  std::string out = "oracle:";
  bool first = true;
  for (auto part : text::split(std::string_view(spec).substr(7), ',')) {
    part = text::trim(part);
    if (part.empty() || part.starts_with("corpus=")) continue;
    if (!first) out += ',';
    out += part;
    first = false;
  }
  return out;
}

}  // namespace

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out << "include_propn=" << include_propn << '\n'
      << "scorer=" << canonical_scorer(scorer) << '\n'
      << "random_contexts=" << random_contexts << '\n'
      << "seed=" << (seed ? std::to_string(*seed) : "none") << '\n';
  char alpha[40];
  std::snprintf(alpha, sizeof alpha, "%.17g", pmi_alpha);
  out << "pmi_alpha=" << alpha << '\n'
      << "lowercase=" << lowercase << '\n'
      << "strip_punct=" << strip_punct << '\n'
      << "cross_documents=" << cross_documents << '\n'
      << "batch_tokens=" << batch_tokens << '\n'
      << "jsonl_field=" << jsonl_field << '\n'
      << "stages=";
  for (auto s : stages) out << to_string(s) << ';';
  out << '\n';
  return out.str();
}

// ---- validation ---------------------------------------------------------------

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"paths", {"treebank", "lexicon", "article_exceptions", "ratings", "pmi_treebank", "shards", "output"}},
      {"extract", {"include_propn"}},
      {"scorer", {"spec", "timeout_ms", "retries"}},
      {"sampling", {"random_contexts", "seed"}},
      {"predictors", {"pmi_alpha"}},
      {"count", {"lowercase", "strip_punct", "cross_documents", "batch_tokens", "chunk_bytes", "jsonl_field"}},
      {"run", {"stages", "workers"}},
  };
  return keys;
}

class Reader {
 public:
  Reader(const boost::property_tree::ptree& tree, fs::path base, std::vector<std::string>& errors)
      : tree_(tree), base_(std::move(base)), errors_(errors) {}

  std::optional<std::string> raw(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return std::string(text::trim(*v));
  }

  void path(const std::string& key, fs::path& out) const {
    if (auto v = raw(key); v && !v->empty()) {
      fs::path p(*v);
      out = p.is_absolute() ? p : base_ / p;
    }
  }

  void str(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) out = *v;
  }

  void boolean(const std::string& key, bool& out) const {
    auto v = raw(key);
    if (!v) return;
    const auto s = text::to_lower(*v);
    if (s == "true" || s == "yes" || s == "on" || s == "1")
      out = true;
    else if (s == "false" || s == "no" || s == "off" || s == "0")
      out = false;
    else
      errors_.push_back(key + ": expected a boolean, got '" + *v + "'");
  }

  template <typename T>
  void integer(const std::string& key, T& out, long long min_value) const {
    auto v = raw(key);
    if (!v) return;
    try {
      std::size_t used = 0;
      const long long x = std::stoll(*v, &used);
      if (used != v->size() || x < min_value) throw std::out_of_range("range");
      out = static_cast<T>(x);
    } catch (const std::logic_error&) {
      errors_.push_back(key + ": expected an integer >= " + std::to_string(min_value) + ", got '" + *v + "'");
    }
  }

  void real(const std::string& key, double& out) const {
    auto v = raw(key);
    if (!v) return;
    try {
      std::size_t used = 0;
      const double x = std::stod(*v, &used);
      if (used != v->size() || !(x >= 0.0) || !std::isfinite(x)) throw std::out_of_range("range");
      out = x;
    } catch (const std::logic_error&) {
      errors_.push_back(key + ": expected a finite number >= 0, got '" + *v + "'");
    }
  }

 private:
  const boost::property_tree::ptree& tree_;
  fs::path base_;
  std::vector<std::string>& errors_;
};

void check_path(const fs::path& p, const std::string& key, std::vector<std::string>& errors) {
  if (p.empty())
    errors.push_back(key + " is required");
  else if (!fs::exists(p))
    errors.push_back(key + ": path does not exist: " + p.string());
}

}  // namespace

std::vector<std::string> check_config(const RunConfig& c) {
  std::vector<std::string> errors;
  if (c.stages.empty()) errors.emplace_back("run.stages is empty");
  if (c.output.empty()) errors.emplace_back("paths.output is required");
  if (c.has_stage(Stage::extract)) {
    check_path(c.treebank, "paths.treebank", errors);
    check_path(c.lexicon, "paths.lexicon", errors);
  }
  if (c.has_stage(Stage::metrics)) {
    if (c.scorer.empty()) {
      errors.emplace_back("scorer.spec is required for the metrics stage");
    } else if (c.scorer.starts_with("oracle:")) {
      const auto corpus = oracle_corpus(c.scorer);
      if (!corpus)
        errors.emplace_back("scorer.spec: oracle scorer needs corpus=PATH");
      else if (!fs::exists(*corpus))
        errors.push_back("scorer.spec: oracle corpus does not exist: " + corpus->string());
    } else if (!c.scorer.starts_with("remote:")) {
      errors.push_back("scorer.spec: expected oracle:... or remote:..., got '" + c.scorer + "'");
    }
    if (!c.article_exceptions.empty()) check_path(c.article_exceptions, "paths.article_exceptions", errors);
    if (c.random_contexts > 0 && !c.seed)
      errors.emplace_back("sampling.seed is required when sampling.random_contexts > 0");
  }
  if (c.has_stage(Stage::predictors)) {
    check_path(c.ratings, "paths.ratings", errors);
    check_path(c.pmi_treebank.empty() ? c.treebank : c.pmi_treebank,
               c.pmi_treebank.empty() ? "paths.treebank" : "paths.pmi_treebank", errors);
  }
  if (c.has_stage(Stage::count)) check_path(c.shards, "paths.shards", errors);
  if (c.chunk_bytes == 0) errors.emplace_back("count.chunk_bytes must be positive");
  // the same path can be reported by two stages
  std::vector<std::string> unique;
  for (auto& e : errors) {
    if (std::find(unique.begin(), unique.end(), e) == unique.end()) unique.push_back(std::move(e));
  }
  return unique;
}

Validation validate_config(const fs::path& path) {
  Validation v;
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    v.errors.push_back(e.what());
    return v;
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty())
        v.errors.push_back("key '" + section + "' outside a section");
      else
        v.errors.push_back("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) v.errors.push_back("unknown key '" + section + "." + key + "'");
    }
  }

  RunConfig c;
  const Reader r(tree, fs::absolute(path).parent_path(), v.errors);
  r.path("paths.treebank", c.treebank);
  r.path("paths.lexicon", c.lexicon);
  r.path("paths.article_exceptions", c.article_exceptions);
  r.path("paths.ratings", c.ratings);
  r.path("paths.pmi_treebank", c.pmi_treebank);
  r.path("paths.shards", c.shards);
  r.path("paths.output", c.output);
  r.boolean("extract.include_propn", c.include_propn);
  r.str("scorer.spec", c.scorer);
  if (auto corpus = oracle_corpus(c.scorer); corpus && corpus->is_relative()) {
    // rewrite the oracle corpus against the config directory
    const auto abs = (fs::absolute(path).parent_path() / *corpus).lexically_normal().string();
    std::string rebuilt = "oracle:";
    bool first = true;
    for (auto part : text::split(std::string_view(c.scorer).substr(7), ',')) {
      part = text::trim(part);
      if (part.empty()) continue;
      if (!first) rebuilt += ',';
      rebuilt += part.starts_with("corpus=") ? "corpus=" + abs : std::string(part);
      first = false;
    }
    c.scorer = rebuilt;
  }
  r.integer("scorer.timeout_ms", c.timeout_ms, 1);
  r.integer("scorer.retries", c.retries, 0);
  r.integer("sampling.random_contexts", c.random_contexts, 0);
  if (auto s = r.raw("sampling.seed"); s && !s->empty()) {
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(*s, &used);
      if (used != s->size() || s->starts_with('-')) throw std::invalid_argument("seed");
      c.seed = seed;
    } catch (const std::logic_error&) {
      v.errors.push_back("sampling.seed: expected a non-negative integer, got '" + *s + "'");
    }
  }
  r.real("predictors.pmi_alpha", c.pmi_alpha);
  r.boolean("count.lowercase", c.lowercase);
  r.boolean("count.strip_punct", c.strip_punct);
  r.boolean("count.cross_documents", c.cross_documents);
  r.integer("count.batch_tokens", c.batch_tokens, 0);
  r.integer("count.chunk_bytes", c.chunk_bytes, 1);
  r.str("count.jsonl_field", c.jsonl_field);
  r.integer("run.workers", c.workers, 0);
  if (auto s = r.raw("run.stages")) {
    for (auto part : text::split(*s, ',')) {
      part = text::trim(part);
      if (part.empty()) continue;
      if (auto stage = parse_stage(part))
        c.stages.push_back(*stage);
      else
        v.errors.push_back("run.stages: unknown stage '" + std::string(part) + "'");
    }
    std::sort(c.stages.begin(), c.stages.end());
    c.stages.erase(std::unique(c.stages.begin(), c.stages.end()), c.stages.end());
  } else {
    c.stages = {Stage::extract, Stage::metrics};
    if (!c.ratings.empty()) c.stages.push_back(Stage::predictors);
    if (!c.shards.empty()) c.stages.push_back(Stage::count);
    c.stages.push_back(Stage::analyze);
  }
  for (auto& e : check_config(c)) v.errors.push_back(std::move(e));
  if (v.errors.empty()) v.config = std::move(c);
  return v;
}

// ---- pipeline -----------------------------------------------------------------

namespace {

std::string hash_path(const fs::path& p) {
  return fs::is_directory(p) ? hash::sha256_tree(p) : hash::sha256_file(p);
}

[[noreturn]] void rethrow_tagged(const std::string& prefix) {
  try {
    throw;
  } catch (const AlignmentError& e) {
    throw AlignmentError(prefix + e.what());
  } catch (const TimeoutError& e) {
    throw TimeoutError(prefix + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(prefix + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(prefix + e.what());
  } catch (const ScorerError& e) {
    throw ScorerError(prefix + e.what());
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  } catch (const std::exception& e) {
    throw DataError(prefix + e.what());
  }
}

void write_text(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << data;
  if (!out) throw DataError("cannot write " + p.string());
}

struct StageRecord {
  std::string input_key;
  std::map<std::string, std::string> outputs;
};

std::map<std::string, StageRecord> previous_stages(const fs::path& manifest) {
  std::map<std::string, StageRecord> out;
  if (!fs::exists(manifest)) return out;
  try {
    std::ifstream in(manifest);
    const auto j = ojson::parse(in);
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord r;
      r.input_key = s.at("input_key").get<std::string>();
      for (const auto& [file, h] : s.at("outputs").items()) r.outputs[file] = h.get<std::string>();
      out[name] = std::move(r);
    }
  } catch (const std::exception&) {
    // an unreadable manifest only disables skipping
    out.clear();
  }
  return out;
}

class Runner {
 public:
  explicit Runner(const RunConfig& c) : c_(c), out_(c.output) {}

  PipelineResult run() {
    fs::create_directories(out_);
    prev_ = previous_stages(out_ / kManifestFile);
    manifest_["tool_version"] = kToolVersion;
    manifest_["config_hash"] = hash::sha256_hex(c_.canonical());
    manifest_["inputs"] = ojson::object();
    manifest_["stages"] = ojson::object();
    manifest_["artifacts"] = ojson::object();
    hash_inputs();
    for (auto s : {Stage::extract, Stage::metrics, Stage::predictors, Stage::count, Stage::analyze}) {
      if (c_.has_stage(s)) run_stage(s);
    }
    write_manifest();
    result_.manifest = out_ / kManifestFile;
    return result_;
  }

 private:
  void hash_inputs() {
    auto add = [&](const char* role, const fs::path& p) {
      if (!p.empty() && fs::exists(p)) manifest_["inputs"][role] = hash_path(p);
    };
    if (c_.has_stage(Stage::extract)) {
      add("treebank", c_.treebank);
      add("lexicon", c_.lexicon);
    }
    if (c_.has_stage(Stage::metrics)) {
      if (auto corpus = oracle_corpus(c_.scorer)) add("oracle_corpus", *corpus);
      add("article_exceptions", c_.article_exceptions);
    }
    if (c_.has_stage(Stage::predictors)) {
      add("ratings", c_.ratings);
      add("pmi_treebank", c_.pmi_treebank.empty() ? c_.treebank : c_.pmi_treebank);
    }
    if (c_.has_stage(Stage::count)) add("shards", c_.shards);
  }

  static std::vector<std::string> outputs_of(Stage s, const RunConfig& c) {
    switch (s) {
      case Stage::extract:
        return {"cap.jsonl"};
      case Stage::metrics:
        return {"metrics.jsonl"};
      case Stage::predictors:
        return {"predictors.jsonl"};
      case Stage::count:
        if (c.batch_tokens > 0) return {"counts.tsv", "splits.json", "timeline.json"};
        return {"counts.tsv"};
      case Stage::analyze:
        return {"report"};
    }
    return {};
  }

  /// Artifacts a stage reads from earlier stages, present or not.
  static std::vector<std::string> upstream_of(Stage s) {
    switch (s) {
      case Stage::extract:
        return {};
      case Stage::metrics:
      case Stage::predictors:
      case Stage::count:
        return {"cap.jsonl"};
      case Stage::analyze:
        return {"cap.jsonl", "metrics.jsonl", "predictors.jsonl", "counts.tsv", "splits.json"};
    }
    return {};
  }

  std::string input_key(Stage s) {
    std::ostringstream key;
    key << kToolVersion << '\n' << to_string(s) << '\n' << c_.canonical();
    for (const auto& [role, h] : manifest_["inputs"].items()) key << role << '=' << h.get<std::string>() << '\n';
    for (const auto& name : upstream_of(s)) {
      const auto p = out_ / name;
      key << name << '=' << (fs::exists(p) ? hash_path(p) : std::string("absent")) << '\n';
    }
    return hash::sha256_hex(key.str());
  }

  void require(const std::string& name, Stage s) const {
    if (!fs::exists(out_ / name))
      throw DataError(std::string(to_string(s)) + " needs " + (out_ / name).string() +
                      "; run the stage that produces it first");
  }

  void run_stage(Stage s) {
    const std::string name = to_string(s);
    const auto key = input_key(s);
    const auto outputs = outputs_of(s, c_);
    if (const auto it = prev_.find(name); it != prev_.end() && it->second.input_key == key) {
      bool intact = it->second.outputs.size() == outputs.size();
      for (const auto& o : outputs) {
        const auto p = out_ / o;
        const auto h = it->second.outputs.find(o);
        intact = intact && h != it->second.outputs.end() && fs::exists(p) && hash_path(p) == h->second;
      }
      if (intact) {
        record(name, key, it->second.outputs);
        result_.skipped.push_back(name);
        return;
      }
    }
    const auto staging = out_ / ".staging" / name;
    fs::remove_all(staging);
    fs::create_directories(staging);
    try {
      execute(s, staging);
    } catch (...) {
      const auto quarantine = out_ / "quarantine" / name;
      std::error_code ec;
      fs::remove_all(quarantine, ec);
      fs::create_directories(quarantine.parent_path(), ec);
      fs::rename(staging, quarantine, ec);
      rethrow_tagged("stage '" + name + "' failed: ");
    }
    std::map<std::string, std::string> hashes;
    for (const auto& o : outputs) {
      const auto from = staging / o;
      const auto to = out_ / o;
      if (!fs::exists(from)) throw DataError("stage '" + name + "' did not produce " + o);
      fs::remove_all(to);
      fs::rename(from, to);
      hashes[o] = hash_path(to);
    }
    fs::remove_all(staging);
    std::error_code ec;
    fs::remove(out_ / ".staging", ec);  // only succeeds when empty
    record(name, key, hashes);
    result_.ran.push_back(name);
    write_manifest();
  }

  void record(const std::string& stage, const std::string& key, const std::map<std::string, std::string>& outputs) {
    ojson s;
    s["input_key"] = key;
    s["outputs"] = ojson::object();
    for (const auto& [o, h] : outputs) {
      s["outputs"][o] = h;
      manifest_["artifacts"][o] = h;
    }
    manifest_["stages"][stage] = s;
  }

  void write_manifest() const { write_text(out_ / kManifestFile, manifest_.dump(2) + "\n"); }

  [[nodiscard]] text::NormalizeOptions normalize() const { return {c_.lowercase, c_.strip_punct}; }

  void execute(Stage s, const fs::path& dir) {
    switch (s) {
      case Stage::extract: {
        const auto lexicon = cap::load_lexicon(c_.lexicon);
        const auto items = cap::extract_directory(c_.treebank, lexicon, {c_.include_propn}, c_.workers);
        std::ofstream out(dir / "cap.jsonl", std::ios::binary);
        cap::write_jsonl(out, items);
        break;
      }
      case Stage::metrics: {
        require("cap.jsonl", s);
        const auto items = cap::read_jsonl(out_ / "cap.jsonl");
        scoring::RemoteOptions ro;
        ro.timeout = std::chrono::milliseconds(c_.timeout_ms);
        ro.retries = c_.retries;
        const auto scorer = scoring::scorer_from_spec(c_.scorer, ro);
        std::optional<cap::ArticleRules> rules;
        if (!c_.article_exceptions.empty()) rules = cap::ArticleRules::load(c_.article_exceptions);
        const auto records = metrics::compute_all(
            items, *scorer, {c_.random_contexts, c_.seed.value_or(0), c_.workers, rules ? &*rules : nullptr});
        std::ofstream out(dir / "metrics.jsonl", std::ios::binary);
        metrics::write_jsonl(out, records);
        break;
      }
      case Stage::predictors: {
        require("cap.jsonl", s);
        const auto items = cap::read_jsonl(out_ / "cap.jsonl");
        const auto table = predictors::pmi_table_from_conllu(
            c_.pmi_treebank.empty() ? c_.treebank : c_.pmi_treebank, c_.pmi_alpha, c_.workers);
        const auto ratings = predictors::SubjectivityRatings::load(c_.ratings);
        std::ofstream out(dir / "predictors.jsonl", std::ios::binary);
        predictors::write_jsonl(out, predictors::score_items(items, &table, &ratings));
        break;
      }
      case Stage::count: {
        require("cap.jsonl", s);
        const auto items = cap::read_jsonl(out_ / "cap.jsonl");
        const auto index = ngram::TargetIndex::build(items, normalize());
        const auto shards = ngram::list_shards(c_.shards);
        ngram::CountOptions co;
        co.cross_documents = c_.cross_documents;
        co.chunk_bytes = c_.chunk_bytes;
        co.jsonl_field = c_.jsonl_field;
        co.workers = c_.workers;
        ngram::NgramCounts counts;
        if (c_.batch_tokens > 0) {
          ngram::TimelineOptions to;
          to.batch_tokens = c_.batch_tokens;
          to.checkpoint_dir = out_ / "checkpoints";
          const auto run = ngram::build_timeline_files(shards, index, co, to);
          counts = run.timeline.final_counts();
          write_text(dir / "timeline.json", ngram::timeline_summary_json(run.timeline, index) + "\n");
          write_text(dir / "splits.json",
                     ngram::splits_json(run.timeline, ngram::log_spaced_checkpoints(run.timeline.num_batches()),
                                        items, index) +
                         "\n");
          fs::remove_all(to.checkpoint_dir);
        } else {
          counts = ngram::count_files(shards, index, co);
        }
        std::ofstream out(dir / "counts.tsv", std::ios::binary);
        ngram::write_counts_tsv(out, counts, index);
        break;
      }
      case Stage::analyze: {
        require("metrics.jsonl", s);
        analysis::ReportInputs in;
        in.series.checkpoints.push_back({"final", metrics::read_jsonl(out_ / "metrics.jsonl")});
        in.normalize = normalize();
        if (fs::exists(out_ / "cap.jsonl")) in.corpus = cap::read_jsonl(out_ / "cap.jsonl");
        if (fs::exists(out_ / "counts.tsv")) in.counts = ngram::read_counts_tsv(out_ / "counts.tsv");
        if (fs::exists(out_ / "predictors.jsonl")) in.predictors = predictors::read_jsonl(out_ / "predictors.jsonl");
        if (fs::exists(out_ / "splits.json")) in.splits = analysis::read_splits_json(out_ / "splits.json");
        analysis::emit_report(in, dir / "report");
        break;
      }
    }
  }

  const RunConfig& c_;
  fs::path out_;
  std::map<std::string, StageRecord> prev_;
  ojson manifest_;
  PipelineResult result_;
};

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
  const auto errors = check_config(config);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw UsageError(msg);
  }
  return Runner(config).run();
}

}  // namespace aoplab::pipeline
