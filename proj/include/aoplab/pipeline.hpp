#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aoplab/ngram.hpp"

namespace aoplab::pipeline {

enum class Stage { extract, metrics, predictors, count, analyze };
const char* to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view name);

struct RunConfig {
  // [paths]
  std::filesystem::path treebank;      // CoNLL-U file or directory
  std::filesystem::path lexicon;
  std::filesystem::path article_exceptions;  // optional, replaces the bundled a/an table
  std::filesystem::path ratings;       // optional
  std::filesystem::path pmi_treebank;  // optional, defaults to treebank
  std::filesystem::path shards;        // optional text corpus for counting
  std::filesystem::path output;
  // [extract]
  bool include_propn = false;
  // [scorer]
  std::string scorer;  // oracle:... or remote:...
  int timeout_ms = 30000;
  int retries = 0;
  // [sampling]
  std::size_t random_contexts = 0;
  std::optional<std::uint64_t> seed;
  // [predictors]
  double pmi_alpha = 0.0;
  // [count]
  bool lowercase = true;
  bool strip_punct = true;
  bool cross_documents = false;
  std::uint64_t batch_tokens = 0;  // 0: no timeline
  std::size_t chunk_bytes = std::size_t{1} << 22;
  std::string jsonl_field;
  // [run]
  std::vector<Stage> stages;
  int workers = 0;

  [[nodiscard]] bool has_stage(Stage s) const;
  /// Canonical text of every setting that can change an output. Paths
  /// and the worker count are left out.
  [[nodiscard]] std::string canonical() const;
};

struct Validation {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;
};

/// Parses an INI file with sections [paths], [extract], [scorer],
/// [sampling], [predictors], [count] and [run]. Relative paths resolve
/// against the config file's directory. Every problem is reported.
Validation validate_config(const std::filesystem::path& path);
/// Checks a config assembled in code.
std::vector<std::string> check_config(const RunConfig& config);

struct PipelineResult {
  std::vector<std::string> ran;
  std::vector<std::string> skipped;
  std::filesystem::path manifest;
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Runs the configured stages in dependency order. A stage whose input key
/// matches the previous manifest and whose outputs are intact is skipped.
/// A failing stage's partial outputs are moved under quarantine/ and the
/// error names the stage.
PipelineResult run_pipeline(const RunConfig& config);

}  // namespace aoplab::pipeline
