#include "cpmi/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpmi/dataset.hpp"
#include "cpmi/hash.hpp"
#include "cpmi/hypotheses.hpp"
#include "cpmi/manifest.hpp"
#include "cpmi/ngram.hpp"
#include "cpmi/remote.hpp"
#include "cpmi/scorers.hpp"
#include "cpmi/stats.hpp"
#include "cpmi/textseq.hpp"

namespace cpmi {

namespace {

namespace fs = std::filesystem;

const std::string kDefaultRegistry = std::string(CPMI_DATA_DIR) + "/registry/fed_turn_level.json";

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Applies a JSON config file as option defaults, so that command-line flags
// and environment variables still take precedence.
void apply_config_defaults(CLI::App& app, const std::string& path) {
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "config " + path + ": " + e.what());
  }
  if (!config.is_object()) throw Error(ErrorCode::ParseError, "config " + path + ": expected an object");
  for (const auto& [key, value] : config.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw Error(ErrorCode::InvalidArgument, "config " + path + ": unknown option \"" + key + "\"");
    }
    if (value.is_array()) {
      std::vector<std::string> items;
      for (const auto& v : value) items.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      opt->default_val(items);
    } else {
      opt->default_val(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
}

// Scans raw args for "--config PATH" / "--config=PATH" before parsing.
std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].starts_with("--config=")) return args[i].substr(9);
  }
  return std::nullopt;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string line = "cpmi";
  for (const auto& a : args) line += " " + a;
  return line;
}

// -------------------------------------------------------------- train-lm

struct TrainArgs {
  std::string corpus;
  int order = 3;
  double k = 1.0;
  std::string out;
  std::string holdout;
  std::string separator{kDefaultSeparator};
  bool no_separator_vocab = false;
  std::string text_dump;
};

std::vector<TokenStream> read_corpus(const std::string& path, const std::string& separator) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open corpus " + path);
  std::vector<TokenStream> corpus;
  std::string line;
  while (std::getline(in, line)) {
    TokenStream tokens = tokenize(line, separator);
    if (!tokens.empty()) corpus.push_back(std::move(tokens));
  }
  return corpus;
}

int cmd_train_lm(const TrainArgs& a, std::ostream& out) {
  const std::vector<TokenStream> corpus = read_corpus(a.corpus, a.separator);
  NGramTrainOptions options;
  options.order = a.order;
  options.smoothing_k = a.k;
  options.separator = a.separator;
  options.separator_in_vocab = !a.no_separator_vocab;
  const NGramModel model = train_ngram(corpus, options);
  save_ngram(model, a.out);
  if (!a.text_dump.empty()) write_file(a.text_dump, dump_ngram_text(model));

  out << "vocabulary size: " << model.vocab_size() << "\n";
  out << "contexts: " << model.counts().size() << "\n";
  if (!a.holdout.empty()) {
    const NGramProvider provider(model);
    double sum = 0.0;
    std::size_t tokens = 0;
    std::ifstream in(a.holdout);
    if (!in) throw Error(ErrorCode::IoError, "cannot open holdout " + a.holdout);
    std::string line;
    while (std::getline(in, line)) {
      if (tokenize(line, a.separator).empty()) continue;
      const LLResult r = provider.loglikelihood(line);
      sum += r.sum_ll;
      tokens += r.num_tokens;
    }
    if (tokens == 0) throw Error(ErrorCode::EmptyCorpus, "holdout has no tokens");
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.6f", sum / static_cast<double>(tokens));
    out << "held-out avg_ll: " << buffer << " (" << tokens << " tokens)\n";
  }
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ score

struct ScoreArgs {
  std::string dataset;
  std::string provider;
  std::string scorer = "cpmi";
  std::string ll_mode = "avg";
  std::string registry = kDefaultRegistry;
  std::string out;
  std::string manifest;
  std::string record_fixture;
  std::string separator{kDefaultSeparator};
  bool no_separator = false;
  bool no_hypothesis_separator = false;
  bool negate_cpmi = false;
  bool mean_hypotheses = false;
  bool cache = false;
  bool strict = false;
  bool lenient_registry = false;
  int jobs = 1;
  int timeout_ms = 30000;
  std::size_t max_batch = 32;
};

int cmd_score(const ScoreArgs& a, const std::vector<std::string>& raw_args, std::ostream& out,
              std::ostream& err) {
  const std::string started = utc_timestamp();

  RegistryLoadOptions registry_options;
  registry_options.strict = !a.lenient_registry;
  registry_options.separator = a.separator;
  const Registry registry = load_registry(a.registry, registry_options);

  FedLoadOptions fed_options;
  fed_options.separator = a.separator;
  const FedLoadResult dataset = load_fed(a.dataset, fed_options);
  const std::vector<ScoringInput> inputs = to_scoring_inputs(dataset.samples);

  ProviderOpenOptions provider_options;
  provider_options.separator = a.separator;
  provider_options.timeout = std::chrono::milliseconds(a.timeout_ms);
  provider_options.max_batch_size = a.max_batch;
  const OpenedProvider opened = open_provider(a.provider, provider_options);

  auto counting = std::make_shared<const CountingProvider>(opened.provider);
  ProviderPtr provider = counting;
  std::shared_ptr<const CachedProvider> cache;
  if (a.cache) {
    cache = std::make_shared<const CachedProvider>(provider);
    provider = cache;
  }
  std::shared_ptr<const RecordingProvider> recorder;
  if (!a.record_fixture.empty()) {
    recorder = std::make_shared<const RecordingProvider>(provider);
    provider = recorder;
  }

  ScoreDatasetOptions options;
  options.scorer = *parse_scorer_kind(a.scorer);
  options.config.ll_mode = *parse_ll_mode(a.ll_mode);
  options.config.sequence.separator = a.separator;
  options.config.sequence.use_separator = !a.no_separator;
  options.config.sequence.separator_before_hypothesis = !a.no_hypothesis_separator;
  options.config.negate_cpmi = a.negate_cpmi;
  options.config.mean_hypotheses = a.mean_hypotheses;
  options.strict = a.strict;
  options.jobs = a.jobs;

  const ScoreRun run = score_dataset(*provider, inputs, registry, options);
  if (run.records.empty() && !run.failures.empty()) {
    const SampleFailure& first = run.failures.front();
    throw Error(first.code, "every sample failed; first: sample " + first.sample_id + ": " +
                                first.message);
  }

  RunManifest manifest;
  manifest.identity["format"] = "cpmi-scores/1";
  manifest.identity["provider"] = opened.descriptor;
  manifest.identity["scorer"] = a.scorer;
  manifest.identity["ll_mode"] = a.ll_mode;
  manifest.identity["separator"] = a.separator;
  manifest.identity["use_separator"] = !a.no_separator;
  manifest.identity["separator_before_hypothesis"] = !a.no_hypothesis_separator;
  manifest.identity["negate_cpmi"] = a.negate_cpmi;
  manifest.identity["mean_hypotheses"] = a.mean_hypotheses;
  manifest.identity["strict"] = a.strict;
  manifest.identity["registry_sha256"] = sha256_file(a.registry);
  manifest.identity["dataset_sha256"] = sha256_file(a.dataset);
  manifest.identity["dataset"] = {{"loaded", dataset.samples.size()},
                                  {"excluded", dataset.excluded.size()},
                                  {"skipped_dialogue_level", dataset.skipped_dialogue_level}};
  auto exclusions = nlohmann::ordered_json::array();
  for (const auto& e : dataset.excluded) {
    exclusions.push_back({{"index", e.index}, {"sample_id", e.sample_id}, {"reason", e.reason}});
  }
  manifest.identity["exclusions"] = std::move(exclusions);

  manifest.run["command_line"] = join_args(raw_args);
  manifest.run["started_at"] = started;
  manifest.run["jobs"] = a.jobs;
  manifest.run["cache"] = a.cache;
  manifest.run["paths"] = {{"dataset", a.dataset}, {"registry", a.registry},
                           {"provider", a.provider}, {"out", a.out}};
  manifest.run["provider_calls"] = counting->calls();
  if (cache) {
    const CacheCounters c = cache->counters();
    manifest.run["cache_counters"] = {
        {"hits", c.hits}, {"misses", c.misses}, {"inner_calls", c.inner_calls}};
  }
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : run.failures) {
    failures.push_back({{"index", f.index},
                        {"sample_id", f.sample_id},
                        {"error", std::string(to_string(f.code))},
                        {"message", f.message}});
  }
  manifest.run["failures"] = std::move(failures);
  manifest.run["finished_at"] = utc_timestamp();

  const std::string hash = manifest.hash();
  write_file(a.out, format_scores(run.records, hash));
  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  write_file(manifest_path, manifest.to_json());
  if (recorder) write_fixture(a.record_fixture, recorder->recorded());

  out << "scored " << inputs.size() - run.failures.size() << "/" << inputs.size()
      << " samples x " << registry.size() << " dimensions -> " << run.records.size()
      << " records\n";
  out << "provider calls: " << counting->calls() << "\n";
  if (cache) {
    const CacheCounters c = cache->counters();
    out << "cache: hits " << c.hits << ", misses " << c.misses << ", inner calls "
        << c.inner_calls << "\n";
  }
  out << "manifest " << hash << " -> " << manifest_path << "\n";
  for (const auto& f : run.failures) {
    err << "excluded sample " << f.sample_id << ": " << f.message << "\n";
  }
  return kExitOk;
}

// -------------------------------------------------------------- correlate

struct CorrelateArgs {
  std::vector<std::string> scores;
  std::string dataset;
  std::string registry;
  std::string out_md;
  std::string out_json;
  std::string rating_map;
  std::string separator{kDefaultSeparator};
};

int cmd_correlate(const CorrelateArgs& a, std::ostream& out) {
  std::optional<Registry> registry;
  if (!a.registry.empty()) {
    RegistryLoadOptions registry_options;
    registry_options.separator = a.separator;
    registry = load_registry(a.registry, registry_options);
  }
  FedLoadOptions fed_options;
  fed_options.separator = a.separator;
  fed_options.registry = registry ? &*registry : nullptr;
  const FedLoadResult dataset = load_fed(a.dataset, fed_options);
  const RatingMapping mapping =
      a.rating_map.empty() ? RatingMapping{} : parse_rating_mapping(a.rating_map);
  const AggregationResult labels = aggregate_labels(dataset.samples, mapping);

  std::vector<CorrelationTable> tables;
  std::vector<std::string> manifests;
  for (const auto& path : a.scores) {
    const ScoresFile file = read_scores(path);
    if (file.records.empty()) throw Error(ErrorCode::SchemaError, path + ": no score records");
    std::vector<CorrelationTable> file_tables;
    try {
      file_tables = correlate_run(file.records, labels.labels);
    } catch (const Error& e) {
      throw e.with_context(path);
    }
    for (auto& table : file_tables) {
      const std::string base = table.scorer;
      for (int suffix = 2; std::any_of(tables.begin(), tables.end(),
                                       [&](const auto& t) { return t.scorer == table.scorer; });
           ++suffix) {
        table.scorer = base + "#" + std::to_string(suffix);
      }
      tables.push_back(std::move(table));
    }
    for (const auto& m : file.manifests) {
      if (std::find(manifests.begin(), manifests.end(), m) == manifests.end()) manifests.push_back(m);
    }
  }

  const std::string markdown = render_report(tables, ReportFormat::Markdown, manifests);
  if (!a.out_md.empty()) write_file(a.out_md, markdown);
  if (!a.out_json.empty()) {
    nlohmann::ordered_json report =
        nlohmann::ordered_json::parse(render_report(tables, ReportFormat::Json, manifests));
    report["dataset"] = {{"loaded", dataset.samples.size()},
                         {"excluded", dataset.excluded.size()},
                         {"dropped_pairs", labels.dropped_pairs}};
    write_file(a.out_json, report.dump(2) + "\n");
  }
  out << markdown;
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::RemoteError:
    case ErrorCode::FixtureMiss:
    case ErrorCode::EmptySequence:
      return kExitProvider;
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    default:
      return kExitData;
  }
}

OpenedProvider open_provider(std::string_view spec, const ProviderOpenOptions& options) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "provider must be ngram:PATH, fixture:PATH or remote:URL, got \"" +
                    std::string(spec) + "\"");
  }
  const std::string kind(spec.substr(0, colon));
  const std::string target(spec.substr(colon + 1));
  OpenedProvider opened;
  if (kind == "ngram") {
    auto provider = std::make_shared<const NGramProvider>(load_ngram(target), target);
    opened.descriptor = provider->describe();
    opened.provider = std::move(provider);
  } else if (kind == "fixture") {
    auto provider = std::make_shared<const FixtureProvider>(read_fixture(target), target);
    opened.descriptor = provider->describe();
    opened.provider = std::move(provider);
  } else if (kind == "remote") {
    RemoteOptions remote;
    remote.url = target;
    remote.separator = options.separator;
    remote.timeout = options.timeout;
    remote.max_batch_size = options.max_batch_size;
    auto provider = std::make_shared<const RemoteProvider>(remote);
    opened.descriptor = provider->describe();
    opened.descriptor["info"] = provider->fetch_info();
    opened.provider = std::move(provider);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown provider kind \"" + kind + "\"");
  }
  return opened;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-free dialogue evaluation with conditional PMI scorers", "cpmi"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train-lm", "Train the built-in n-gram language model");
  train_cmd->add_option("--corpus", train.corpus, "One sequence per line")->required();
  train_cmd->add_option("--order", train.order, "n-gram order")->check(CLI::Range(1, 16));
  train_cmd->add_option("--k", train.k, "Add-k smoothing constant")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  train_cmd->add_option("--holdout", train.holdout, "Report avg_ll on this file");
  train_cmd->add_option("--separator", train.separator)->envname("CPMI_SEPARATOR");
  train_cmd->add_flag("--no-separator-vocab", train.no_separator_vocab,
                      "Do not add the separator to the vocabulary");
  train_cmd->add_option("--text-dump", train.text_dump, "Also write the text dump");
  train_cmd->add_option("--config", "JSON file of option defaults");

  ScoreArgs score;
  CLI::App* score_cmd = app.add_subcommand("score", "Score a dataset with one scorer");
  score_cmd->add_option("--dataset", score.dataset, "FED turn-level JSON")->required();
  score_cmd->add_option("--provider", score.provider, "ngram:PATH | fixture:PATH | remote:URL")
      ->envname("CPMI_PROVIDER")
      ->required();
  score_cmd->add_option("--scorer", score.scorer)
      ->check(CLI::IsMember({"nll", "cpmi", "cpmi-sym"}));
  score_cmd->add_option("--ll-mode", score.ll_mode)->check(CLI::IsMember({"avg", "sum"}));
  score_cmd->add_option("--registry", score.registry, "Hypothesis registry JSON");
  score_cmd->add_option("--out", score.out, "Scores file (JSON lines)")->required();
  score_cmd->add_option("--manifest", score.manifest, "Manifest path (default OUT.manifest.json)");
  score_cmd->add_option("--record-fixture", score.record_fixture,
                        "Write every queried LL to a fixture file");
  score_cmd->add_option("--separator", score.separator)->envname("CPMI_SEPARATOR");
  score_cmd->add_flag("--no-separator", score.no_separator, "Join turns with a space");
  score_cmd->add_flag("--no-hypothesis-separator", score.no_hypothesis_separator,
                      "Append hypotheses with a space");
  score_cmd->add_flag("--negate-cpmi", score.negate_cpmi, "Flip the C-PMI sign");
  score_cmd->add_flag("--mean-hypotheses", score.mean_hypotheses,
                      "Average instead of sum over hypotheses");
  score_cmd->add_flag("--cache", score.cache, "Memoize provider queries");
  score_cmd->add_flag("--strict", score.strict, "Fail on the first bad sample");
  score_cmd->add_flag("--lenient-registry", score.lenient_registry,
                      "Ignore unknown registry keys");
  score_cmd->add_option("--jobs", score.jobs, "Worker threads (0 = all cores)")
      ->envname("CPMI_JOBS")
      ->check(CLI::NonNegativeNumber);
  score_cmd->add_option("--timeout-ms", score.timeout_ms, "Remote timeout")
      ->check(CLI::PositiveNumber);
  score_cmd->add_option("--max-batch", score.max_batch, "Remote max batch size")
      ->check(CLI::PositiveNumber);
  score_cmd->add_option("--config", "JSON file of option defaults");

  CorrelateArgs correlate;
  CLI::App* correlate_cmd =
      app.add_subcommand("correlate", "Spearman correlation of scores with human labels");
  correlate_cmd->add_option("--scores", correlate.scores, "Scores files")->required();
  correlate_cmd->add_option("--dataset", correlate.dataset, "FED turn-level JSON")->required();
  correlate_cmd->add_option("--registry", correlate.registry,
                            "Validate label names against this registry");
  correlate_cmd->add_option("--out-md", correlate.out_md);
  correlate_cmd->add_option("--out-json", correlate.out_json);
  correlate_cmd->add_option("--rating-map", correlate.rating_map,
                            "e.g. No=0,Somewhat=1,Yes=2");
  correlate_cmd->add_option("--separator", correlate.separator)->envname("CPMI_SEPARATOR");
  correlate_cmd->add_option("--config", "JSON file of option defaults");

  try {
    if (const auto config = find_config_arg(args)) {
      for (CLI::App* sub : {train_cmd, score_cmd, correlate_cmd}) {
        if (std::find(args.begin(), args.end(), sub->get_name()) != args.end()) {
          apply_config_defaults(*sub, *config);
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (CLI::App* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      if (!fs::exists(train.corpus)) {
        err << "error: corpus not found: " << train.corpus << "\n";
        return kExitUsage;
      }
      return cmd_train_lm(train, out);
    }
    if (*score_cmd) {
      if (!fs::exists(score.dataset)) {
        err << "error: dataset not found: " << score.dataset << "\n";
        return kExitUsage;
      }
      return cmd_score(score, args, out, err);
    }
    if (*correlate_cmd) return cmd_correlate(correlate, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace cpmi
