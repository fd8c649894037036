// trend_cli: runs the trend pipeline end to end or one stage at a time.
//
// Exit status: 0 ok, 1 invalid input or config, 2 I/O or completion-service
// failure, 64 usage error.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "trendscope/evaluation.hpp"
#include "trendscope/pipeline.hpp"

using namespace trendscope;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;

struct Paths {
  std::string input;
  std::string output;
  std::string candidates;
  std::string consolidated;
  std::string trends;
  std::string verdicts;
  std::string manifest;
  std::string labels;
  std::string spec;
  std::string candidates_out;
  std::string consolidated_out;
  std::string verdicts_out;
};

// Flags are bound straight to the config, which already holds the values of
// --config, so anything given on the command line wins.
std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return std::string(a.substr(9));
  }
  return std::nullopt;
}

void add_common(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--config", "JSON config file; flags override its values");
  sub->add_option("--workers", cfg.workers, "Worker threads inside each stage")->check(CLI::PositiveNumber);
}

void add_llm(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--llm-backend", cfg.llm_backend, "Completion backend")
      ->check(CLI::IsMember({"http", "replay", "mock"}));
  sub->add_option("--llm-fixtures", cfg.llm_fixtures, "Recorded completions for the replay backend");
  sub->add_option("--llm-record", cfg.llm_record, "Append every completion to this fixture file");
  sub->add_option("--llm-timeout-ms", cfg.llm_timeout_ms, "Per-request timeout (http backend)");
  sub->add_option("--llm-concurrency", cfg.llm_concurrency, "Maximum completions in flight");
  sub->add_option("--llm-batch-size", cfg.llm_batch_size, "Topics per filter request");
}

void add_store(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--retention-hours", cfg.retention_hours, "Hours of history kept per topic");
  sub->add_option("--snapshot-path", cfg.snapshot_path, "Topic store snapshot file");
}

void add_extract(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--extractor", cfg.extractor, "Topic extractor")
      ->check(CLI::IsMember({"passthrough", "mock", "llm"}));
  sub->add_option("--topic-dict", cfg.topic_dict, "Phrase dictionary for the mock extractor");
  sub->add_option("--extract-prompt", cfg.extract_prompt, "Prompt template for the llm extractor");
  sub->add_option("--max-topics-per-post", cfg.max_topics_per_post, "Topics kept per post");
}

void add_detect(CLI::App* sub, PipelineConfig& cfg) {
  auto& d = cfg.detection;
  sub->add_option("--agg-hours", d.agg_hours, "T: trailing hours aggregated into num_user(t)");
  sub->add_option("--windows", d.windows, "N values in hours, strictly increasing")->delimiter(',');
  sub->add_option("--lambda", d.lambda, "Window weight decay");
  sub->add_option("--min-uu", d.min_uu, "M: minimum unique users at t");
  sub->add_option("--score-threshold", d.score_threshold, "Trend score needed to publish");
  sub->add_option("--baseline-floor", d.baseline_floor, "Lower bound on the lift denominator");
  sub->add_option("--lift-cap", d.lift_cap, "Upper bound on a single lift");
}

void add_schedule(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--at-hour", cfg.at_hour, "Detect at this UTC hour index only");
  sub->add_option("--every-hours", cfg.every_hours, "Detect every k hours over a span (0: last hour only)");
  sub->add_option("--from-hour", cfg.from_hour, "First detection hour of a span");
  sub->add_option("--to-hour", cfg.to_hour, "Last detection hour of a span (default: last data hour)");
  sub->add_option("--warmup-hours", cfg.warmup_hours, "Hours after the first event before a span starts");
}

void add_postprocess(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--sensitive-mode", cfg.sensitive_mode, "Sensitive-topic filter")->check(CLI::IsMember({"rules", "llm"}));
  sub->add_option("--blocklist", cfg.blocklist, "Blocked phrases, one per line");
  sub->add_option("--sensitive-prompt", cfg.sensitive_prompt, "Prompt template for the sensitive filter");
  sub->add_option("--generic-mode", cfg.generic_mode, "Generic-topic filter")->check(CLI::IsMember({"rules", "llm"}));
  sub->add_option("--generic-list", cfg.generic_list, "Generic phrases, one per line");
  sub->add_option("--generic-prompt", cfg.generic_prompt, "Prompt template for the generic filter");
  sub->add_option("--consolidate-mode", cfg.consolidate_mode, "Topic consolidation")
      ->check(CLI::IsMember({"rules", "llm"}));
  sub->add_option("--consolidate-prompt", cfg.consolidate_prompt, "Prompt template for consolidation");
  sub->add_option("--consolidate-jaccard", cfg.consolidate_jaccard, "Token Jaccard cutoff for rules consolidation");
  sub->add_option("--category-keywords", cfg.category_keywords, "JSON object mapping keywords to categories");
}

void add_enrich(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--describe-mode", cfg.describe_mode, "Video describer")->check(CLI::IsMember({"template", "llm"}));
  sub->add_option("--describe-prompt", cfg.describe_prompt, "Prompt template for video descriptions");
  sub->add_option("--synthesize-mode", cfg.synthesize_mode, "Trend synthesizer")
      ->check(CLI::IsMember({"template", "llm"}));
  sub->add_option("--synthesize-prompt", cfg.synthesize_prompt, "Prompt template for trend synthesis");
  sub->add_option("--reps-per-trend", cfg.reps_per_trend, "Representative videos per trend");
  sub->add_option("--category-keywords", cfg.category_keywords, "JSON object mapping keywords to categories");
}

void add_eval(CLI::App* sub, PipelineConfig& cfg) {
  sub->add_option("--match-window", cfg.match_window, "Hours after a burst ends that still count as a hit");
  sub->add_option("--thresholds", cfg.thresholds, "Score thresholds to sweep")->delimiter(',');
}

WarningSink counting_sink(std::atomic<std::size_t>& count) {
  return [&count](std::string_view msg) {
    ++count;
    std::cerr << "warning: " << msg << '\n';
  };
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failure on " + path);
}

std::optional<HourIndex> store_first_hour(const TopicStore& store) {
  std::optional<HourIndex> first;
  for (const auto& t : store.topics())
    if (auto r = store.seen_range(t); r && (!first || r->first < *first)) first = r->first;
  return first;
}

TopicStore load_store(const Paths& p, const PipelineConfig& cfg, std::vector<PostEvent>* events_out = nullptr) {
  if (!p.input.empty()) {
    auto events = read_events(p.input);
    auto store = build_store(events, cfg);
    if (events_out) *events_out = std::move(events);
    return store;
  }
  if (!cfg.snapshot_path.empty()) return TopicStore::load(cfg.snapshot_path);
  throw ValidationError("an extracted event file (--input) or --snapshot-path is required");
}

auto read_candidates(const std::string& path) { return read_jsonl(path, candidate_from_json); }
auto read_consolidated(const std::string& path) { return read_jsonl(path, consolidated_from_json); }

void write_candidates(const std::string& path, const std::vector<TrendCandidate>& c) {
  write_jsonl(path, c, [](const TrendCandidate& x) { return to_json(x); });
}
void write_consolidated(const std::string& path, const std::vector<ConsolidatedTrend>& c) {
  write_jsonl(path, c, [](const ConsolidatedTrend& x) { return to_json(x); });
}

// Removed candidates pair up with the verdicts that removed them.
void write_verdicts(const std::string& path, const std::vector<TrendCandidate>& candidates,
                    const PostprocessResult& post) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  std::vector<bool> used(candidates.size());
  for (const auto& v : post.verdicts) {
    HourIndex hour = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (!used[i] && candidates[i].topic == v.topic) {
        used[i] = true;
        hour = candidates[i].detect_hour;
        break;
      }
    out << verdict_json(v, hour).dump() << '\n';
  }
}

int cmd_ingest(const Paths& p) {
  auto events = read_events(p.input);
  write_events(p.output, events);
  std::cerr << "ingested " << events.size() << " events\n";
  return 0;
}

int cmd_extract(const Paths& p, const PipelineConfig& cfg, WarningSink warn) {
  auto components = make_components(cfg, warn);
  auto events = extract_stage(read_events(p.input), *components.extractor, cfg.workers);
  write_events(p.output, events);
  if (!cfg.snapshot_path.empty()) build_store(events, cfg).snapshot(cfg.snapshot_path);
  return 0;
}

int cmd_detect(const Paths& p, const PipelineConfig& cfg) {
  std::vector<PostEvent> events;
  const auto store = load_store(p, cfg, &events);
  const auto first = p.input.empty() ? store_first_hour(store) : first_hour(events);
  const auto hours = detection_hours(cfg, first, store.last_hour());
  write_candidates(p.output, detect_stage(store, cfg, hours));
  return 0;
}

int cmd_postprocess(const Paths& p, const PipelineConfig& cfg, WarningSink warn) {
  const auto candidates = read_candidates(p.candidates);
  const auto store = load_store(p, cfg);
  auto components = make_components(cfg, warn);
  const auto post = postprocess_stage(candidates, components, store, cfg);
  write_consolidated(p.output, post.trends);
  if (!p.verdicts.empty()) write_verdicts(p.verdicts, candidates, post);
  return 0;
}

int cmd_enrich(const Paths& p, const PipelineConfig& cfg, WarningSink warn) {
  const auto trends = read_consolidated(p.consolidated);
  const auto events = read_events(p.input);
  const auto store = build_store(events, cfg);
  auto components = make_components(cfg, warn);
  write_trends(p.output, enrich_stage(trends, events, store, components, cfg));
  return 0;
}

int cmd_run(const Paths& p, const PipelineConfig& cfg, WarningSink warn, const std::atomic<std::size_t>& warnings) {
  auto r = run_pipeline(read_events(p.input), cfg, warn);
  write_trends(p.output, r.trends);
  if (!p.candidates_out.empty()) write_candidates(p.candidates_out, r.candidates);
  if (!p.consolidated_out.empty()) write_consolidated(p.consolidated_out, r.post.trends);
  if (!p.verdicts_out.empty()) write_verdicts(p.verdicts_out, r.candidates, r.post);
  r.manifest["warnings"] = warnings.load();
  nlohmann::ordered_json outputs;
  outputs["trends"] = p.output;
  outputs["input"] = p.input;
  r.manifest["files"] = outputs;
  write_text(p.manifest.empty() ? p.output + ".manifest.json" : p.manifest, r.manifest.dump(2) + "\n");
  std::cerr << r.trends.size() << " trends from " << r.candidates.size() << " candidates\n";
  return 0;
}

int cmd_synth(const Paths& p, const PipelineConfig& cfg, bool seed_given) {
  auto spec = p.spec.empty() ? eval::reference_spec(cfg.seed) : eval::load_spec(p.spec);
  if (seed_given) spec.seed = cfg.seed;
  const auto stream = eval::generate_synthetic_stream(spec);
  write_events(p.output, stream.events);
  eval::write_labels(p.labels, stream.labels);
  std::cerr << stream.events.size() << " events, " << stream.labels.size() << " labelled bursts\n";
  return 0;
}

int cmd_eval(const Paths& p, const PipelineConfig& cfg) {
  const int sources = !p.trends.empty() + !p.consolidated.empty() + !p.candidates.empty();
  if (sources != 1) throw ValidationError("give exactly one of --trends, --consolidated, --candidates");
  const auto labels = eval::read_labels(p.labels);
  std::vector<eval::Detection> dets;
  eval::EvalReport report;
  if (!p.trends.empty()) {
    for (const auto& t : read_jsonl(p.trends, trend_from_json))
      dets.push_back({t.trend_name, {t.trend_name}, t.detection_time / kSecondsPerHour});
    report = eval::evaluate(dets, labels, cfg.match_window);
  } else if (!p.consolidated.empty()) {
    for (const auto& t : read_consolidated(p.consolidated)) dets.push_back(eval::detection_of(t));
    report = eval::evaluate(dets, labels, cfg.match_window);
  } else {
    const auto candidates = read_candidates(p.candidates);
    for (const auto& c : apply_precision_control(candidates, cfg.precision_control())) dets.push_back(eval::detection_of(c));
    report = eval::evaluate(dets, labels, cfg.match_window);
    report.per_threshold = eval::sweep_thresholds(candidates, labels, cfg.thresholds, cfg.match_window);
  }
  write_text(p.output, to_json(report).dump(2) + "\n");
  return 0;
}

int cmd_sweep(const Paths& p, const PipelineConfig& cfg) {
  const auto rows = eval::sweep_thresholds(read_candidates(p.candidates), eval::read_labels(p.labels), cfg.thresholds,
                                           cfg.match_window);
  write_text(p.output, eval::sweep_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig cfg;
  try {
    if (auto path = find_config_arg(argc, argv)) cfg = load_config(*path);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  CLI::App app{"Trend detection over short-video post streams"};
  app.name("trend_cli");
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  Paths p;

  auto* ingest = app.add_subcommand("ingest", "Validate raw events and write them in canonical form");
  ingest->add_option("--input", p.input, "Raw event JSONL")->required();
  ingest->add_option("--output", p.output, "Validated event JSONL")->required();
  add_common(ingest, cfg);

  auto* extract = app.add_subcommand("extract", "Attach extracted topics to every event");
  extract->add_option("--input", p.input, "Event JSONL")->required();
  extract->add_option("--output", p.output, "Event JSONL with topics")->required();
  add_common(extract, cfg);
  add_extract(extract, cfg);
  add_store(extract, cfg);
  add_llm(extract, cfg);

  auto* detect_cmd = app.add_subcommand("detect", "Score topic bursts and write candidates");
  detect_cmd->add_option("--input", p.input, "Event JSONL with topics (or use --snapshot-path)");
  detect_cmd->add_option("--output", p.output, "Candidate JSONL")->required();
  add_common(detect_cmd, cfg);
  add_store(detect_cmd, cfg);
  add_detect(detect_cmd, cfg);
  add_schedule(detect_cmd, cfg);

  auto* post = app.add_subcommand("postprocess", "Filter, threshold and consolidate candidates");
  post->add_option("--candidates", p.candidates, "Candidate JSONL")->required();
  post->add_option("--input", p.input, "Event JSONL with topics (or use --snapshot-path)");
  post->add_option("--output", p.output, "Consolidated trend JSONL")->required();
  post->add_option("--verdicts", p.verdicts, "Filter verdicts for removed candidates");
  add_common(post, cfg);
  add_store(post, cfg);
  add_detect(post, cfg);
  add_postprocess(post, cfg);
  add_llm(post, cfg);

  auto* enrich_cmd = app.add_subcommand("enrich", "Describe representative videos and write trend records");
  enrich_cmd->add_option("--consolidated", p.consolidated, "Consolidated trend JSONL")->required();
  enrich_cmd->add_option("--input", p.input, "Event JSONL with topics")->required();
  enrich_cmd->add_option("--output", p.output, "Trend JSONL")->required();
  add_common(enrich_cmd, cfg);
  add_store(enrich_cmd, cfg);
  enrich_cmd->add_option("--agg-hours", cfg.detection.agg_hours, "Trailing hours used for countries and videos");
  add_enrich(enrich_cmd, cfg);
  add_llm(enrich_cmd, cfg);

  auto* run = app.add_subcommand("run", "extract, detect, postprocess and enrich in one go");
  run->add_option("--input", p.input, "Event JSONL")->required();
  run->add_option("--output", p.output, "Trend JSONL")->required();
  run->add_option("--manifest", p.manifest, "Run manifest (default: <output>.manifest.json)");
  run->add_option("--candidates-out", p.candidates_out, "Also write the detection candidates");
  run->add_option("--consolidated-out", p.consolidated_out, "Also write the consolidated trends");
  run->add_option("--verdicts-out", p.verdicts_out, "Also write the filter verdicts");
  add_common(run, cfg);
  add_extract(run, cfg);
  add_store(run, cfg);
  add_detect(run, cfg);
  add_schedule(run, cfg);
  add_postprocess(run, cfg);
  // --category-keywords is registered by add_postprocess already
  run->add_option("--describe-mode", cfg.describe_mode, "Video describer")->check(CLI::IsMember({"template", "llm"}));
  run->add_option("--describe-prompt", cfg.describe_prompt, "Prompt template for video descriptions");
  run->add_option("--synthesize-mode", cfg.synthesize_mode, "Trend synthesizer")
      ->check(CLI::IsMember({"template", "llm"}));
  run->add_option("--synthesize-prompt", cfg.synthesize_prompt, "Prompt template for trend synthesis");
  run->add_option("--reps-per-trend", cfg.reps_per_trend, "Representative videos per trend");
  add_llm(run, cfg);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic stream with labelled bursts");
  synth->add_option("--spec", p.spec, "Synthetic spec JSON (default: the built-in reference suite)");
  synth->add_option("--output", p.output, "Event JSONL")->required();
  synth->add_option("--labels", p.labels, "Label JSONL")->required();
  synth->add_option("--seed", cfg.seed, "Generator seed (overrides the spec)");
  add_common(synth, cfg);

  auto* eval_cmd = app.add_subcommand("eval", "Score detections against burst labels");
  eval_cmd->add_option("--trends", p.trends, "Trend JSONL");
  eval_cmd->add_option("--consolidated", p.consolidated, "Consolidated trend JSONL");
  eval_cmd->add_option("--candidates", p.candidates, "Candidate JSONL (adds a threshold sweep)");
  eval_cmd->add_option("--labels", p.labels, "Label JSONL")->required();
  eval_cmd->add_option("--output", p.output, "Report JSON (default: stdout)");
  eval_cmd->add_option("--score-threshold", cfg.detection.score_threshold, "Threshold applied to --candidates");
  eval_cmd->add_option("--min-uu", cfg.detection.min_uu, "Minimum unique users applied to --candidates");
  add_common(eval_cmd, cfg);
  add_eval(eval_cmd, cfg);

  auto* sweep = app.add_subcommand("sweep", "Precision and coverage per score threshold, as CSV");
  sweep->add_option("--candidates", p.candidates, "Candidate JSONL")->required();
  sweep->add_option("--labels", p.labels, "Label JSONL")->required();
  sweep->add_option("--output", p.output, "CSV file (default: stdout)");
  add_common(sweep, cfg);
  add_eval(sweep, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  std::atomic<std::size_t> warnings{0};
  auto warn = counting_sink(warnings);
  try {
    cfg.validate();
    cfg.check_paths();
    if (app.got_subcommand(ingest)) return cmd_ingest(p);
    if (app.got_subcommand(extract)) return cmd_extract(p, cfg, warn);
    if (app.got_subcommand(detect_cmd)) return cmd_detect(p, cfg);
    if (app.got_subcommand(post)) return cmd_postprocess(p, cfg, warn);
    if (app.got_subcommand(enrich_cmd)) return cmd_enrich(p, cfg, warn);
    if (app.got_subcommand(run)) return cmd_run(p, cfg, warn, warnings);
    if (app.got_subcommand(synth)) return cmd_synth(p, cfg, synth->count("--seed") > 0);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(p, cfg);
    if (app.got_subcommand(sweep)) return cmd_sweep(p, cfg);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const llm::LlmError& e) {
    std::cerr << "error: completion service: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
