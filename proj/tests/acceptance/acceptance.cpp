// Acceptance gate. One PASS/FAIL line per criterion; exits non-zero when any
// criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "oracle.hpp"
#include "trendscope/evaluation.hpp"
#include "trendscope/pipeline.hpp"

using namespace trendscope;
namespace fs = std::filesystem;

namespace {

const std::string kFix = TRENDSCOPE_FIXTURES;
const std::string kCli = TRENDSCOPE_CLI;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << " -- " << o.detail << std::endl;
}

bool rel_close(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("trendscope_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string tmp(const std::string& name) { return (scratch() / name).string(); }

int cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>>" + tmp("cli_stderr.txt")).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- 1 ---------------------------------------------------------------------------------

Outcome formula_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261016);
  DetectionConfig cfg;
  double worst = 0;
  int compared = 0;
  for (int i = 0; i < 1000; ++i) {
    const int len = 1 + static_cast<int>(rng() % 200);
    std::vector<std::int64_t> values(static_cast<std::size_t>(len));
    const int scale = 1 + static_cast<int>(rng() % 500);
    for (auto& v : values) v = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(scale + 1));
    oracle::Series s;
    for (auto v : values) s.values.push_back(static_cast<double>(v));
    CountSeries series(1, values);
    for (long t = 1; t <= len; ++t) {
      const double got = trend_score(series, cfg, t);
      const double want = oracle::trend_score(s, cfg.windows, cfg.lambda, t, cfg.baseline_floor, cfg.lift_cap);
      const double err = got == want ? 0.0 : std::abs(got - want) / std::max(std::abs(want), 1e-300);
      worst = std::max(worst, err);
      ++compared;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, std::to_string(compared) + " scores over 1000 series, max rel err " + fmt(worst) +
                                            " (tol 1e-9), " + fmt(secs) + " s (limit 10 s)"};
}

// --- 2 ---------------------------------------------------------------------------------

Outcome analytic_identities() {
  std::vector<std::string> bad;
  DetectionConfig cfg;
  for (std::int64_t c : {1, 7, 30, 1000}) {
    CountSeries constant(1, std::vector<std::int64_t>(300, c));
    if (!rel_close(trend_score(constant, cfg, 300), 1.0, 1e-9)) bad.push_back("constant " + std::to_string(c));
  }
  for (double c : {0.5, 1.0, 2.75, 40.0}) {
    LiftProfile p;
    for (int n : cfg.windows) p.per_window.push_back({n, c, window_weight(n, cfg.lambda)});
    if (!rel_close(score_profile(p), c, 1e-9)) bad.push_back("equal lifts " + fmt(c));
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::int64_t> v(200);
    for (auto& x : v) x = static_cast<std::int64_t>(rng() % 100);
    CountSeries s(1, v);
    auto p = lift_profile(s, cfg, 200);
    const double score = score_profile(p);
    if (p.min_lift() == 0) {
      if (score != 0) bad.push_back("zero lift gives nonzero score");
      continue;
    }
    double lo = 1e300, hi = 0;
    for (const auto& w : p.per_window) lo = std::min(lo, w.lift), hi = std::max(hi, w.lift);
    if (score < lo * (1 - 1e-12) || score > hi * (1 + 1e-12)) bad.push_back("score outside lift range");
    for (std::int64_t k : {2, 3, 10}) {
      std::vector<std::int64_t> scaled = v;
      for (auto& x : scaled) x *= k;
      // keep every baseline above the floor so the floor cannot break scale invariance
      bool floored = false;
      for (int n : cfg.windows) floored |= moving_max_avg(s, n, 199) < cfg.baseline_floor;
      if (floored) continue;
      if (!rel_close(trend_score(CountSeries(1, scaled), cfg, 200), score, 1e-9)) bad.push_back("scale x" + std::to_string(k));
    }
  }
  CountSeries drop(1, std::vector<std::int64_t>(150, 40));
  auto vals = drop.values();
  vals.back() = 0;
  if (trend_score(CountSeries(1, vals), cfg, 150) != 0) bad.push_back("zero now gives nonzero score");
  return {bad.empty(), bad.empty() ? "constant=1, equal lifts=c, bounds, zero lift, scale invariance all within 1e-9"
                                   : std::to_string(bad.size()) + " violations, first: " + bad.front()};
}

// --- 3 ---------------------------------------------------------------------------------

Outcome worked_example() {
  DetectionConfig cfg;
  cfg.windows = {2};
  CountSeries s(1, {2, 2, 2, 2, 10});
  const double l = lift(s, 2, 5, cfg);
  return {l == 5.0, "lift(2,5) = " + fmt(l) + " (want exactly 5)"};
}

// --- 4 ---------------------------------------------------------------------------------

Outcome consolidation_example() {
  PipelineConfig cfg;
  cfg.extractor = "passthrough";
  auto events = read_events(kFix + "/consolidation_uu.jsonl");
  auto store = build_store(events, cfg);
  auto cands = detect(store, cfg.detection, *store.last_hour());
  std::set<std::string> names;
  for (const auto& c : cands) names.insert(c.topic.str());
  const std::set<std::string> want = {"world cup 2026", "world cup", "world cup 2026 qualifiers"};
  if (names != want) return {false, "detect did not yield the three variants"};
  auto out = consolidate(cands, TokenSetConsolidator(), store, cfg.detection.agg_hours);
  std::string uu;
  for (const auto& c : cands) uu += (uu.empty() ? "" : ", ") + c.topic.str() + "=" + std::to_string(c.uu_now);
  if (out.size() != 1) return {false, std::to_string(out.size()) + " trends instead of 1"};
  const bool ok = out[0].representative.str() == "world cup 2026" && out[0].members.size() == 3;
  return {ok, "one trend, representative \"" + out[0].representative.str() + "\" (UU " + uu + ")"};
}

// --- 5 ---------------------------------------------------------------------------------

Outcome threshold_sweep() {
  const auto spec = eval::load_spec(kFix + "/synthetic_reference.json");
  if (spec.seed != 42 || spec.n_topics != 200 || spec.bursts.size() != 20)
    return {false, "committed suite does not match the stated shape"};
  for (const auto& b : spec.bursts)
    if (b.peak < 5 || b.onset + b.duration > spec.horizon_hours - 48) return {false, "burst outside the stated shape"};

  auto stream = eval::generate_synthetic_stream(spec);
  PipelineConfig cfg;
  cfg.extractor = "passthrough";
  cfg.every_hours = 1;
  auto store = build_store(stream.events, cfg);
  const auto hours = detection_hours(cfg, first_hour(stream.events), store.last_hour());
  stream.events.clear();
  stream.events.shrink_to_fit();
  auto cands = detect_stage(store, cfg, hours);

  const std::vector<double> ths = {1.0, 1.4, 1.8, 2.2, 3.0};
  auto rows = eval::sweep_thresholds(cands, stream.labels, ths, cfg.match_window);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].coverage <= rows[i - 1].coverage;
  const auto& p10 = rows[0].precision;
  const auto& p18 = rows[2].precision;

  std::vector<eval::Detection> dets;
  for (const auto& c : apply_precision_control(cands, cfg.precision_control())) dets.push_back(eval::detection_of(c));
  auto r = eval::evaluate(dets, stream.labels, cfg.match_window);

  const bool ok = monotone && p10 && p18 && *p18 >= *p10 && *p18 >= 0.9 && r.recall_on_injected &&
                  *r.recall_on_injected >= 0.95 && r.mean_detection_latency_hours &&
                  *r.mean_detection_latency_hours <= 2.0;
  std::string cov;
  for (const auto& row : rows) cov += (cov.empty() ? "" : "/") + fmt(row.coverage);
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("null"); };
  return {ok, std::to_string(cands.size()) + " candidates over " + std::to_string(hours.size()) + " hours; coverage " +
                  cov + (monotone ? " (monotone)" : " (NOT monotone)") + "; precision(1.0)=" + opt(p10) +
                  " precision(1.8)=" + opt(p18) + " (>= 0.9), recall=" + opt(r.recall_on_injected) +
                  " (>= 0.95), latency=" + opt(r.mean_detection_latency_hours) + " h (<= 2)"};
}

// --- 6 ---------------------------------------------------------------------------------

Outcome determinism() {
  const std::string replay = " --llm-backend replay --llm-fixtures " + kFix + "/llm_fixtures.jsonl";
  const std::string files = " --topic-dict " + kFix + "/topic_dict.txt --category-keywords " + kFix + "/category_keywords.json";
  const std::string input = " --input " + kFix + "/events.jsonl";
  std::vector<std::string> outputs;
  for (int i = 0; i < 3; ++i) {
    const auto out = tmp("det_run" + std::to_string(i) + ".jsonl");
    if (cli("run" + input + " --output " + out + files + replay) != 0) return {false, "run failed"};
    outputs.push_back(slurp(out));
  }
  for (int w : {1, 8}) {
    const auto out = tmp("det_w" + std::to_string(w) + ".jsonl");
    if (cli("run" + input + " --output " + out + " --workers " + std::to_string(w) + files + replay) != 0)
      return {false, "run --workers failed"};
    outputs.push_back(slurp(out));
  }
  bool same = std::all_of(outputs.begin(), outputs.end(), [&](const std::string& s) { return s == outputs[0]; });
  const auto n_lines = std::count(outputs[0].begin(), outputs[0].end(), '\n');

  bool chained = cli("ingest" + input + " --output " + tmp("ch_ingest.jsonl")) == 0 &&
                 cli("extract --input " + tmp("ch_ingest.jsonl") + " --output " + tmp("ch_ex.jsonl") + " --topic-dict " +
                     kFix + "/topic_dict.txt" + replay) == 0 &&
                 cli("detect --input " + tmp("ch_ex.jsonl") + " --output " + tmp("ch_cands.jsonl")) == 0 &&
                 cli("postprocess --candidates " + tmp("ch_cands.jsonl") + " --input " + tmp("ch_ex.jsonl") +
                     " --output " + tmp("ch_cons.jsonl") + " --category-keywords " + kFix + "/category_keywords.json" +
                     replay) == 0 &&
                 cli("enrich --consolidated " + tmp("ch_cons.jsonl") + " --input " + tmp("ch_ex.jsonl") + " --output " +
                     tmp("ch_trends.jsonl") + " --category-keywords " + kFix + "/category_keywords.json" + replay) == 0;
  const bool chain_equal = chained && slurp(tmp("ch_trends.jsonl")) == outputs[0];
  return {same && chain_equal && n_lines > 0,
          std::to_string(n_lines) + " trends; 3 runs + workers {1,8} " + (same ? "identical" : "DIFFER") +
              "; chained stages " + (!chained ? "FAILED" : chain_equal ? "identical to run" : "DIFFER from run")};
}

// --- 7 ---------------------------------------------------------------------------------

Outcome store_properties() {
  auto events = read_events(kFix + "/events.jsonl");
  PipelineConfig cfg;
  PipelineConfig with_dict = cfg;
  with_dict.topic_dict = kFix + "/topic_dict.txt";
  auto dict_comps = make_components(with_dict, nullptr);
  events = extract_stage(std::move(events), *dict_comps.extractor, 1);
  const auto reference = build_store(events, cfg);
  const auto topics = reference.topics();
  const auto last = *reference.last_hour();

  auto answers = [&](const TopicStore& s) {
    std::vector<std::int64_t> out;
    for (const auto& t : topics) {
      auto v = s.series_view(t, last, 150, 3);
      out.insert(out.end(), v.begin(), v.end());
      out.push_back(static_cast<std::int64_t>(s.unique_users(t, last, 24)));
    }
    return out;
  };
  const auto want = answers(reference);

  std::mt19937_64 rng(100);
  int permutation_failures = 0;
  for (int i = 0; i < 100; ++i) {
    auto shuffled = events;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (answers(build_store(shuffled, cfg)) != want) ++permutation_failures;
  }

  const auto snap = tmp("store.snap");
  reference.snapshot(snap);
  const bool snapshot_ok = answers(TopicStore::load(snap)) == want;

  // brute-force union on random fixtures
  int union_failures = 0;
  for (int round = 0; round < 200; ++round) {
    TopicStore s;
    std::vector<std::tuple<std::string, long, std::string>> posts;
    const HourIndex base = 480000;
    for (int k = 0; k < 300; ++k) {
      std::string topic = rng() % 2 ? "alpha" : "beta";
      long hour = static_cast<long>(rng() % 12);
      std::string user = "u" + std::to_string(rng() % 50);
      posts.emplace_back(topic, hour, user);
      s.record(normalize_topic(topic), user, "US", (base + hour) * kSecondsPerHour + static_cast<long>(rng() % 3600));
    }
    for (long t = 0; t < 14; ++t)
      for (int agg : {1, 3, 6}) {
        std::vector<std::pair<long, std::string>> alpha, both;
        for (const auto& [topic, hour, user] : posts) {
          both.emplace_back(hour, user);
          if (topic == "alpha") alpha.emplace_back(hour, user);
        }
        const std::vector<TopicString> pair = {normalize_topic("alpha"), normalize_topic("beta")};
        if (s.unique_users(normalize_topic("alpha"), base + t, agg) != oracle::union_count(alpha, t, agg)) ++union_failures;
        if (s.unique_users(pair, base + t, agg) != oracle::union_count(both, t, agg)) ++union_failures;
      }
  }
  const bool ok = permutation_failures == 0 && snapshot_ok && union_failures == 0;
  return {ok, "100 shuffles: " + std::to_string(permutation_failures) + " mismatches; snapshot round-trip " +
                  (snapshot_ok ? "identical" : "DIFFERS") + "; brute-force union: " + std::to_string(union_failures) +
                  " mismatches over " + std::to_string(topics.size()) + "-topic fixture and 200 random stores"};
}

// --- 8 ---------------------------------------------------------------------------------

Outcome throughput() {
  eval::SyntheticSpec spec;
  spec.n_topics = 10000;
  spec.horizon_hours = 200;
  spec.base_rate = 0.5;
  spec.seed = 8;
  for (int i = 0; i < 40; ++i) spec.bursts.push_back({i * 250, 196, 4, 120.0});
  auto stream = eval::generate_synthetic_stream(spec);
  const auto path = tmp("bench_events.jsonl");
  for (auto& e : stream.events) e.topics.reset();  // the extractor has to produce them
  write_events(path, stream.events);
  const std::size_t n_events = stream.events.size();
  stream = {};

  PipelineConfig cfg;
  cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto comps = make_components(cfg, nullptr);
  const auto t0 = Clock::now();
  auto events = read_events(path);
  const double t_ingest = seconds_since(t0);
  events = extract_stage(std::move(events), *comps.extractor, cfg.workers);
  const double t_extract = seconds_since(t0);
  auto store = build_store(events, cfg);
  auto cands = detect(store, cfg.detection, *store.last_hour(), cfg.workers);
  const double total = seconds_since(t0);
  fs::remove(path);
  const auto topics = store.topic_count();
  return {total < 60.0 && n_events >= 1000000 && topics >= 10000,
          std::to_string(n_events) + " events, " + std::to_string(topics) + " topics, " + std::to_string(cands.size()) +
              " candidates; ingest " + fmt(t_ingest) + " s, extract " + fmt(t_extract - t_ingest) + " s, store+detect " +
              fmt(total - t_extract) + " s, total " + fmt(total) + " s (limit 60 s) on " + std::to_string(cfg.workers) +
              " hardware thread(s)"};
}

// --- 9 ---------------------------------------------------------------------------------

Outcome schema() {
  std::size_t checked = 0;
  std::vector<std::string> runs = {tmp("det_run0.jsonl")};
  // a second source: template enrichment over the same fixture
  const auto tmpl = tmp("schema_template.jsonl");
  if (cli("run --input " + kFix + "/events.jsonl --output " + tmpl + " --topic-dict " + kFix +
          "/topic_dict.txt --sensitive-mode rules --blocklist " + kFix + "/blocklist.txt --generic-mode rules" +
          " --generic-list " + kFix + "/generic.txt --consolidate-mode rules --describe-mode template" +
          " --synthesize-mode template") != 0)
    return {false, "template run failed"};
  runs.push_back(tmpl);
  for (const auto& path : runs) {
    if (!fs::exists(path)) return {false, "missing output " + path};
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::ordered_json::parse(line);
      validate_trend_json(j);
      std::vector<std::string> keys;
      for (auto& [k, v] : j.items()) keys.push_back(k);
      if (keys != std::vector<std::string>(kTrendFields.begin(), kTrendFields.end()))
        return {false, "field names or order differ in " + path};
      ++checked;
    }
  }
  return {checked > 0, std::to_string(checked) + " emitted trends carry exactly trend_name, detection_time, trend_score, "
                                                 "trend_summary, trend_details, top_countries, trend_category"};
}

}  // namespace

int main() {
  std::cout << "trendscope acceptance" << std::endl;
  report(1, "formula oracle equivalence", formula_oracle);
  report(2, "analytic identities", analytic_identities);
  report(3, "worked lift example", worked_example);
  report(4, "consolidation example", consolidation_example);
  report(5, "threshold sweep on the reference suite", threshold_sweep);
  report(6, "determinism", determinism);
  report(7, "store properties", store_properties);
  report(8, "throughput", throughput);
  report(9, "schema conformance", schema);
  std::cout << "SKIP  10. online A/B results -- out of scope, no offline surrogate" << std::endl;
  fs::remove_all(scratch());
  std::cout << (failures ? "FAILED: " + std::to_string(failures) + " criteria" : std::string("ALL PASS")) << std::endl;
  return failures == 0 ? 0 : 1;
}
