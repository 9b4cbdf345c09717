#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrnav/annot.hpp"
#include "hrnav/bench.hpp"
#include "hrnav/config.hpp"
#include "hrnav/error.hpp"
#include "hrnav/metrics.hpp"
#include "hrnav/render.hpp"
#include "hrnav/train.hpp"
#include "hrnav/trajlog.hpp"

namespace fs = std::filesystem;
using namespace hrnav;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

/// Input and configuration problems exit with 2, everything else with 1.
bool is_config_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::Io:
    case ErrorCode::EmptyMap:
    case ErrorCode::RaggedRows:
    case ErrorCode::UnknownGlyph:
    case ErrorCode::PositionInObstacle:
    case ErrorCode::EmptyViews:
    case ErrorCode::NonPositiveResolution:
    case ErrorCode::StratumUnsatisfiable:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::WindowNonPositive:
      return true;
    default:
      return false;
  }
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << content;
}

void log_line(const std::string& msg) { std::cerr << "[hrnav] " << msg << '\n'; }

// ---------------------------------------------------------------- run

struct RunOpts {
  std::string config;
  std::string checkpoint;
  std::string out;
};

int cmd_run(const RunOpts& o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  if (!o.out.empty()) cfg.output_dir = o.out;
  const std::string hash = config_hash(cfg);
  const MapSet maps = load_maps(cfg);
  const auto episodes = episodes_for(cfg, maps, EpisodeSplit::Eval);
  const EpisodeRunConfig run_cfg{cfg.hier, cfg.reward, hash};

  std::vector<EpisodeLog> logs;
  if (!cfg.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    const PolicyNet net = net_from_checkpoint(ck);
    logs = evaluate_policy(net, maps, episodes, run_cfg);
  } else {
    GreedyExecutor greedy;
    for (const auto& ep : episodes) {
      auto planner = make_planner(cfg.hier);
      logs.push_back(run_episode(maps.at(ep.map_ref), ep, *planner, greedy, run_cfg));
    }
  }

  std::ostringstream traj;
  std::vector<EpisodeResult> results;
  for (const auto& l : logs) {
    write_episode_log(traj, l);
    results.push_back(result_from_log(l));
  }
  const fs::path dir(cfg.output_dir);
  write_file(dir / "trajectories.jsonl", traj.str());
  const auto report = stratified_report(results);
  write_file(dir / "results.csv", results_csv(report, cfg.eval.split, hash));
  write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  std::printf("episodes=%zu SR=%.4f SPL=%.4f config_hash=%s\n", results.size(), report.overall.sr,
              report.overall.spl, hash.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string config;
  std::string resume;
  std::string out;
  bool sweep = false;
  long total_steps = 0;
  int workers = 0;
  bool quiet = false;
};

const std::vector<double> kLambdaSweep{1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};

void train_one(const RunConfig& cfg, const std::optional<Checkpoint>& resume, bool quiet) {
  const std::string hash = config_hash(cfg);
  TrainJob job;
  job.maps = load_maps(cfg);
  job.train_episodes = episodes_for(cfg, job.maps, EpisodeSplit::Train);
  job.probe_episodes = episodes_for(cfg, job.maps, EpisodeSplit::Probe);
  job.hier = cfg.hier;
  job.reward = cfg.reward;
  job.train = cfg.train;
  job.config_hash = hash;
  job.resume_hash = resume_hash(cfg);
  job.resume = resume;
  if (resume && resume->resume_hash != job.resume_hash) {
    throw Error(ErrorCode::InvalidConfig,
                "checkpoint was trained with a different configuration (" + resume->config_hash +
                    " vs " + hash + ")");
  }
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const fs::path curve_path = dir / "curve.csv";
  std::ofstream curve(curve_path, std::ios::binary);
  if (!curve) throw Error(ErrorCode::Io, "cannot write " + curve_path.string());
  curve << curve_header(hash);
  if (resume) {
    for (const auto& r : resume->curve) curve << curve_line(r);
  }
  curve.flush();
  job.on_iteration = [&](const CurveRow& r) {
    curve << curve_line(r);
    curve.flush();
    if (!quiet && (r.iteration % cfg.train.probe_interval == 0)) {
      log_line("iter " + std::to_string(r.iteration) + " steps " + std::to_string(r.env_steps) +
               " reward " + std::to_string(r.mean_reward) + " probe SR " +
               std::to_string(r.probe_sr) + " SPL " + std::to_string(r.probe_spl));
    }
  };
  const auto res = train(job);
  save_checkpoint((dir / "checkpoint.json").string(), res.checkpoint);
  write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  const auto& last = res.curve.empty() ? CurveRow{} : res.curve.back();
  std::printf("trained iterations=%ld env_steps=%ld probe_SR=%.4f probe_SPL=%.4f config_hash=%s\n",
              res.checkpoint.iteration, res.checkpoint.env_steps, last.probe_sr, last.probe_spl,
              hash.c_str());
}

int cmd_train(const TrainOpts& o) {
  if (o.sweep && !o.resume.empty()) {
    throw Error(ErrorCode::InvalidConfig, "--sweep and --resume cannot be combined");
  }
  RunConfig cfg = load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.total_steps > 0) cfg.train.total_env_steps = o.total_steps;
  if (o.workers > 0) cfg.train.workers = o.workers;
  cfg.validate();
  if (!o.sweep) {
    std::optional<Checkpoint> resume;
    if (!o.resume.empty()) resume = load_checkpoint(o.resume);
    train_one(cfg, resume, o.quiet);
    return kExitOk;
  }
  const fs::path root(cfg.output_dir);
  for (double lw : kLambdaSweep) {
    RunConfig c = cfg;
    c.reward.lambda_w = lw;
    char name[32];
    std::snprintf(name, sizeof name, "lambda_%.1f", lw);
    c.output_dir = (root / name).string();
    if (!o.quiet) log_line(std::string("sweep ") + name);
    train_one(c, std::nullopt, o.quiet);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- validate

struct ValidateOpts {
  std::string manifest;
  std::string annotations;
  std::string judge = "none";
  std::string out = "out/validate";
  int frames = 4;
  int workers = 1;
};

std::unique_ptr<annot::Judge> make_judge(const std::string& spec) {
  if (spec == "none" || spec.empty()) return nullptr;
  if (spec.rfind("stub:", 0) == 0) {
    return std::make_unique<annot::StubJudge>(annot::StubJudge::from_file(spec.substr(5)));
  }
  if (spec == "stub") return std::make_unique<annot::StubJudge>();
  throw Error(ErrorCode::InvalidConfig, "unknown judge '" + spec + "' (none | stub | stub:<file>)");
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_validate(const ValidateOpts& o) {
  if (!fs::is_directory(o.annotations) || fs::is_empty(o.annotations)) {
    throw Error(ErrorCode::Io, "annotation directory is missing or empty: " + o.annotations);
  }
  const auto manifest = annot::read_manifest(o.manifest);
  if (manifest.empty()) throw Error(ErrorCode::InvalidConfig, "manifest is empty");
  make_judge(o.judge);  // fail fast on a bad spec

  const int n = static_cast<int>(manifest.size());
  const int w = std::max(1, std::min(o.workers, n));
  std::vector<annot::TQCMReport> reports(n);
  std::vector<annot::QualityAccumulator> shards(w);
  std::vector<std::exception_ptr> errors(w);
  auto work = [&](int shard) {
    try {
      auto judge = make_judge(o.judge);
      for (int i = shard; i < n; i += w) {
        const auto& t = manifest[i];
        const auto text = read_text(fs::path(o.annotations) / (t.id + ".txt"));
        reports[i] = annot::run_tqcm(t, text, judge.get(), o.frames);
        shards[shard].add(reports[i]);
      }
    } catch (...) {
      errors[shard] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int s = 1; s < w; ++s) pool.emplace_back(work, s);
  work(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  annot::QualityAccumulator total;
  for (const auto& s : shards) total.merge(s);

  std::ostringstream rep;
  for (const auto& r : reports) rep << annot::to_json(r).dump() << '\n';
  const fs::path dir(o.out);
  write_file(dir / "tqcm_reports.jsonl", rep.str());
  write_file(dir / "quality.csv", annot::quality_csv(reports));
  const auto m = total.metrics();
  auto pct = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("n/a");
  };
  std::printf("samples=%zu format=%s temporal=%s semantic=%s retained=%zu\n", m.samples,
              pct(m.format_pct).c_str(), pct(m.temporal_pct).c_str(), pct(m.semantic_pct).c_str(),
              m.retained_count);
  return kExitOk;
}

// ---------------------------------------------------------------- make-dataset

struct DatasetOpts {
  std::string manifest;
  std::string annotations;
  std::string out = "out/planning_samples.jsonl";
  int window = 4;
  int history = 15;
};

int cmd_make_dataset(const DatasetOpts& o) {
  const auto manifest = annot::read_manifest(o.manifest);
  std::ostringstream out;
  std::size_t made = 0;
  std::size_t skipped = 0;
  for (const auto& t : manifest) {
    const auto text = read_text(fs::path(o.annotations) / (t.id + ".txt"));
    const auto report = annot::run_tqcm(t, text, nullptr);
    if (!report.format_ok || !report.temporal_ok.value_or(false)) {
      ++skipped;
      continue;
    }
    const auto parsed = annot::parse_grounding(text, t.num_frames);
    try {
      for (const auto& s : annot::label_samples(t, parsed.intervals, o.window, o.history)) {
        out << annot::to_json(s).dump() << '\n';
        ++made;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::WindowNonPositive) throw;
      ++skipped;
    }
  }
  write_file(o.out, out.str());
  std::printf("samples=%zu skipped_trajectories=%zu\n", made, skipped);
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
  std::string map;
  std::string ks = "5,10,15,30,60";
  double t_slow = 374.0;
  int steps = 5000;
  std::string planner = "stub";
  std::string out = "out/latency.csv";
  std::uint64_t seed = 1;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad integer list '" + s + "'");
    }
  }
  return v;
}

int cmd_bench(const BenchOpts& o) {
  BenchConfig b;
  b.ks = parse_int_list(o.ks);
  b.t_slow_ms = o.t_slow;
  b.steps = o.steps;
  b.planner = o.planner;
  b.seed = o.seed;
  if (!(b.t_slow_ms >= 0.0)) throw Error(ErrorCode::InvalidConfig, "--t-slow-ms must be >= 0");
  const GridMap map = load_map_file(o.map);
  json key{{"map", fs::path(o.map).filename().string()}, {"ks", b.ks}, {"t_slow_ms", b.t_slow_ms},
           {"steps", b.steps}, {"planner", b.planner}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(key.dump())));
  const auto res = run_bench(map, b);
  write_file(o.out, latency_csv(res, hash));
  std::printf("t_fast_ms=%.4f\n", res.t_fast_ms);
  for (const auto& r : res.rows) {
    std::printf("k=%d model_ms=%.3f measured_ms=%.3f\n", r.k, r.model, r.measured_avg);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- render

struct RenderOpts {
  std::string log;
  std::string map;
  std::string episode;
  std::string out = "out/trajectory.svg";
  double scale = 60.0;
};

int cmd_render(const RenderOpts& o) {
  const GridMap map = load_map_file(o.map);
  std::optional<EpisodeLog> chosen;
  if (!o.log.empty()) {
    const auto logs = read_episode_logs_file(o.log);
    for (const auto& l : logs) {
      if (o.episode.empty() || l.header.episode_id == o.episode) {
        chosen = l;
        break;
      }
    }
    if (!o.episode.empty() && !chosen) {
      throw Error(ErrorCode::InvalidConfig, "episode '" + o.episode + "' not in " + o.log);
    }
  }
  write_file(o.out, render_svg(map, chosen ? &*chosen : nullptr, o.scale));
  return kExitOk;
}

// ---------------------------------------------------------------- sample-episodes

struct SampleOpts {
  std::string map;
  int n = 10;
  std::uint64_t seed = 1;
  int max_steps = kDefaultMaxSteps;
  std::string out = "out/episodes.jsonl";
};

int cmd_sample(const SampleOpts& o) {
  const GridMap map = load_map_file(o.map);
  const auto eps = sample_episodes(map, o.n, o.seed, o.max_steps);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  write_episodes_jsonl(o.out, eps);
  std::printf("episodes=%zu\n", eps.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hrnav: hierarchical navigation laboratory"};
  app.require_subcommand(1);

  RunOpts run;
  auto* s_run = app.add_subcommand("run", "evaluate a checkpoint (or the greedy baseline)");
  s_run->add_option("-c,--config", run.config, "run configuration JSON")->required();
  s_run->add_option("--checkpoint", run.checkpoint, "checkpoint overriding the config");
  s_run->add_option("-o,--out", run.out, "output directory overriding the config");

  TrainOpts tr;
  auto* s_train = app.add_subcommand("train", "train the executor policy");
  s_train->add_option("-c,--config", tr.config, "run configuration JSON")->required();
  s_train->add_option("--resume", tr.resume, "continue from a checkpoint");
  s_train->add_flag("--sweep", tr.sweep, "train once per lambda_w in the sweep grid");
  s_train->add_option("-o,--out", tr.out, "output directory overriding the config");
  s_train->add_option("--total-steps", tr.total_steps, "override train.total_env_steps");
  s_train->add_option("--workers", tr.workers, "override train.workers");
  s_train->add_flag("-q,--quiet", tr.quiet, "no progress lines");

  ValidateOpts va;
  auto* s_val = app.add_subcommand("validate", "run TQCM over an annotation corpus");
  s_val->add_option("--manifest", va.manifest, "trajectory manifest (JSON lines)")->required();
  s_val->add_option("--annotations", va.annotations, "directory of <id>.txt files")->required();
  s_val->add_option("--judge", va.judge, "none | stub | stub:<fixture.json>");
  s_val->add_option("-o,--out", va.out, "output directory");
  s_val->add_option("--frames", va.frames, "frames per interval sent to the judge");
  s_val->add_option("--workers", va.workers, "annotation shards processed in parallel");

  DatasetOpts ds;
  auto* s_ds = app.add_subcommand("make-dataset", "label planning samples from annotations");
  s_ds->add_option("--manifest", ds.manifest, "trajectory manifest (JSON lines)")->required();
  s_ds->add_option("--annotations", ds.annotations, "directory of <id>.txt files")->required();
  s_ds->add_option("-o,--out", ds.out, "output JSON lines file");
  s_ds->add_option("--window", ds.window, "look-ahead window W");
  s_ds->add_option("--history", ds.history, "history length");

  BenchOpts be;
  auto* s_bench = app.add_subcommand("bench", "measure amortised per-step latency");
  s_bench->add_option("--map", be.map, "map file")->required();
  s_bench->add_option("--k", be.ks, "comma-separated planning intervals");
  s_bench->add_option("--t-slow-ms", be.t_slow, "planner delay in milliseconds");
  s_bench->add_option("--steps", be.steps, "steps per k");
  s_bench->add_option("--planner", be.planner, "stub | Bridge:<command>");
  s_bench->add_option("--seed", be.seed, "workload seed");
  s_bench->add_option("-o,--out", be.out, "latency CSV");

  RenderOpts re;
  auto* s_render = app.add_subcommand("render", "draw a trajectory as SVG");
  s_render->add_option("--map", re.map, "map file")->required();
  s_render->add_option("--log", re.log, "trajectory log (JSON lines)");
  s_render->add_option("--episode", re.episode, "episode id (default: first)");
  s_render->add_option("-o,--out", re.out, "SVG file");
  s_render->add_option("--scale", re.scale, "pixels per metre");

  SampleOpts sa;
  auto* s_sample = app.add_subcommand("sample-episodes", "draw stratified episodes for a map");
  s_sample->add_option("--map", sa.map, "map file")->required();
  s_sample->add_option("-n,--per-stratum", sa.n, "episodes per stratum");
  s_sample->add_option("--seed", sa.seed, "sampler seed");
  s_sample->add_option("--max-steps", sa.max_steps, "episode step budget");
  s_sample->add_option("-o,--out", sa.out, "episode file (JSON lines)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*s_run) return cmd_run(run);
    if (*s_train) return cmd_train(tr);
    if (*s_val) return cmd_validate(va);
    if (*s_ds) return cmd_make_dataset(ds);
    if (*s_bench) return cmd_bench(be);
    if (*s_render) return cmd_render(re);
    if (*s_sample) return cmd_sample(sa);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
