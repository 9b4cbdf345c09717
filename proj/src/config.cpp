#include "hrnav/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "hrnav/error.hpp"
#include "hrnav/rng.hpp"
#include "hrnav/trajlog.hpp"

namespace hrnav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) bad("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

std::string resolve(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

json hier_json(const HierConfig& h) {
  return json{{"k", h.k},
              {"planner", h.planner},
              {"bridge_timeout_ms", h.bridge_timeout_ms},
              {"history_len", h.history_len},
              {"lookahead_m", h.oracle.lookahead_m},
              {"success_distance_m", h.oracle.success_distance_m}};
}

json reward_json(const RewardConfig& r) {
  return json{{"d_s", r.d_s},
              {"alpha_s", r.alpha_s},
              {"gamma_slack", r.gamma_slack},
              {"lambda_w", r.lambda_w},
              {"lambda_rv", r.lambda_rv},
              {"revisit_radius", r.revisit_radius},
              {"revisit_mode", std::string(to_string(r.revisit_mode))},
              {"wsp_enabled", r.wsp_enabled},
              {"formulation", std::string(to_string(r.formulation))}};
}

json train_json(const TrainConfig& t) {
  return json{{"rollout_len", t.rollout_len},
              {"clip", t.clip},
              {"entropy_coef", t.entropy_coef},
              {"value_coef", t.value_coef},
              {"discount", t.discount},
              {"gae_lambda", t.gae_lambda},
              {"learning_rate", t.learning_rate},
              {"epochs_per_update", t.epochs_per_update},
              {"minibatches", t.minibatches},
              {"total_env_steps", t.total_env_steps},
              {"seed", t.seed},
              {"num_envs", t.num_envs},
              {"workers", t.workers},
              {"max_grad_norm", t.max_grad_norm},
              {"wsp_warmup", t.wsp_warmup},
              {"probe_interval", t.probe_interval},
              {"patch_dropout", t.patch_dropout},
              {"embed", t.net.embed},
              {"hidden", t.net.hidden},
              {"layers", t.net.layers}};
}

}  // namespace

void RunConfig::validate() const {
  if (maps.empty()) bad("at least one map is required");
  if (episodes.file.empty() &&
      (episodes.n_per_stratum < 1 || episodes.train_per_stratum < 1 ||
       episodes.probe_per_stratum < 0)) {
    bad("episode sampler counts must be positive");
  }
  if (episodes.max_steps < 1) bad("episodes.max_steps must be >= 1");
  if (eval.n_episodes < 0) bad("eval.n_episodes must be >= 0");
  if (output_dir.empty()) bad("output_dir must not be empty");
  hier.validate();
  reward.validate();
  train.validate();
}

RunConfig run_config_from_json(const json& j, const std::string& base_dir) {
  check_keys(j, "config",
             {"map", "maps", "episodes", "hier", "reward", "train", "eval", "output_dir",
              "checkpoint"});
  RunConfig c;
  if (j.contains("map") && j.contains("maps")) bad("give either 'map' or 'maps', not both");
  if (j.contains("map")) {
    std::string m;
    read(j, "map", m, "config");
    c.maps.push_back(m);
  }
  read(j, "maps", c.maps, "config");
  for (auto& m : c.maps) m = resolve(m, base_dir);

  if (j.contains("episodes")) {
    const auto& e = j["episodes"];
    if (e.is_string()) {
      c.episodes.file = e.get<std::string>();
    } else {
      check_keys(e, "episodes",
                 {"file", "n_per_stratum", "train_per_stratum", "probe_per_stratum", "max_steps"});
      read(e, "file", c.episodes.file, "episodes");
      read(e, "n_per_stratum", c.episodes.n_per_stratum, "episodes");
      read(e, "train_per_stratum", c.episodes.train_per_stratum, "episodes");
      read(e, "probe_per_stratum", c.episodes.probe_per_stratum, "episodes");
      read(e, "max_steps", c.episodes.max_steps, "episodes");
    }
    c.episodes.file = resolve(c.episodes.file, base_dir);
  }

  if (j.contains("hier")) {
    const auto& h = j["hier"];
    check_keys(h, "hier",
               {"k", "planner", "bridge_timeout_ms", "history_len", "lookahead_m",
                "success_distance_m"});
    read(h, "k", c.hier.k, "hier");
    read(h, "planner", c.hier.planner, "hier");
    read(h, "bridge_timeout_ms", c.hier.bridge_timeout_ms, "hier");
    read(h, "history_len", c.hier.history_len, "hier");
    read(h, "lookahead_m", c.hier.oracle.lookahead_m, "hier");
    read(h, "success_distance_m", c.hier.oracle.success_distance_m, "hier");
    if (c.hier.planner.rfind("Scripted:", 0) == 0) {
      c.hier.planner = "Scripted:" + resolve(c.hier.planner.substr(9), base_dir);
    }
  }

  if (j.contains("reward")) {
    const auto& r = j["reward"];
    check_keys(r, "reward",
               {"d_s", "alpha_s", "gamma_slack", "lambda_w", "lambda_rv", "revisit_radius",
                "revisit_mode", "wsp_enabled", "formulation"});
    read(r, "d_s", c.reward.d_s, "reward");
    read(r, "alpha_s", c.reward.alpha_s, "reward");
    read(r, "gamma_slack", c.reward.gamma_slack, "reward");
    read(r, "lambda_w", c.reward.lambda_w, "reward");
    read(r, "lambda_rv", c.reward.lambda_rv, "reward");
    read(r, "revisit_radius", c.reward.revisit_radius, "reward");
    read(r, "wsp_enabled", c.reward.wsp_enabled, "reward");
    try {
      if (r.contains("revisit_mode")) {
        c.reward.revisit_mode = revisit_mode_from_string(r["revisit_mode"].get<std::string>());
      }
      if (r.contains("formulation")) {
        c.reward.formulation = formulation_from_string(r["formulation"].get<std::string>());
      }
    } catch (const json::exception&) {
      bad("reward.revisit_mode and reward.formulation must be strings");
    }
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train",
               {"rollout_len", "clip", "entropy_coef", "value_coef", "discount", "gae_lambda",
                "learning_rate", "epochs_per_update", "minibatches", "total_env_steps", "seed",
                "num_envs", "workers", "max_grad_norm", "wsp_warmup", "probe_interval",
                "patch_dropout", "embed", "hidden", "layers"});
    auto& tc = c.train;
    read(t, "rollout_len", tc.rollout_len, "train");
    read(t, "clip", tc.clip, "train");
    read(t, "entropy_coef", tc.entropy_coef, "train");
    read(t, "value_coef", tc.value_coef, "train");
    read(t, "discount", tc.discount, "train");
    read(t, "gae_lambda", tc.gae_lambda, "train");
    read(t, "learning_rate", tc.learning_rate, "train");
    read(t, "epochs_per_update", tc.epochs_per_update, "train");
    read(t, "minibatches", tc.minibatches, "train");
    read(t, "total_env_steps", tc.total_env_steps, "train");
    read(t, "seed", tc.seed, "train");
    read(t, "num_envs", tc.num_envs, "train");
    read(t, "workers", tc.workers, "train");
    read(t, "max_grad_norm", tc.max_grad_norm, "train");
    read(t, "wsp_warmup", tc.wsp_warmup, "train");
    read(t, "probe_interval", tc.probe_interval, "train");
    read(t, "patch_dropout", tc.patch_dropout, "train");
    read(t, "embed", tc.net.embed, "train");
    read(t, "hidden", tc.net.hidden, "train");
    read(t, "layers", tc.net.layers, "train");
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, "eval", {"n_episodes", "seed", "split"});
    read(e, "n_episodes", c.eval.n_episodes, "eval");
    read(e, "seed", c.eval.seed, "eval");
    read(e, "split", c.eval.split, "eval");
  }

  read(j, "output_dir", c.output_dir, "config");
  read(j, "checkpoint", c.checkpoint, "config");
  c.output_dir = resolve(c.output_dir, base_dir);
  c.checkpoint = resolve(c.checkpoint, base_dir);
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"maps", c.maps},
              {"episodes",
               {{"file", c.episodes.file},
                {"n_per_stratum", c.episodes.n_per_stratum},
                {"train_per_stratum", c.episodes.train_per_stratum},
                {"probe_per_stratum", c.episodes.probe_per_stratum},
                {"max_steps", c.episodes.max_steps}}},
              {"hier", hier_json(c.hier)},
              {"reward", reward_json(c.reward)},
              {"train", train_json(c.train)},
              {"eval", {{"n_episodes", c.eval.n_episodes}, {"seed", c.eval.seed}, {"split", c.eval.split}}},
              {"output_dir", c.output_dir},
              {"checkpoint", c.checkpoint}};
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hash_json(const RunConfig& c, bool keep_budget) {
  json j = to_json(c);
  if (!keep_budget) j["train"].erase("total_env_steps");
  j["train"].erase("seed");
  j.erase("output_dir");
  // Maps are identified by file name so relocated checkouts hash equally.
  json names = json::array();
  for (const auto& m : c.maps) names.push_back(fs::path(m).filename().string());
  j["maps"] = names;
  j["episodes"]["file"] = fs::path(c.episodes.file).filename().string();
  j["checkpoint"] = fs::path(c.checkpoint).filename().string();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace

std::string config_hash(const RunConfig& c) { return hash_json(c, true); }

std::string resume_hash(const RunConfig& c) { return hash_json(c, false); }

void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("HRNAV_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') bad("HRNAV_SEED must be a non-negative integer");
    c.train.seed = v;
  }
  if (const char* o = std::getenv("HRNAV_OUTPUT_DIR"); o != nullptr && *o != '\0') {
    c.output_dir = o;
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j, fs::path(path).parent_path().string());
  apply_env_overrides(c);
  return c;
}

MapSet load_maps(const RunConfig& c) {
  MapSet maps;
  for (const auto& path : c.maps) {
    GridMap m = load_map_file(path);
    const std::string name = m.meta().name;
    if (!maps.emplace(name, std::move(m)).second) bad("duplicate map name '" + name + "'");
  }
  return maps;
}

std::vector<Episode> episodes_for(const RunConfig& c, const MapSet& maps, EpisodeSplit split) {
  std::vector<Episode> out;
  if (!c.episodes.file.empty() && split == EpisodeSplit::Eval) {
    out = read_episodes_jsonl(c.episodes.file);
  } else {
    const int n = split == EpisodeSplit::Eval    ? c.episodes.n_per_stratum
                  : split == EpisodeSplit::Train ? c.episodes.train_per_stratum
                                                 : c.episodes.probe_per_stratum;
    if (n == 0) return out;
    std::uint64_t stream = 0;
    for (const auto& [name, map] : maps) {
      const std::uint64_t seed =
          derive_seed(c.eval.seed, 100 * static_cast<std::uint64_t>(split) + stream++);
      auto eps = sample_episodes(map, n, seed, c.episodes.max_steps);
      if (split != EpisodeSplit::Eval) {
        const std::string tag = split == EpisodeSplit::Train ? "train-" : "probe-";
        for (auto& e : eps) e.id = tag + e.id;
      }
      out.insert(out.end(), eps.begin(), eps.end());
    }
  }
  for (const auto& e : out) {
    if (!maps.count(e.map_ref)) bad("episode " + e.id + " refers to unknown map '" + e.map_ref + "'");
  }
  if (split == EpisodeSplit::Eval && c.eval.n_episodes > 0 &&
      static_cast<std::size_t>(c.eval.n_episodes) < out.size()) {
    out.resize(static_cast<std::size_t>(c.eval.n_episodes));
  }
  return out;
}

}  // namespace hrnav
