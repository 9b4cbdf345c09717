#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrnav/hier.hpp"
#include "hrnav/reward.hpp"
#include "hrnav/train.hpp"

namespace hrnav {

/// Either an episode file or per-stratum sampler counts.
struct EpisodeSource {
  std::string file;
  int n_per_stratum = 10;
  int train_per_stratum = 100;
  int probe_per_stratum = 4;
  int max_steps = kDefaultMaxSteps;
};

struct EvalConfig {
  int n_episodes = 0;  // 0: every episode
  std::uint64_t seed = 17;
  std::string split = "test";
};

struct RunConfig {
  std::vector<std::string> maps;
  EpisodeSource episodes;
  HierConfig hier;
  RewardConfig reward;
  TrainConfig train;
  EvalConfig eval;
  std::string output_dir = "out";
  std::string checkpoint;

  void validate() const;
};

/// Strict parse: unknown keys are configuration errors. Relative paths are
/// resolved against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
/// Every field, defaults included.
nlohmann::json to_json(const RunConfig& c);
/// 16 hex digits of FNV-1a over the canonical config with seeds and output
/// directory removed.
std::string config_hash(const RunConfig& c);
/// Same as config_hash but ignores the step budget, so a run can be extended.
std::string resume_hash(const RunConfig& c);

/// Reads the file and applies HRNAV_SEED / HRNAV_OUTPUT_DIR.
RunConfig load_run_config(const std::string& path);
void apply_env_overrides(RunConfig& c);

MapSet load_maps(const RunConfig& c);

enum class EpisodeSplit { Eval, Train, Probe };
/// Episodes from the configured file, or sampled per map with seeds derived
/// from eval.seed. Eval episodes are truncated to eval.n_episodes when set.
std::vector<Episode> episodes_for(const RunConfig& c, const MapSet& maps, EpisodeSplit split);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace hrnav
