#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrnav/env.hpp"
#include "hrnav/hier.hpp"
#include "hrnav/metrics.hpp"
#include "hrnav/policy.hpp"
#include "hrnav/reward.hpp"
#include "hrnav/trajlog.hpp"

namespace hrnav {

struct TrainConfig {
  int rollout_len = 64;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 5e-4;
  int epochs_per_update = 4;
  int minibatches = 2;
  long total_env_steps = 200000;
  std::uint64_t seed = 1;
  int num_envs = 8;
  int workers = 1;
  double max_grad_norm = 0.5;
  double wsp_warmup = 0.5;
  int probe_interval = 10;
  double patch_dropout = 0.0;
  NetShape net;

  void validate() const;
  long iterations() const;
};

/// Maps addressed by Episode::map_ref.
using MapSet = std::map<std::string, GridMap>;

/// Per-step inputs an executor may use.
struct ExecutorContext {
  const NavEnv* env = nullptr;
  const Plan* plan = nullptr;
  const ObservationFeatures* features = nullptr;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual void begin_episode() {}
  virtual Action act(const ExecutorContext& ctx) = 0;
};

/// Recurrent policy, argmax action selection.
class PolicyExecutor : public Executor {
 public:
  explicit PolicyExecutor(const PolicyNet& net) : net_(&net) {}
  void begin_episode() override { hidden_ = zero_hidden(net_->shape(), 1); }
  Action act(const ExecutorContext& ctx) override;

 private:
  const PolicyNet* net_;
  Hidden hidden_;
};

/// Checkpoint-free baseline: turns toward the plan waypoint (or the goal when
/// there is none), moves forward, and stops on StopNearGoal.
class GreedyExecutor : public Executor {
 public:
  Action act(const ExecutorContext& ctx) override;
};

int argmax_action(std::span<const double> probs);

/// Builds the fused features for the current env state.
ObservationFeatures observe(const NavEnv& env, const Plan& plan, int k,
                            std::optional<Action> prev_action);

struct EpisodeRunConfig {
  HierConfig hier;
  RewardConfig reward;
  std::string config_hash;
};

/// Runs one episode to termination and returns the full log.
EpisodeLog run_episode(const GridMap& map, const Episode& episode, Planner& planner,
                       Executor& executor, const EpisodeRunConfig& cfg);

/// Lock-step argmax evaluation of a policy on many episodes. Each episode
/// gets its own planner instance except the bridge, which is shared.
std::vector<EpisodeLog> evaluate_policy(const PolicyNet& net, const MapSet& maps,
                                        const std::vector<Episode>& episodes,
                                        const EpisodeRunConfig& cfg);

struct CurveRow {
  long iteration = 0;
  long env_steps = 0;
  double mean_reward = 0.0;
  double probe_sr = 0.0;
  double probe_spl = 0.0;
  bool wsp_enabled = false;
};

std::string curve_header(const std::string& config_hash);
std::string curve_line(const CurveRow& row);

struct Checkpoint {
  std::string config_hash;
  std::string resume_hash;
  std::uint64_t seed = 0;
  long iteration = 0;
  long env_steps = 0;
  NetShape shape;
  std::vector<double> params;
  std::vector<double> adam_m, adam_v;
  long adam_t = 0;
  std::vector<CurveRow> curve;
};

nlohmann::json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);
PolicyNet net_from_checkpoint(const Checkpoint& c);

struct TrainJob {
  MapSet maps;
  std::vector<Episode> train_episodes;
  std::vector<Episode> probe_episodes;
  HierConfig hier;
  RewardConfig reward;
  TrainConfig train;
  std::string config_hash;
  std::string resume_hash;
  std::optional<Checkpoint> resume;
  /// Called after each iteration with the new curve row.
  std::function<void(const CurveRow&)> on_iteration;
  /// When set, training episodes are fully logged and handed over on completion.
  std::function<void(const EpisodeLog&)> on_episode;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<CurveRow> curve;
};

/// Throws Error(DivergenceDetected) after two consecutive non-finite updates.
TrainResult train(const TrainJob& job);

}  // namespace hrnav
