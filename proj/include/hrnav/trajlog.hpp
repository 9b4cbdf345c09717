#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrnav/env.hpp"
#include "hrnav/reward.hpp"

namespace hrnav {

struct EpisodeHeader {
  std::string episode_id;
  std::string map_ref;
  std::string config_hash;
  Pose start;
  Pose goal;
  std::vector<int> goal_views;
  double shortest_path_length = 0.0;
  Difficulty difficulty = Difficulty::Easy;
  int max_steps = kDefaultMaxSteps;
  bool wsp_enabled = false;
  double d0 = 0.0;
  double alpha0_deg = 0.0;
};

struct StepRecord {
  int t = 0;
  double x = 0.0;
  double y = 0.0;
  int heading = 0;
  Action action = Action::Stop;
  double d_t = 0.0;
  double alpha_t_deg = 0.0;
  RewardBreakdown reward;
  std::string plan_token;
  int plan_step = 0;
  VoxelKey voxel_key;
  bool revisit = false;
  bool collided = false;
};

struct EpisodeFooter {
  bool success = false;
  double l_i = 0.0;
  double p_i = 0.0;
  int steps = 0;
  TerminationReason reason = TerminationReason::None;
  double final_distance = 0.0;
  int revisit_steps = 0;
  int planner_calls = 0;
  int planner_events = 0;
};

struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepRecord> steps;
  EpisodeFooter footer;
};

nlohmann::json to_json(const Episode& ep);
Episode episode_from_json(const nlohmann::json& j);
std::vector<Episode> read_episodes_jsonl(const std::string& path);
void write_episodes_jsonl(const std::string& path, const std::vector<Episode>& episodes);

nlohmann::json to_json(const RewardBreakdown& b);
RewardBreakdown reward_breakdown_from_json(const nlohmann::json& j);

/// Writes header, one line per step, then the terminal record.
void write_episode_log(std::ostream& out, const EpisodeLog& log);
std::vector<EpisodeLog> read_episode_logs(std::istream& in);
std::vector<EpisodeLog> read_episode_logs_file(const std::string& path);

/// Recomputes every step's reward from logged poses and returns the first
/// index whose breakdown differs bitwise, or -1 when all match.
int replay_mismatch(const GridMap& map, const EpisodeLog& log, const RewardConfig& cfg);

}  // namespace hrnav
