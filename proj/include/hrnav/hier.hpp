#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hrnav/env.hpp"

namespace hrnav {

enum class PlanToken : std::uint8_t {
  GoToWaypoint = 0,
  ExitRoom = 1,
  FollowCorridor = 2,
  ApproachGoal = 3,
  Explore = 4,
  StopNearGoal = 5,
};
constexpr int kNumPlanTokens = 6;

std::string_view to_string(PlanToken t);
PlanToken plan_token_from_string(std::string_view s);

/// The slow system's short-horizon objective.
struct Plan {
  PlanToken token = PlanToken::Explore;
  std::optional<Vec2> waypoint;
  std::optional<double> heading_hint;
  int issued_at_step = 0;
  std::string text;

  friend bool operator==(const Plan&, const Plan&) = default;
};

/// True iff a new plan is due at this episode step (including step 0).
bool should_plan(int step, int k);

/// Coarse goal descriptor handed to non-oracle planners.
struct GoalDescriptor {
  std::optional<int> bearing_octant;  // 0..7, octant 0 straight ahead, counter-clockwise
  std::optional<int> distance_band;   // 0: <1 m, 1: [1,3), 2: [3,5), 3: >=5 m

  friend bool operator==(const GoalDescriptor&, const GoalDescriptor&) = default;
};

GoalDescriptor describe_goal(const Pose& pose, Vec2 goal, double geodesic_m);

constexpr int kDefaultHistoryLen = 15;

struct PlannerRequest {
  std::string episode_id;
  int step = 0;
  std::array<std::uint8_t, kPatchSize * kPatchSize> patch{};
  GoalDescriptor goal;
  std::vector<Pose> history;

  friend bool operator==(const PlannerRequest&, const PlannerRequest&) = default;
};

/// Line-delimited JSON wire codec shared with external planners.
std::string encode_request(const PlannerRequest& r);
PlannerRequest decode_request(std::string_view line);
std::string encode_response(const Plan& p);
/// Throws Error(ProtocolError) on malformed input. `issued_at_step` is not on the wire.
Plan decode_response(std::string_view line);

/// Everything a planner may look at when it is invoked.
struct PlanningContext {
  const GridMap* map = nullptr;
  const Episode* episode = nullptr;
  Pose pose;
  int step = 0;
  double geodesic_to_goal = 0.0;
  const std::deque<Pose>* history = nullptr;
};

enum class PlannerEventKind : std::uint8_t { Timeout, ProtocolError, ProcessExited };
std::string_view to_string(PlannerEventKind k);

struct PlannerEvent {
  PlannerEventKind kind;
  int step = 0;
  std::string detail;
};

struct PlanOutcome {
  Plan plan;
  std::optional<PlannerEvent> event;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual void begin_episode(const Episode& /*episode*/) {}
  /// `previous` is the plan currently in force (retained on failure).
  virtual PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) = 0;
};

struct OracleParams {
  double lookahead_m = 2.0;
  double success_distance_m = 1.0;
};

/// Geodesic-path planner with map access.
Plan oracle_plan(const GridMap& map, const DistanceField& goal_field, const Pose& pose,
                 Vec2 goal, const OracleParams& params = {});
Plan oracle_plan(const GridMap& map, const Pose& pose, Vec2 goal, const OracleParams& params = {});
Plan null_plan();

/// True iff every sample along the segment lies in free inflated space.
bool line_of_sight(const GridMap& map, Vec2 a, Vec2 b);

class OraclePlanner : public Planner {
 public:
  explicit OraclePlanner(OracleParams params = {}) : params_(params) {}
  void begin_episode(const Episode& episode) override;
  PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) override;

 private:
  OracleParams params_;
  std::optional<DistanceField> field_;
  const GridMap* field_map_ = nullptr;
  CellIndex field_goal_;
};

class NullPlanner : public Planner {
 public:
  PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) override;
};

/// Replays plans from a JSON file: {"<episode_id>" | "*": [{step, token, waypoint, text}, ...]}.
/// The entry with the largest step <= the current step applies; otherwise Explore.
class ScriptedPlanner : public Planner {
 public:
  explicit ScriptedPlanner(nlohmann::json script) : script_(std::move(script)) {}
  static ScriptedPlanner from_file(const std::string& path);
  void begin_episode(const Episode& episode) override { episode_id_ = episode.id; }
  PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) override;

 private:
  nlohmann::json script_;
  std::string episode_id_;
};

struct HierConfig {
  int k = 15;
  std::string planner = "Oracle";  // Oracle | Null | Scripted:<file> | Bridge:<command>
  double bridge_timeout_ms = 2000.0;
  int history_len = kDefaultHistoryLen;
  OracleParams oracle;

  void validate() const;
};

std::unique_ptr<Planner> make_planner(const HierConfig& cfg);

/// Holds the plan in force and invokes the planner every k steps.
class PlanScheduler {
 public:
  PlanScheduler(Planner& planner, int k, int history_len = kDefaultHistoryLen);

  void begin_episode(const Episode& episode);
  /// Call once per step before the executor acts; appends `pose` to the
  /// history. Returns true when the planner was invoked.
  bool update(const GridMap& map, const Episode& episode, const Pose& pose, int step,
              double geodesic_to_goal);

  const Plan& current() const { return plan_; }
  int calls() const { return calls_; }
  const std::vector<PlannerEvent>& events() const { return events_; }
  int k() const { return k_; }

 private:
  Planner* planner_;
  int k_;
  int history_len_;
  Plan plan_;
  std::deque<Pose> history_;
  int calls_ = 0;
  std::vector<PlannerEvent> events_;
};

constexpr int kPlanFeatureWidth = 10;
using PlanFeature = std::array<double, kPlanFeatureWidth>;

/// one-hot token (6) | waypoint range, sin, cos of egocentric bearing | age / k.
PlanFeature plan_feature(const Plan& plan, const Pose& pose, int step, int k);

}  // namespace hrnav
