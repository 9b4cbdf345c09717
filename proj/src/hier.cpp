#include "hrnav/hier.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "hrnav/bridge.hpp"
#include "hrnav/error.hpp"

namespace hrnav {

using nlohmann::json;

std::string_view to_string(PlanToken t) {
  switch (t) {
    case PlanToken::GoToWaypoint: return "GoToWaypoint";
    case PlanToken::ExitRoom: return "ExitRoom";
    case PlanToken::FollowCorridor: return "FollowCorridor";
    case PlanToken::ApproachGoal: return "ApproachGoal";
    case PlanToken::Explore: return "Explore";
    case PlanToken::StopNearGoal: return "StopNearGoal";
  }
  return "?";
}

PlanToken plan_token_from_string(std::string_view s) {
  for (int i = 0; i < kNumPlanTokens; ++i) {
    const auto t = static_cast<PlanToken>(i);
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::ProtocolError, "unknown plan token '" + std::string(s) + "'");
}

std::string_view to_string(PlannerEventKind k) {
  switch (k) {
    case PlannerEventKind::Timeout: return "PlannerTimeout";
    case PlannerEventKind::ProtocolError: return "ProtocolError";
    case PlannerEventKind::ProcessExited: return "ProcessExited";
  }
  return "?";
}

bool should_plan(int step, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "planning interval k must be >= 1");
  return step % k == 0;
}

GoalDescriptor describe_goal(const Pose& pose, Vec2 goal, double geodesic_m) {
  GoalDescriptor g;
  if (distance(pose.position(), goal) > 0.0) {
    double b = relative_bearing_deg(pose, goal);
    if (b < 0.0) b += 360.0;
    g.bearing_octant = static_cast<int>(std::floor((b + 22.5) / 45.0)) % 8;
  } else {
    g.bearing_octant = 0;
  }
  if (std::isfinite(geodesic_m)) {
    g.distance_band = geodesic_m < 1.0 ? 0 : geodesic_m < 3.0 ? 1 : geodesic_m < 5.0 ? 2 : 3;
  }
  return g;
}

std::string encode_request(const PlannerRequest& r) {
  json history = json::array();
  for (const auto& p : r.history) history.push_back(json::array({p.x, p.y, p.heading}));
  json patch = json::array();
  for (auto v : r.patch) patch.push_back(static_cast<int>(v));
  json j{{"episode_id", r.episode_id},
         {"step", r.step},
         {"patch", patch},
         {"goal_bearing_octant",
          r.goal.bearing_octant ? json(*r.goal.bearing_octant) : json(nullptr)},
         {"goal_distance_band",
          r.goal.distance_band ? json(*r.goal.distance_band) : json(nullptr)},
         {"history", history}};
  return j.dump();
}

PlannerRequest decode_request(std::string_view line) {
  try {
    const json j = json::parse(line);
    PlannerRequest r;
    r.episode_id = j.at("episode_id").get<std::string>();
    r.step = j.at("step").get<int>();
    const auto& patch = j.at("patch");
    if (!patch.is_array() || patch.size() != r.patch.size()) {
      throw Error(ErrorCode::ProtocolError, "patch must hold 121 cells");
    }
    for (std::size_t i = 0; i < r.patch.size(); ++i) {
      const int v = patch[i].get<int>();
      if (v != 0 && v != 1) throw Error(ErrorCode::ProtocolError, "patch entries must be 0/1");
      r.patch[i] = static_cast<std::uint8_t>(v);
    }
    const auto& oct = j.at("goal_bearing_octant");
    if (!oct.is_null()) r.goal.bearing_octant = oct.get<int>();
    const auto& band = j.at("goal_distance_band");
    if (!band.is_null()) r.goal.distance_band = band.get<int>();
    for (const auto& p : j.at("history")) {
      r.history.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<int>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("request: ") + e.what());
  }
}

std::string encode_response(const Plan& p) {
  json j{{"token", std::string(to_string(p.token))},
         {"waypoint", p.waypoint ? json::array({p.waypoint->x, p.waypoint->y}) : json(nullptr)},
         {"text", p.text}};
  if (p.heading_hint) j["heading_hint"] = *p.heading_hint;
  return j.dump();
}

Plan decode_response(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ProtocolError, "response is not an object");
  if (!j.contains("token") || !j["token"].is_string()) {
    throw Error(ErrorCode::ProtocolError, "response lacks a string token");
  }
  Plan p;
  p.token = plan_token_from_string(j["token"].get<std::string>());
  if (j.contains("waypoint") && !j["waypoint"].is_null()) {
    const auto& w = j["waypoint"];
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
      throw Error(ErrorCode::ProtocolError, "waypoint must be [x, y] or null");
    }
    p.waypoint = Vec2{w[0].get<double>(), w[1].get<double>()};
  }
  if (j.contains("heading_hint") && !j["heading_hint"].is_null()) {
    if (!j["heading_hint"].is_number()) throw Error(ErrorCode::ProtocolError, "heading_hint");
    p.heading_hint = j["heading_hint"].get<double>();
  }
  if (j.contains("text")) {
    if (!j["text"].is_string()) throw Error(ErrorCode::ProtocolError, "text must be a string");
    p.text = j["text"].get<std::string>();
  }
  if ((p.token == PlanToken::GoToWaypoint || p.token == PlanToken::ExitRoom) && !p.waypoint) {
    throw Error(ErrorCode::ProtocolError,
                std::string(to_string(p.token)) + " requires a waypoint");
  }
  return p;
}

bool line_of_sight(const GridMap& map, Vec2 a, Vec2 b) {
  if (!map.is_free(a) || !map.is_free(b)) return false;
  // Grid traversal visiting every cell the segment touches. When the segment
  // passes exactly through a cell corner both side cells must be free.
  const double s = map.cell_size();
  const CellIndex ca = map.cell_of(a);
  const CellIndex cb = map.cell_of(b);
  int col = ca.col, row = ca.row;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const int step_c = dx > 0 ? 1 : -1;
  const int step_r = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double tdx = dx != 0.0 ? s / std::abs(dx) : inf;
  const double tdy = dy != 0.0 ? s / std::abs(dy) : inf;
  double tx = dx != 0.0 ? ((dx > 0 ? (col + 1) * s : col * s) - a.x) / dx : inf;
  double ty = dy != 0.0 ? ((dy > 0 ? (row + 1) * s : row * s) - a.y) / dy : inf;
  auto blocked = [&](int r, int c) { return map.is_blocked(CellIndex{r, c}); };
  const int n = std::abs(cb.col - ca.col) + std::abs(cb.row - ca.row);
  for (int i = 0; i < n; ++i) {
    if (std::abs(tx - ty) < 1e-12) {
      if (blocked(row, col + step_c) || blocked(row + step_r, col)) return false;
      col += step_c;
      row += step_r;
      tx += tdx;
      ty += tdy;
      ++i;
    } else if (tx < ty) {
      col += step_c;
      tx += tdx;
    } else {
      row += step_r;
      ty += tdy;
    }
    if (blocked(row, col)) return false;
  }
  return true;
}

Plan oracle_plan(const GridMap& map, const DistanceField& goal_field, const Pose& pose, Vec2 goal,
                 const OracleParams& params) {
  const double d = goal_field.at(pose.position());
  if (!std::isfinite(d)) throw Error(ErrorCode::Unreachable, "goal unreachable from pose");
  Plan p;
  if (d <= params.success_distance_m) {
    p.token = PlanToken::StopNearGoal;
    p.waypoint = goal;
    p.text = "stop near the goal";
    return p;
  }
  if (d <= params.lookahead_m) {
    p.token = PlanToken::ApproachGoal;
    p.waypoint = goal;
    p.text = "approach the goal";
    return p;
  }
  const auto path = goal_field.path_to_source(map.cell_of(pose.position()));
  Vec2 best = map.center_of(path.front());
  for (const auto& c : path) {
    if (d - goal_field.at(c) > params.lookahead_m + 1e-9) break;
    const Vec2 centre = map.center_of(c);
    if (line_of_sight(map, pose.position(), centre)) best = centre;
  }
  p.token = PlanToken::GoToWaypoint;
  p.waypoint = best;
  p.text = "go to the waypoint";
  return p;
}

Plan oracle_plan(const GridMap& map, const Pose& pose, Vec2 goal, const OracleParams& params) {
  if (map.is_blocked(map.cell_of(goal))) {
    throw Error(ErrorCode::PositionInObstacle, "goal is not in free space");
  }
  const DistanceField field(map, map.cell_of(goal));
  return oracle_plan(map, field, pose, goal, params);
}

Plan null_plan() {
  Plan p;
  p.token = PlanToken::Explore;
  p.text = "explore";
  return p;
}

void OraclePlanner::begin_episode(const Episode& /*episode*/) {}

PlanOutcome OraclePlanner::plan(const PlanningContext& ctx, const Plan& /*previous*/) {
  const Vec2 goal = ctx.episode->goal.position();
  const CellIndex goal_cell = ctx.map->cell_of(goal);
  if (!field_ || field_map_ != ctx.map || !(field_goal_ == goal_cell)) {
    field_.emplace(*ctx.map, goal_cell);
    field_map_ = ctx.map;
    field_goal_ = goal_cell;
  }
  return {oracle_plan(*ctx.map, *field_, ctx.pose, goal, params_), std::nullopt};
}

PlanOutcome NullPlanner::plan(const PlanningContext& /*ctx*/, const Plan& /*previous*/) {
  return {null_plan(), std::nullopt};
}

ScriptedPlanner ScriptedPlanner::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open plan script " + path);
  try {
    return ScriptedPlanner(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

PlanOutcome ScriptedPlanner::plan(const PlanningContext& ctx, const Plan& /*previous*/) {
  const json* entries = nullptr;
  if (script_.contains(episode_id_)) {
    entries = &script_[episode_id_];
  } else if (script_.contains("*")) {
    entries = &script_["*"];
  }
  Plan chosen = null_plan();
  if (entries != nullptr) {
    int best_step = -1;
    for (const auto& e : *entries) {
      const int s = e.value("step", 0);
      if (s <= ctx.step && s > best_step) {
        best_step = s;
        chosen = decode_response(e.dump());
      }
    }
  }
  return {chosen, std::nullopt};
}

void HierConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "hier.k must be >= 1");
  if (history_len < 0) throw Error(ErrorCode::InvalidConfig, "hier.history_len must be >= 0");
  if (!(bridge_timeout_ms > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "hier.bridge_timeout_ms must be > 0");
  }
  if (planner != "Oracle" && planner != "Null" && planner.rfind("Scripted:", 0) != 0 &&
      planner.rfind("Bridge:", 0) != 0) {
    throw Error(ErrorCode::InvalidConfig, "unknown planner '" + planner + "'");
  }
}

std::unique_ptr<Planner> make_planner(const HierConfig& cfg) {
  cfg.validate();
  if (cfg.planner == "Oracle") return std::make_unique<OraclePlanner>(cfg.oracle);
  if (cfg.planner == "Null") return std::make_unique<NullPlanner>();
  if (cfg.planner.rfind("Scripted:", 0) == 0) {
    return std::make_unique<ScriptedPlanner>(ScriptedPlanner::from_file(cfg.planner.substr(9)));
  }
  return std::make_unique<BridgePlanner>(cfg.planner.substr(7), cfg.bridge_timeout_ms,
                                         cfg.history_len);
}

PlanScheduler::PlanScheduler(Planner& planner, int k, int history_len)
    : planner_(&planner), k_(k), history_len_(history_len) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "planning interval k must be >= 1");
}

void PlanScheduler::begin_episode(const Episode& episode) {
  planner_->begin_episode(episode);
  plan_ = null_plan();
  history_.clear();
  calls_ = 0;
  events_.clear();
}

bool PlanScheduler::update(const GridMap& map, const Episode& episode, const Pose& pose, int step,
                           double geodesic_to_goal) {
  history_.push_back(pose);
  while (static_cast<int>(history_.size()) > history_len_) history_.pop_front();
  if (!should_plan(step, k_)) return false;
  PlanningContext ctx{&map, &episode, pose, step, geodesic_to_goal, &history_};
  auto outcome = planner_->plan(ctx, plan_);
  ++calls_;
  if (outcome.event) {
    events_.push_back(*outcome.event);
  } else {
    plan_ = std::move(outcome.plan);
    plan_.issued_at_step = step;
  }
  return true;
}

PlanFeature plan_feature(const Plan& plan, const Pose& pose, int step, int k) {
  PlanFeature f{};
  f[static_cast<int>(plan.token)] = 1.0;
  if (plan.waypoint) {
    const double range = distance(pose.position(), *plan.waypoint);
    f[6] = range;
    if (range > 0.0) {
      const double b = relative_bearing_deg(pose, *plan.waypoint) * std::numbers::pi / 180.0;
      f[7] = std::sin(b);
      f[8] = std::cos(b);
    }
  }
  f[9] = static_cast<double>(step - plan.issued_at_step) / static_cast<double>(k);
  return f;
}

}  // namespace hrnav
