#include "hrnav/trajlog.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "hrnav/error.hpp"

namespace hrnav {

using nlohmann::json;

namespace {

json pose_json(const Pose& p) { return json::array({p.x, p.y, p.heading}); }

Pose pose_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidConfig, "pose must be [x,y,heading]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<int>()};
}

}  // namespace

json to_json(const Episode& ep) {
  return json{{"id", ep.id},
              {"map_ref", ep.map_ref},
              {"start", pose_json(ep.start)},
              {"goal", pose_json(ep.goal)},
              {"goal_views", ep.goal_views},
              {"shortest_path_length", ep.shortest_path_length},
              {"max_steps", ep.max_steps},
              {"difficulty", std::string(to_string(ep.difficulty))}};
}

Episode episode_from_json(const json& j) {
  try {
    Episode ep;
    ep.id = j.at("id").get<std::string>();
    ep.map_ref = j.value("map_ref", std::string{});
    ep.start = pose_from(j.at("start"));
    ep.goal = pose_from(j.at("goal"));
    ep.goal_views = j.value("goal_views", std::vector<int>{ep.goal.heading});
    ep.shortest_path_length = j.at("shortest_path_length").get<double>();
    ep.max_steps = j.value("max_steps", kDefaultMaxSteps);
    ep.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    if (ep.max_steps <= 0) throw Error(ErrorCode::InvalidConfig, "max_steps must be > 0");
    return ep;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("episode record: ") + e.what());
  }
}

std::vector<Episode> read_episodes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open episode file " + path);
  std::vector<Episode> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
    }
  }
  return out;
}

void write_episodes_jsonl(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (const auto& ep : episodes) out << to_json(ep).dump() << '\n';
}

json to_json(const RewardBreakdown& b) {
  return json{{"distance_term", b.distance_term}, {"view_term", b.view_term},
              {"slack_term", b.slack_term},       {"success_term", b.success_term},
              {"wsp_path_term", b.wsp_path_term}, {"wsp_revisit_term", b.wsp_revisit_term},
              {"total", b.total}};
}

RewardBreakdown reward_breakdown_from_json(const json& j) {
  RewardBreakdown b;
  b.distance_term = j.at("distance_term").get<double>();
  b.view_term = j.at("view_term").get<double>();
  b.slack_term = j.at("slack_term").get<double>();
  b.success_term = j.at("success_term").get<double>();
  b.wsp_path_term = j.at("wsp_path_term").get<double>();
  b.wsp_revisit_term = j.at("wsp_revisit_term").get<double>();
  b.total = j.at("total").get<double>();
  return b;
}

void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  const auto& h = log.header;
  out << json{{"type", "header"},
              {"episode_id", h.episode_id},
              {"map_ref", h.map_ref},
              {"config_hash", h.config_hash},
              {"start", pose_json(h.start)},
              {"goal", pose_json(h.goal)},
              {"goal_views", h.goal_views},
              {"shortest_path_length", h.shortest_path_length},
              {"difficulty", std::string(to_string(h.difficulty))},
              {"max_steps", h.max_steps},
              {"wsp_enabled", h.wsp_enabled},
              {"d0", h.d0},
              {"alpha0_deg", h.alpha0_deg}}
             .dump()
      << '\n';
  for (const auto& s : log.steps) {
    out << json{{"type", "step"},
                {"t", s.t},
                {"x", s.x},
                {"y", s.y},
                {"heading", s.heading},
                {"action", std::string(to_string(s.action))},
                {"d_t", s.d_t},
                {"alpha_t_deg", s.alpha_t_deg},
                {"reward", to_json(s.reward)},
                {"plan_token", s.plan_token},
                {"plan_step", s.plan_step},
                {"voxel_key", json::array({s.voxel_key.x, s.voxel_key.y, s.voxel_key.z})},
                {"revisit", s.revisit},
                {"collided", s.collided}}
               .dump()
        << '\n';
  }
  const auto& f = log.footer;
  out << json{{"type", "end"},
              {"episode_id", h.episode_id},
              {"config_hash", h.config_hash},
              {"success", f.success},
              {"l_i", f.l_i},
              {"p_i", f.p_i},
              {"steps", f.steps},
              {"termination", std::string(to_string(f.reason))},
              {"final_distance", f.final_distance},
              {"revisit_steps", f.revisit_steps},
              {"planner_calls", f.planner_calls},
              {"planner_events", f.planner_events}}
             .dump()
      << '\n';
}

namespace {

TerminationReason reason_from(const std::string& s) {
  if (s == "Stopped") return TerminationReason::Stopped;
  if (s == "MaxSteps") return TerminationReason::MaxSteps;
  return TerminationReason::None;
}

}  // namespace

std::vector<EpisodeLog> read_episode_logs(std::istream& in) {
  std::vector<EpisodeLog> logs;
  std::string line;
  bool open = false;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("trajectory log: ") + e.what());
    }
    const auto type = j.value("type", std::string{});
    if (type == "header") {
      EpisodeLog log;
      auto& h = log.header;
      h.episode_id = j.at("episode_id").get<std::string>();
      h.map_ref = j.value("map_ref", std::string{});
      h.config_hash = j.value("config_hash", std::string{});
      h.start = pose_from(j.at("start"));
      h.goal = pose_from(j.at("goal"));
      h.goal_views = j.at("goal_views").get<std::vector<int>>();
      h.shortest_path_length = j.at("shortest_path_length").get<double>();
      h.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
      h.max_steps = j.at("max_steps").get<int>();
      h.wsp_enabled = j.at("wsp_enabled").get<bool>();
      h.d0 = j.at("d0").get<double>();
      h.alpha0_deg = j.at("alpha0_deg").get<double>();
      logs.push_back(std::move(log));
      open = true;
    } else if (type == "step") {
      if (!open) throw Error(ErrorCode::InvalidConfig, "step record before header");
      StepRecord s;
      s.t = j.at("t").get<int>();
      s.x = j.at("x").get<double>();
      s.y = j.at("y").get<double>();
      s.heading = j.at("heading").get<int>();
      s.action = action_from_string(j.at("action").get<std::string>());
      s.d_t = j.at("d_t").get<double>();
      s.alpha_t_deg = j.at("alpha_t_deg").get<double>();
      s.reward = reward_breakdown_from_json(j.at("reward"));
      s.plan_token = j.value("plan_token", std::string{});
      s.plan_step = j.value("plan_step", 0);
      const auto& vk = j.at("voxel_key");
      s.voxel_key = {vk.at(0).get<std::int64_t>(), vk.at(1).get<std::int64_t>(),
                     vk.at(2).get<std::int64_t>()};
      s.revisit = j.at("revisit").get<bool>();
      s.collided = j.at("collided").get<bool>();
      logs.back().steps.push_back(std::move(s));
    } else if (type == "end") {
      if (!open) throw Error(ErrorCode::InvalidConfig, "end record before header");
      auto& f = logs.back().footer;
      f.success = j.at("success").get<bool>();
      f.l_i = j.at("l_i").get<double>();
      f.p_i = j.at("p_i").get<double>();
      f.steps = j.at("steps").get<int>();
      f.reason = reason_from(j.value("termination", std::string{}));
      f.final_distance = j.value("final_distance", 0.0);
      f.revisit_steps = j.value("revisit_steps", 0);
      f.planner_calls = j.value("planner_calls", 0);
      f.planner_events = j.value("planner_events", 0);
      open = false;
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown trajectory record type '" + type + "'");
    }
  }
  return logs;
}

std::vector<EpisodeLog> read_episode_logs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open trajectory log " + path);
  return read_episode_logs(in);
}

int replay_mismatch(const GridMap& map, const EpisodeLog& log, const RewardConfig& base) {
  RewardConfig cfg = base;
  cfg.wsp_enabled = log.header.wsp_enabled;
  const DistanceField field(map, map.cell_of(log.header.goal.position()));
  Pose prev = log.header.start;
  const double d0 = field.at(prev.position());
  const double a0 = view_angle_diff(prev, log.header.goal_views);
  RewardState state = initial_reward_state(cfg, prev.position(), d0, a0);
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    const Pose cur{s.x, s.y, s.heading};
    const double d = field.at(cur.position());
    const double a = view_angle_diff(cur, log.header.goal_views);
    const auto r = evaluate_step(cfg, state, prev.position(), cur.position(), d, a,
                                 s.action == Action::Stop);
    if (!(r.breakdown == s.reward)) return static_cast<int>(i);
    prev = cur;
  }
  return -1;
}

}  // namespace hrnav
