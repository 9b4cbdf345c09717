#include "hrnav/env.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "hrnav/error.hpp"

namespace hrnav {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

GridMap::GridMap(int rows, int cols, std::vector<Cell> cells, MapMeta meta)
    : rows_(rows), cols_(cols), cells_(std::move(cells)), meta_(std::move(meta)) {
  if (rows_ <= 0 || cols_ <= 0 || cells_.empty()) {
    throw Error(ErrorCode::EmptyMap, "map has no cells");
  }
  if (cells_.size() != static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_)) {
    throw Error(ErrorCode::RaggedRows, "cell count does not match rows*cols");
  }
  if (!(meta_.cell_size_m > 0.0) || meta_.agent_radius_m < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "cell_size must be > 0 and agent_radius >= 0");
  }

  // A cell is inflated when its centre lies within agent_radius of any
  // obstacle cell's square.
  inflated_.assign(cells_.size(), 0);
  const double s = meta_.cell_size_m;
  const double r = meta_.agent_radius_m;
  const int reach = static_cast<int>(std::ceil(r / s)) + 1;
  for (int row = 0; row < rows_; ++row) {
    for (int col = 0; col < cols_; ++col) {
      if (cells_[index({row, col})] != Cell::Obstacle) continue;
      for (int dr = -reach; dr <= reach; ++dr) {
        for (int dc = -reach; dc <= reach; ++dc) {
          const CellIndex n{row + dr, col + dc};
          if (!in_bounds(n)) continue;
          const double gx = std::max(std::abs(dc) * s - 0.5 * s, 0.0);
          const double gy = std::max(std::abs(dr) * s - 0.5 * s, 0.0);
          if (std::hypot(gx, gy) <= r) inflated_[index(n)] = 1;
        }
      }
    }
  }
}

bool GridMap::is_obstacle(CellIndex c) const {
  return in_bounds(c) && cells_[index(c)] == Cell::Obstacle;
}

bool GridMap::is_blocked(CellIndex c) const {
  return !in_bounds(c) || inflated_[index(c)] != 0;
}

CellIndex GridMap::cell_of(Vec2 p) const {
  const double s = meta_.cell_size_m;
  return {static_cast<int>(std::floor(p.y / s)), static_cast<int>(std::floor(p.x / s))};
}

Vec2 GridMap::center_of(CellIndex c) const {
  const double s = meta_.cell_size_m;
  return {(c.col + 0.5) * s, (c.row + 0.5) * s};
}

std::size_t GridMap::free_cell_count() const {
  return static_cast<std::size_t>(std::count(inflated_.begin(), inflated_.end(), 0));
}

std::vector<CellIndex> GridMap::free_cells() const {
  std::vector<CellIndex> out;
  for (int i = 0; i < rows_ * cols_; ++i) {
    if (inflated_[i] == 0) out.push_back(cell_at(i));
  }
  return out;
}

GridMap load_map(std::string_view text, const MapMeta& meta) {
  std::vector<std::string> lines;
  std::string current;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  if (!current.empty()) lines.push_back(current);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front().empty()) {
    throw Error(ErrorCode::EmptyMap, "map text contains no rows");
  }

  const int rows = static_cast<int>(lines.size());
  const int cols = static_cast<int>(lines.front().size());
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(rows) * cols);
  std::optional<CellIndex> start_hint;
  std::optional<CellIndex> goal_hint;
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(lines[r].size()) != cols) {
      throw Error(ErrorCode::RaggedRows, "row " + std::to_string(r) + " has length " +
                                             std::to_string(lines[r].size()) + ", expected " +
                                             std::to_string(cols));
    }
    for (int c = 0; c < cols; ++c) {
      switch (lines[r][c]) {
        case '#': cells.push_back(Cell::Obstacle); break;
        case '.': cells.push_back(Cell::Free); break;
        case 'S':
          cells.push_back(Cell::Free);
          start_hint = CellIndex{r, c};
          break;
        case 'G':
          cells.push_back(Cell::Free);
          goal_hint = CellIndex{r, c};
          break;
        default:
          throw Error(ErrorCode::UnknownGlyph, std::string("glyph '") + lines[r][c] +
                                                   "' at row " + std::to_string(r) +
                                                   ", col " + std::to_string(c));
      }
    }
  }
  GridMap map(rows, cols, std::move(cells), meta);
  map.start_hint = start_hint;
  map.goal_hint = goal_hint;
  return map;
}

MapMeta load_map_meta(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open map metadata " + json_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, json_path + ": " + e.what());
  }
  MapMeta meta;
  meta.cell_size_m = j.value("cell_size_m", meta.cell_size_m);
  meta.agent_radius_m = j.value("agent_radius_m", meta.agent_radius_m);
  meta.name = j.value("name", std::filesystem::path(json_path).stem().string());
  return meta;
}

GridMap load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open map file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::filesystem::path sidecar(path);
  sidecar.replace_extension(".json");
  MapMeta meta;
  if (std::filesystem::exists(sidecar)) {
    meta = load_map_meta(sidecar.string());
  } else {
    meta.name = std::filesystem::path(path).stem().string();
  }
  return load_map(buf.str(), meta);
}

namespace {

struct Neighbor {
  int dr;
  int dc;
  double weight;  // in cells
};

constexpr std::array<Neighbor, 8> kNeighbors = {{
    {-1, 0, 1.0},
    {1, 0, 1.0},
    {0, -1, 1.0},
    {0, 1, 1.0},
    {-1, -1, std::numbers::sqrt2},
    {-1, 1, std::numbers::sqrt2},
    {1, -1, std::numbers::sqrt2},
    {1, 1, std::numbers::sqrt2},
}};

}  // namespace

DistanceField::DistanceField(const GridMap& map, CellIndex source) : map_(&map), source_(source) {
  if (map.is_blocked(source)) {
    throw Error(ErrorCode::PositionInObstacle, "distance field source is not free");
  }
  const double s = map.cell_size();
  dist_.assign(static_cast<std::size_t>(map.rows()) * map.cols(), kUnreachable);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist_[map.index(source)] = 0.0;
  open.emplace(0.0, map.index(source));
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    if (d > dist_[idx]) continue;
    const CellIndex c = map.cell_at(idx);
    for (const auto& n : kNeighbors) {
      const CellIndex nc{c.row + n.dr, c.col + n.dc};
      if (map.is_blocked(nc)) continue;
      const double nd = d + n.weight * s;
      const int nidx = map.index(nc);
      if (nd < dist_[nidx]) {
        dist_[nidx] = nd;
        open.emplace(nd, nidx);
      }
    }
  }
}

double DistanceField::at(CellIndex c) const {
  if (!map_->in_bounds(c)) return kUnreachable;
  return dist_[map_->index(c)];
}

double DistanceField::at(Vec2 p) const { return at(map_->cell_of(p)); }

std::vector<CellIndex> DistanceField::path_to_source(CellIndex from) const {
  std::vector<CellIndex> path;
  if (!std::isfinite(at(from))) return path;
  const double s = map_->cell_size();
  CellIndex cur = from;
  path.push_back(cur);
  while (!(cur == source_)) {
    const double here = at(cur);
    CellIndex best = cur;
    double best_d = here;
    for (const auto& n : kNeighbors) {
      const CellIndex nc{cur.row + n.dr, cur.col + n.dc};
      if (map_->is_blocked(nc)) continue;
      const double nd = at(nc);
      // Only follow edges that lie on a shortest path.
      if (std::abs(nd + n.weight * s - here) <= 1e-9 * (1.0 + here) && nd < best_d) {
        best = nc;
        best_d = nd;
      }
    }
    if (best == cur) break;
    cur = best;
    path.push_back(cur);
  }
  return path;
}

double geodesic_distance(const GridMap& map, Vec2 from, Vec2 to) {
  const CellIndex a = map.cell_of(from);
  const CellIndex b = map.cell_of(to);
  if (map.is_blocked(a) || map.is_blocked(b)) {
    throw Error(ErrorCode::PositionInObstacle, "geodesic endpoint is not in free space");
  }
  if (a == b) return 0.0;
  return DistanceField(map, b).at(a);
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::MoveForward: return "MoveForward";
    case Action::TurnLeft: return "TurnLeft";
    case Action::TurnRight: return "TurnRight";
    case Action::Stop: return "Stop";
  }
  return "?";
}

Action action_from_string(std::string_view s) {
  for (int i = 0; i < kNumActions; ++i) {
    const auto a = static_cast<Action>(i);
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown action '" + std::string(s) + "'");
}

double wrap_angle_diff_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

double view_angle_diff(const Pose& pose, const std::vector<int>& goal_views) {
  if (goal_views.empty()) throw Error(ErrorCode::EmptyViews, "goal has no views");
  double best = 180.0;
  for (int v : goal_views) best = std::min(best, wrap_angle_diff_deg(pose.heading, v));
  return best;
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Hard: return "Hard";
  }
  return "?";
}

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "Easy") return Difficulty::Easy;
  if (s == "Medium") return Difficulty::Medium;
  if (s == "Hard") return Difficulty::Hard;
  throw Error(ErrorCode::InvalidConfig, "unknown difficulty '" + std::string(s) + "'");
}

std::optional<Difficulty> classify_difficulty(double d) {
  if (d >= 1.5 && d < 3.0) return Difficulty::Easy;
  if (d >= 3.0 && d < 5.0) return Difficulty::Medium;
  if (d >= 5.0 && d <= 10.0) return Difficulty::Hard;
  return std::nullopt;
}

std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::None: return "None";
    case TerminationReason::Stopped: return "Stopped";
    case TerminationReason::MaxSteps: return "MaxSteps";
  }
  return "?";
}

int normalize_heading(int heading_deg) { return ((heading_deg % 360) + 360) % 360; }

double relative_bearing_deg(const Pose& pose, Vec2 target) {
  const Vec2 fwd = heading_direction(pose.heading);
  const double dx = target.x - pose.x;
  const double dy = target.y - pose.y;
  const double ahead = dx * fwd.x + dy * fwd.y;
  const double left = -dx * fwd.y + dy * fwd.x;
  return std::atan2(left, ahead) * 180.0 / std::numbers::pi;
}

Vec2 heading_direction(int heading_deg) {
  // Exact table for the 12 reachable headings keeps cardinal moves exact.
  static const std::array<Vec2, 12> table = [] {
    std::array<Vec2, 12> t{};
    for (int i = 0; i < 12; ++i) {
      const double rad = i * kTurnDeg * std::numbers::pi / 180.0;
      t[i] = {std::cos(rad), std::sin(rad)};
    }
    t[0] = {1.0, 0.0};
    t[3] = {0.0, 1.0};
    t[6] = {-1.0, 0.0};
    t[9] = {0.0, -1.0};
    t[1] = {std::sqrt(3.0) / 2.0, 0.5};
    t[2] = {0.5, std::sqrt(3.0) / 2.0};
    t[4] = {-0.5, std::sqrt(3.0) / 2.0};
    t[5] = {-std::sqrt(3.0) / 2.0, 0.5};
    t[7] = {-std::sqrt(3.0) / 2.0, -0.5};
    t[8] = {-0.5, -std::sqrt(3.0) / 2.0};
    t[10] = {0.5, -std::sqrt(3.0) / 2.0};
    t[11] = {std::sqrt(3.0) / 2.0, -0.5};
    return t;
  }();
  const int h = normalize_heading(heading_deg);
  if (h % kTurnDeg == 0) return table[h / kTurnDeg];
  const double rad = h * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

StepOutcome step(const GridMap& map, const Pose& pose, Action action, int step_index,
                 int max_steps) {
  StepOutcome out;
  out.new_pose = pose;
  switch (action) {
    case Action::TurnLeft:
      out.new_pose.heading = normalize_heading(pose.heading + kTurnDeg);
      break;
    case Action::TurnRight:
      out.new_pose.heading = normalize_heading(pose.heading - kTurnDeg);
      break;
    case Action::MoveForward: {
      const Vec2 dir = heading_direction(pose.heading);
      // Swept segment sampled at <= cell_size/2.
      const int samples =
          std::max(1, static_cast<int>(std::ceil(kForwardStepM / (0.5 * map.cell_size()))));
      bool clear = true;
      for (int i = 1; i <= samples && clear; ++i) {
        const double t = kForwardStepM * i / samples;
        clear = map.is_free({pose.x + dir.x * t, pose.y + dir.y * t});
      }
      if (clear) {
        out.new_pose.x = pose.x + dir.x * kForwardStepM;
        out.new_pose.y = pose.y + dir.y * kForwardStepM;
      } else {
        out.collided = true;
      }
      break;
    }
    case Action::Stop:
      out.terminated = true;
      out.termination_reason = TerminationReason::Stopped;
      return out;
  }
  if (step_index >= max_steps) {
    out.terminated = true;
    out.termination_reason = TerminationReason::MaxSteps;
  }
  return out;
}

std::vector<Episode> sample_episodes(const GridMap& map, int n_per_stratum,
                                     std::uint64_t rng_seed, int max_steps) {
  const auto free = map.free_cells();
  if (free.size() < 2) {
    throw Error(ErrorCode::StratumUnsatisfiable, "map has fewer than two free cells");
  }
  Rng rng(rng_seed);
  std::vector<Episode> episodes;
  const int budget = std::max(200, 50 * n_per_stratum);
  for (Difficulty stratum : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
    int made = 0;
    int attempts = 0;
    while (made < n_per_stratum) {
      if (++attempts > budget) {
        throw Error(ErrorCode::StratumUnsatisfiable,
                    std::string(to_string(stratum)) + " after " + std::to_string(budget) +
                        " attempts");
      }
      const CellIndex start = free[uniform_index(rng, free.size())];
      const DistanceField field(map, start);
      std::vector<CellIndex> candidates;
      for (const auto& c : free) {
        const auto d = classify_difficulty(field.at(c));
        if (d && *d == stratum) candidates.push_back(c);
      }
      if (candidates.empty()) continue;
      const CellIndex goal = candidates[uniform_index(rng, candidates.size())];
      Episode ep;
      ep.map_ref = map.meta().name;
      ep.id = ep.map_ref + "-" + std::string(to_string(stratum)) + "-" + std::to_string(made);
      const Vec2 s = map.center_of(start);
      const Vec2 g = map.center_of(goal);
      ep.start = {s.x, s.y, static_cast<int>(uniform_index(rng, 12)) * kTurnDeg};
      ep.goal = {g.x, g.y, static_cast<int>(uniform_index(rng, 12)) * kTurnDeg};
      ep.goal_views = {ep.goal.heading};
      ep.shortest_path_length = field.at(goal);
      ep.max_steps = max_steps;
      ep.difficulty = stratum;
      episodes.push_back(std::move(ep));
      ++made;
    }
  }
  return episodes;
}

EgoPatch ego_patch(const GridMap& map, const Pose& pose, double spacing_m) {
  EgoPatch patch{};
  const Vec2 fwd = heading_direction(pose.heading);
  const Vec2 left{-fwd.y, fwd.x};
  const int half = kPatchSize / 2;
  for (int i = 0; i < kPatchSize; ++i) {
    const double ahead = (half - i) * spacing_m;
    for (int j = 0; j < kPatchSize; ++j) {
      const double lateral = (half - j) * spacing_m;
      const Vec2 p{pose.x + ahead * fwd.x + lateral * left.x,
                   pose.y + ahead * fwd.y + lateral * left.y};
      patch[i * kPatchSize + j] = map.is_free(p) ? 0 : 1;
    }
  }
  return patch;
}

NavEnv::NavEnv(const GridMap& map) : map_(&map) {}

void NavEnv::reset(const Episode& episode) {
  if (episode.goal_views.empty()) throw Error(ErrorCode::EmptyViews, episode.id);
  if (!map_->is_free(episode.start.position()) || !map_->is_free(episode.goal.position())) {
    throw Error(ErrorCode::PositionInObstacle, "episode " + episode.id);
  }
  if (!field_ || !(field_->source() == map_->cell_of(episode.goal.position()))) {
    field_.emplace(*map_, map_->cell_of(episode.goal.position()));
  }
  episode_ = episode;
  pose_ = episode.start;
  steps_ = 0;
  done_ = false;
}

StepOutcome NavEnv::step(Action action) {
  ++steps_;
  StepOutcome out = hrnav::step(*map_, pose_, action, steps_, episode_.max_steps);
  pose_ = out.new_pose;
  done_ = out.terminated;
  return out;
}

double NavEnv::goal_distance() const { return goal_distance(pose_.position()); }

double NavEnv::goal_distance(Vec2 p) const { return field_->at(p); }

}  // namespace hrnav
