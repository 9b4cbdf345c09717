#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hrnav/rng.hpp"

namespace hrnav {

constexpr double kForwardStepM = 0.25;
constexpr int kTurnDeg = 30;
constexpr int kDefaultMaxSteps = 500;
constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

double distance(Vec2 a, Vec2 b);

struct CellIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

enum class Cell : std::uint8_t { Free, Obstacle };

struct MapMeta {
  double cell_size_m = 0.125;
  double agent_radius_m = 0.1;
  std::string name = "map";
};

/// Occupancy grid with an obstacle mask inflated by the agent radius.
///
/// Cell (row, col) covers x in [col*s, (col+1)*s) and y in [row*s, (row+1)*s).
/// Positions outside the grid are treated as blocked.
class GridMap {
 public:
  GridMap(int rows, int cols, std::vector<Cell> cells, MapMeta meta);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double cell_size() const { return meta_.cell_size_m; }
  double agent_radius() const { return meta_.agent_radius_m; }
  const MapMeta& meta() const { return meta_; }

  bool in_bounds(CellIndex c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }
  int index(CellIndex c) const { return c.row * cols_ + c.col; }
  CellIndex cell_at(int index) const { return {index / cols_, index % cols_}; }

  bool is_obstacle(CellIndex c) const;
  /// Raw obstacle, inflated band, or out of bounds.
  bool is_blocked(CellIndex c) const;
  bool is_free(Vec2 p) const { return !is_blocked(cell_of(p)); }

  CellIndex cell_of(Vec2 p) const;
  Vec2 center_of(CellIndex c) const;

  std::size_t free_cell_count() const;
  std::vector<CellIndex> free_cells() const;

  std::optional<CellIndex> start_hint;
  std::optional<CellIndex> goal_hint;

 private:
  int rows_;
  int cols_;
  std::vector<Cell> cells_;
  std::vector<std::uint8_t> inflated_;
  MapMeta meta_;
};

/// Parses the ASCII map format ('#' obstacle, '.' free, 'S'/'G' free hint cells).
GridMap load_map(std::string_view text, const MapMeta& meta);
/// Reads an ASCII map file plus the optional `.json` sidecar next to it.
GridMap load_map_file(const std::string& path);
MapMeta load_map_meta(const std::string& json_path);

/// Single-source shortest lattice distances over free inflated cells,
/// 8-connected, diagonal edges weighted sqrt(2)*cell_size.
class DistanceField {
 public:
  DistanceField(const GridMap& map, CellIndex source);

  CellIndex source() const { return source_; }
  double at(CellIndex c) const;
  double at(Vec2 p) const;
  /// Cells from `from` to the source (inclusive) following steepest descent.
  std::vector<CellIndex> path_to_source(CellIndex from) const;

 private:
  const GridMap* map_;
  CellIndex source_;
  std::vector<double> dist_;
};

/// Returns kUnreachable when the positions are disconnected.
double geodesic_distance(const GridMap& map, Vec2 from, Vec2 to);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  int heading = 0;  // degrees, multiple of 30 in [0, 360)

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

enum class Action : std::uint8_t { MoveForward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };
constexpr int kNumActions = 4;

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

double wrap_angle_diff_deg(double a, double b);
/// Minimum wrapped heading difference to any goal view, in [0, 180].
double view_angle_diff(const Pose& pose, const std::vector<int>& goal_views);

enum class Difficulty : std::uint8_t { Easy, Medium, Hard };
std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view s);
/// Easy [1.5, 3), Medium [3, 5), Hard [5, 10]; nullopt outside all strata.
std::optional<Difficulty> classify_difficulty(double geodesic_m);

struct Episode {
  std::string id;
  std::string map_ref;
  Pose start;
  Pose goal;
  std::vector<int> goal_views;
  double shortest_path_length = 0.0;
  int max_steps = kDefaultMaxSteps;
  Difficulty difficulty = Difficulty::Easy;
};

enum class TerminationReason : std::uint8_t { None, Stopped, MaxSteps };
std::string_view to_string(TerminationReason r);

struct StepOutcome {
  Pose new_pose;
  bool collided = false;
  bool terminated = false;
  TerminationReason termination_reason = TerminationReason::None;
};

Vec2 heading_direction(int heading_deg);
/// Egocentric bearing of `target` in degrees, counter-clockwise from heading, in (-180, 180].
double relative_bearing_deg(const Pose& pose, Vec2 target);
int normalize_heading(int heading_deg);

/// Transition function. `step_index` is the 1-based count of this step.
StepOutcome step(const GridMap& map, const Pose& pose, Action action, int step_index,
                 int max_steps);

std::vector<Episode> sample_episodes(const GridMap& map, int n_per_stratum,
                                     std::uint64_t rng_seed,
                                     int max_steps = kDefaultMaxSteps);

constexpr int kPatchSize = 11;
using EgoPatch = std::array<std::uint8_t, kPatchSize * kPatchSize>;

/// Egocentric occupancy patch, row 0 farthest ahead, column 0 leftmost.
/// The agent sits at the centre cell; samples are `spacing_m` apart.
EgoPatch ego_patch(const GridMap& map, const Pose& pose, double spacing_m = 0.25);

/// Episode-bound environment holding a goal distance field.
class NavEnv {
 public:
  explicit NavEnv(const GridMap& map);

  void reset(const Episode& episode);
  StepOutcome step(Action action);

  const GridMap& map() const { return *map_; }
  const Episode& episode() const { return episode_; }
  const Pose& pose() const { return pose_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }

  double goal_distance() const;
  double goal_distance(Vec2 p) const;
  double view_angle() const { return view_angle_diff(pose_, episode_.goal_views); }
  const DistanceField& goal_field() const { return *field_; }

 private:
  const GridMap* map_;
  Episode episode_;
  std::optional<DistanceField> field_;
  Pose pose_;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace hrnav
