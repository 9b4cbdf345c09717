#pragma once

// Fixture generators shared by the unit and acceptance tests.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hrnav/annot.hpp"
#include "hrnav/env.hpp"
#include "hrnav/metrics.hpp"
#include "hrnav/reward.hpp"

namespace support {

using namespace hrnav;

inline std::string source_dir() { return HRNAV_SOURCE_DIR; }
inline std::string map_path(const std::string& name) {
  return source_dir() + "/data/maps/" + name + ".txt";
}

/// Fresh empty directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::path(HRNAV_BINARY_DIR) / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

struct Rollout {
  std::vector<Pose> poses;  // poses[0] is the start
  std::vector<double> d;    // geodesic distance at each pose
  std::vector<double> alpha;
  bool stopped = false;
};

/// Random walk with a forward bias on `map`; the last step is Stop half the time.
inline Rollout random_rollout(const GridMap& map, std::mt19937_64& rng, int max_len) {
  const auto free = map.free_cells();
  const CellIndex g = free[rng() % free.size()];
  const DistanceField field(map, g);
  std::vector<CellIndex> reach;
  for (const auto& c : free) {
    if (std::isfinite(field.at(c))) reach.push_back(c);
  }
  const Vec2 s = map.center_of(reach[rng() % reach.size()]);
  const std::vector<int> views{static_cast<int>(rng() % 12) * 30};
  Rollout r;
  Pose p{s.x, s.y, static_cast<int>(rng() % 12) * 30};
  auto push = [&](const Pose& q) {
    r.poses.push_back(q);
    r.d.push_back(field.at(q.position()));
    r.alpha.push_back(view_angle_diff(q, views));
  };
  push(p);
  const int len = 1 + static_cast<int>(rng() % max_len);
  std::discrete_distribution<int> pick({0.6, 0.2, 0.2});
  for (int t = 1; t <= len; ++t) {
    const bool last = t == len;
    const Action a = last && rng() % 2 ? Action::Stop : static_cast<Action>(pick(rng));
    p = step(map, p, a, t, 100000).new_pose;
    push(p);
    if (a == Action::Stop) r.stopped = true;
  }
  return r;
}

struct RolloutTotals {
  double sum_wsp_weighted = 0.0;
  double sum_shaping = 0.0;  // total minus slack and success
  double max_wsp = -1e300;
  double path_len = 0.0;
  double revisit_counter = 0.0;
  double phi0 = 0.0;
  double phiT = 0.0;
  int steps = 0;
  std::vector<double> path_deltas;
};

inline RolloutTotals replay_rewards(const RewardConfig& cfg, const Rollout& r) {
  RolloutTotals out;
  RewardState st = initial_reward_state(cfg, r.poses[0].position(), r.d[0], r.alpha[0]);
  out.phi0 = potential(cfg, st.path_len, st.revisit_counter, r.d[0], r.alpha[0]);
  for (std::size_t t = 1; t < r.poses.size(); ++t) {
    const bool stop = r.stopped && t + 1 == r.poses.size();
    const auto sr = evaluate_step(cfg, st, r.poses[t - 1].position(), r.poses[t].position(),
                                  r.d[t], r.alpha[t], stop);
    const auto& b = sr.breakdown;
    out.sum_wsp_weighted += b.wsp_path_term + b.wsp_revisit_term;
    out.sum_shaping += b.total - b.slack_term - b.success_term;
    out.max_wsp = std::max(out.max_wsp, sr.wsp.value());
    out.path_deltas.push_back(sr.wsp.path_delta);
    ++out.steps;
  }
  out.path_len = st.path_len;
  out.revisit_counter = st.revisit_counter;
  out.phiT = potential(cfg, st.path_len, st.revisit_counter, r.d.back(), r.alpha.back());
  return out;
}

inline std::vector<EpisodeResult> random_results(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 40);
  std::uniform_real_distribution<double> len(0.5, 10.0);
  std::uniform_real_distribution<double> ratio(0.3, 3.0);
  std::vector<EpisodeResult> out(static_cast<std::size_t>(n(rng)));
  for (auto& r : out) {
    r.success = rng() % 3 != 0;
    r.shortest = len(rng);
    r.traveled = rng() % 7 == 0 ? 0.0 : r.shortest * ratio(rng);
    r.difficulty = static_cast<Difficulty>(rng() % 3);
    r.steps = 1 + static_cast<int>(rng() % 500);
  }
  return out;
}

// ---- TQCM corpus ----

enum class Defect { None, Format, Temporal };

struct CorpusItem {
  annot::TrajectoryRecord traj;
  std::string annotation;
  Defect defect = Defect::None;
};

/// A clean annotation tiles the frames with `n_sub` touching intervals.
/// Format defects break the grammar in one of several ways; temporal
/// defects keep the grammar but overlap, reorder, or empty an interval.
inline std::vector<CorpusItem> tqcm_corpus(int n, int n_format, int n_temporal,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Defect> kinds(static_cast<std::size_t>(n), Defect::None);
  for (int i = 0; i < n_format; ++i) kinds[i] = Defect::Format;
  for (int i = 0; i < n_temporal; ++i) kinds[n_format + i] = Defect::Temporal;
  std::shuffle(kinds.begin(), kinds.end(), rng);

  std::vector<CorpusItem> out;
  for (int i = 0; i < n; ++i) {
    CorpusItem item;
    item.defect = kinds[i];
    const int n_sub = 2 + static_cast<int>(rng() % 3);
    const int frames = n_sub * 6 + static_cast<int>(rng() % 20);
    item.traj.id = "traj" + std::to_string(i);
    item.traj.num_frames = frames;
    item.traj.actions.assign(frames, "MoveForward");
    item.traj.instruction = "walk to the goal";
    std::vector<int> starts{0};
    for (int k = 1; k < n_sub; ++k) starts.push_back(starts.back() + 3 + static_cast<int>(rng() % 3));
    for (int k = 0; k < n_sub; ++k) item.traj.sub_instructions.push_back("step " + std::to_string(k + 1));

    std::vector<std::string> lines;
    for (int k = 0; k < n_sub; ++k) {
      const std::string head = "# Instruction" + std::to_string(k + 1) + ": from frame " +
                               std::to_string(starts[k]);
      lines.push_back(k + 1 < n_sub ? head + " to frame " + std::to_string(starts[k + 1]) + ";"
                                    : head + " onwards;");
    }
    const int victim = static_cast<int>(rng() % n_sub);
    if (item.defect == Defect::Format) {
      switch (rng() % 5) {
        case 0: lines[victim] = "Instruction" + std::to_string(victim + 1) + " from 0 to 3"; break;
        case 1: lines[victim] = "# Instruction" + std::to_string(victim + 7) + ": from frame 0 to frame 1;"; break;
        case 2: lines.push_back(lines[victim]); break;
        case 3: lines[victim] = "# Instruction" + std::to_string(victim + 1) + ": from frame x to frame 3;"; break;
        default: lines[victim] += " trailing words"; break;
      }
    } else if (item.defect == Defect::Temporal) {
      const int a = n_sub - 2;  // a and a+1 exist
      switch (rng() % 3) {
        case 0:  // overlap: interval a ends two frames late
          lines[a] = "# Instruction" + std::to_string(a + 1) + ": from frame " +
                     std::to_string(starts[a]) + " to frame " + std::to_string(starts[a + 1] + 2) + ";";
          break;
        case 1:  // empty interval
          lines[a] = "# Instruction" + std::to_string(a + 1) + ": from frame " +
                     std::to_string(starts[a]) + " to frame " + std::to_string(starts[a]) + ";";
          break;
        default:  // start order: last interval starts before its predecessor
          lines[a + 1] = "# Instruction" + std::to_string(a + 2) + ": from frame " +
                         std::to_string(std::max(0, starts[a] - 1)) + " onwards;";
          if (starts[a] == 0) {
            lines[a] = "# Instruction" + std::to_string(a + 1) + ": from frame 2 to frame " +
                       std::to_string(starts[a + 1]) + ";";
            lines[a + 1] = "# Instruction" + std::to_string(a + 2) + ": from frame 1 onwards;";
          }
          break;
      }
    }
    for (const auto& l : lines) item.annotation += l + "\n";
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace support
