#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hrnav/env.hpp"
#include "hrnav/trajlog.hpp"

namespace hrnav {

constexpr double kSuccessDistanceM = 1.0;

struct EpisodeResult {
  std::string episode_id;
  bool success = false;
  double shortest = 0.0;  // l_i
  double traveled = 0.0;  // p_i
  int steps = 0;
  int revisit_steps = 0;
  int planner_calls = 0;
  Difficulty difficulty = Difficulty::Easy;
};

/// (1/N) Σ S_i l_i / max(p_i, l_i).
double spl(const std::vector<EpisodeResult>& results);
double sr(const std::vector<EpisodeResult>& results);

struct StratumStats {
  std::size_t n = 0;
  double sr = 0.0;
  double spl = 0.0;
};

struct StratifiedReport {
  std::array<std::optional<StratumStats>, 3> strata;  // indexed by Difficulty
  StratumStats overall;                               // pooled over all episodes
  StratumStats macro;                                 // unweighted mean of present strata
  bool pooled_differs_from_macro = false;
};

StratifiedReport stratified_report(const std::vector<EpisodeResult>& results);

/// CSV with header `split,difficulty,n,SR,SPL`; one row per present stratum
/// plus `Overall`. A trailing comment line carries the config hash.
std::string results_csv(const StratifiedReport& report, const std::string& split,
                        const std::string& config_hash);

/// t_fast + t_slow / k.
double amortized_latency(double t_fast_ms, double t_slow_ms, int k);

struct LatencyProfile {
  double t_fast = 0.0;
  double t_slow = 0.0;
  int k = 1;
  double model = 0.0;
  double measured_avg = 0.0;
  double fps = 0.0;

  double residual() const { return measured_avg - model; }
};

struct WanderingDiagnostics {
  double revisit_rate = 0.0;
  double path_ratio = 0.0;
  int oscillation_count = 0;
};

/// revisit_rate = revisit steps / steps; path_ratio = p / l; oscillations
/// are left-right-left or right-left-right turn triples.
WanderingDiagnostics wandering_diagnostics(const EpisodeLog& log);

/// Recomputes the result from raw step records (ignores the terminal record).
EpisodeResult result_from_log(const EpisodeLog& log);

}  // namespace hrnav
