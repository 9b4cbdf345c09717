#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hrnav/env.hpp"
#include "hrnav/hier.hpp"
#include "hrnav/metrics.hpp"

namespace hrnav {

/// In-process planner that sleeps for a fixed time, then returns Explore.
class DelayedPlanner : public Planner {
 public:
  explicit DelayedPlanner(double delay_ms) : delay_ms_(delay_ms) {}
  PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) override;

 private:
  double delay_ms_;
};

struct BenchConfig {
  std::vector<int> ks{5, 10, 15, 30, 60};
  double t_slow_ms = 374.0;
  int steps = 5000;
  /// "stub" for the in-process delayed planner, otherwise any planner spec
  /// (e.g. "Bridge:<command>") whose latency is taken as t_slow.
  std::string planner = "stub";
  double bridge_timeout_ms = 5000.0;
  std::uint64_t seed = 1;
};

struct BenchResult {
  double t_fast_ms = 0.0;
  std::vector<LatencyProfile> rows;
};

/// One long episode of `steps` steps per k, executor = freshly initialised
/// policy (Stop masked out). t_fast is measured with the Null planner.
BenchResult run_bench(const GridMap& map, const BenchConfig& cfg);

/// `k,t_fast_ms,t_slow_ms,model_ms,measured_ms,fps,residual_ms` plus a
/// config-hash comment line.
std::string latency_csv(const BenchResult& r, const std::string& config_hash);

}  // namespace hrnav
