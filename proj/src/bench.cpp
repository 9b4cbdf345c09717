#include "hrnav/bench.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "hrnav/error.hpp"
#include "hrnav/policy.hpp"
#include "hrnav/train.hpp"

namespace hrnav {

PlanOutcome DelayedPlanner::plan(const PlanningContext& /*ctx*/, const Plan& /*previous*/) {
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms_));
  return {null_plan(), std::nullopt};
}

namespace {

/// Mean wall time per step in milliseconds.
double timed_workload(const GridMap& map, const Episode& episode, Planner& planner, int k,
                      const PolicyNet& net, int steps) {
  using clock = std::chrono::steady_clock;
  NavEnv env(map);
  Episode ep = episode;
  ep.max_steps = steps + 1;
  env.reset(ep);
  PlanScheduler sched(planner, k);
  sched.begin_episode(ep);
  Hidden hidden = zero_hidden(net.shape(), 1);
  std::optional<Action> prev;
  const auto start = clock::now();
  for (int i = 0; i < steps; ++i) {
    sched.update(map, ep, env.pose(), env.steps_taken(), env.goal_distance());
    const auto feats = observe(env, sched.current(), k, prev);
    const auto d = policy_step(net, feats, hidden);
    int best = 0;
    for (int a = 1; a < kNumActions - 1; ++a) {
      if (d.probs[a] > d.probs[best]) best = a;
    }
    prev = static_cast<Action>(best);
    env.step(*prev);
  }
  const double ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  return ms / steps;
}

}  // namespace

BenchResult run_bench(const GridMap& map, const BenchConfig& cfg) {
  if (cfg.steps < 1) throw Error(ErrorCode::InvalidConfig, "bench steps must be >= 1");
  if (cfg.ks.empty()) throw Error(ErrorCode::InvalidConfig, "bench needs at least one k");
  for (int k : cfg.ks) {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "bench k values must be >= 1");
  }
  const auto episodes = sample_episodes(map, 1, cfg.seed, cfg.steps + 1);
  const Episode& ep = episodes.back();
  PolicyNet net;
  net.init(derive_seed(cfg.seed, 0));

  BenchResult res;
  NullPlanner null_planner;
  res.t_fast_ms = timed_workload(map, ep, null_planner, 1, net, cfg.steps);

  std::unique_ptr<Planner> planner;
  if (cfg.planner == "stub") {
    planner = std::make_unique<DelayedPlanner>(cfg.t_slow_ms);
  } else {
    HierConfig h;
    h.planner = cfg.planner;
    h.bridge_timeout_ms = cfg.bridge_timeout_ms;
    planner = make_planner(h);
  }
  for (int k : cfg.ks) {
    LatencyProfile p;
    p.k = k;
    p.t_fast = res.t_fast_ms;
    p.t_slow = cfg.t_slow_ms;
    p.model = amortized_latency(p.t_fast, p.t_slow, k);
    p.measured_avg = timed_workload(map, ep, *planner, k, net, cfg.steps);
    p.fps = 1000.0 / p.measured_avg;
    res.rows.push_back(p);
  }
  return res;
}

std::string latency_csv(const BenchResult& r, const std::string& config_hash) {
  std::ostringstream o;
  o << "# config_hash=" << config_hash << '\n';
  o << "k,t_fast_ms,t_slow_ms,model_ms,measured_ms,fps,residual_ms\n";
  char buf[256];
  for (const auto& p : r.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f,%.3f,%.4f\n", p.k, p.t_fast, p.t_slow,
                  p.model, p.measured_avg, p.fps, p.residual());
    o << buf;
  }
  return o.str();
}

}  // namespace hrnav
