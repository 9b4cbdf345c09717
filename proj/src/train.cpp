#include "hrnav/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "hrnav/bridge.hpp"
#include "hrnav/error.hpp"

namespace hrnav {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using nlohmann::json;

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(clip > 0.0 && clip < 1.0)) bad("train.clip must lie in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0)) bad("train.discount must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) bad("train.gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) bad("train.learning_rate must be positive");
  if (rollout_len < 1) bad("train.rollout_len must be >= 1");
  if (epochs_per_update < 1) bad("train.epochs_per_update must be >= 1");
  if (num_envs < 1) bad("train.num_envs must be >= 1");
  if (minibatches < 1 || minibatches > num_envs) bad("train.minibatches must lie in [1, num_envs]");
  if (total_env_steps < 1) bad("train.total_env_steps must be >= 1");
  if (workers < 1) bad("train.workers must be >= 1");
  if (!(max_grad_norm > 0.0)) bad("train.max_grad_norm must be positive");
  if (!(wsp_warmup >= 0.0 && wsp_warmup <= 1.0)) bad("train.wsp_warmup must lie in [0, 1]");
  if (probe_interval < 1) bad("train.probe_interval must be >= 1");
  if (!(patch_dropout >= 0.0 && patch_dropout < 1.0)) bad("train.patch_dropout must lie in [0, 1)");
  if (net.input != kFusedWidth || net.actions != kNumActions) {
    bad("train.net input/actions must be 138/4");
  }
}

long TrainConfig::iterations() const {
  const long per = static_cast<long>(rollout_len) * num_envs;
  return (total_env_steps + per - 1) / per;
}

// ---------------------------------------------------------------------------

int argmax_action(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ObservationFeatures observe(const NavEnv& env, const Plan& plan, int k,
                            std::optional<Action> prev_action) {
  const Pose& pose = env.pose();
  return fuse(ego_patch(env.map(), pose),
              goal_vector(pose, env.episode().goal.position(), env.goal_distance()),
              plan_feature(plan, pose, env.steps_taken(), k), prev_action);
}

Action PolicyExecutor::act(const ExecutorContext& ctx) {
  if (hidden_.empty()) begin_episode();
  const auto d = policy_step(*net_, *ctx.features, hidden_);
  return static_cast<Action>(argmax_action(d.probs));
}

Action GreedyExecutor::act(const ExecutorContext& ctx) {
  const NavEnv& env = *ctx.env;
  const Plan& plan = *ctx.plan;
  if (plan.token == PlanToken::StopNearGoal) return Action::Stop;
  const Vec2 target = plan.waypoint.value_or(env.episode().goal.position());
  if (distance(env.pose().position(), target) < 1e-9) return Action::Stop;
  const double b = relative_bearing_deg(env.pose(), target);
  if (std::abs(b) > kTurnDeg / 2.0) return b > 0.0 ? Action::TurnLeft : Action::TurnRight;
  const auto probe = hrnav::step(env.map(), env.pose(), Action::MoveForward, 1, 2);
  if (probe.collided) return Action::TurnLeft;
  return Action::MoveForward;
}

// ---------------------------------------------------------------------------

namespace {

bool is_bridge(const HierConfig& h) { return h.planner.rfind("Bridge:", 0) == 0; }

/// Environment, planner schedule, reward accumulators and log for one
/// episode at a time.
class EpisodeSlot {
 public:
  EpisodeSlot(const EpisodeRunConfig& cfg, Planner* shared_planner)
      : cfg_(&cfg),
        owned_(shared_planner ? nullptr : make_planner(cfg.hier)),
        sched_(shared_planner ? *shared_planner : *owned_, cfg.hier.k, cfg.hier.history_len) {}

  void begin(const GridMap& map, const Episode& ep, bool wsp_enabled, bool record) {
    env_.emplace(map);
    env_->reset(ep);
    reward_cfg_ = cfg_->reward;
    reward_cfg_.wsp_enabled = wsp_enabled;
    sched_.begin_episode(ep);
    const double d0 = env_->goal_distance();
    const double a0 = env_->view_angle();
    state_ = initial_reward_state(reward_cfg_, ep.start.position(), d0, a0);
    prev_.reset();
    record_ = record;
    log_ = EpisodeLog{};
    auto& h = log_.header;
    h.episode_id = ep.id;
    h.map_ref = ep.map_ref;
    h.config_hash = cfg_->config_hash;
    h.start = ep.start;
    h.goal = ep.goal;
    h.goal_views = ep.goal_views;
    h.shortest_path_length = ep.shortest_path_length;
    h.difficulty = ep.difficulty;
    h.max_steps = ep.max_steps;
    h.wsp_enabled = wsp_enabled;
    h.d0 = d0;
    h.alpha0_deg = a0;
    traveled_ = 0.0;
    revisits_ = 0;
    return_ = 0.0;
  }

  /// Runs the scheduler for the current step and returns the fused features.
  ObservationFeatures prepare() {
    sched_.update(env_->map(), env_->episode(), env_->pose(), env_->steps_taken(),
                  env_->goal_distance());
    return observe(*env_, sched_.current(), sched_.k(), prev_);
  }

  /// Applies the action and returns the step reward.
  double apply(Action a) {
    const Pose before = env_->pose();
    const auto out = env_->step(a);
    const Pose& now = env_->pose();
    const double d = env_->goal_distance();
    const double alpha = env_->view_angle();
    const auto r = evaluate_step(reward_cfg_, state_, before.position(), now.position(), d, alpha,
                                 a == Action::Stop);
    traveled_ += distance(before.position(), now.position());
    if (r.wsp.revisit) ++revisits_;
    return_ += r.breakdown.total;
    prev_ = a;
    if (record_) {
      StepRecord s;
      s.t = env_->steps_taken();
      s.x = now.x;
      s.y = now.y;
      s.heading = now.heading;
      s.action = a;
      s.d_t = d;
      s.alpha_t_deg = alpha;
      s.reward = r.breakdown;
      s.plan_token = std::string(to_string(sched_.current().token));
      s.plan_step = sched_.current().issued_at_step;
      s.voxel_key = r.wsp.voxel;
      s.revisit = r.wsp.revisit;
      s.collided = out.collided;
      log_.steps.push_back(std::move(s));
    }
    if (env_->done()) {
      auto& f = log_.footer;
      f.success = a == Action::Stop && d <= kSuccessDistanceM;
      f.l_i = env_->episode().shortest_path_length;
      f.p_i = traveled_;
      f.steps = env_->steps_taken();
      f.reason = out.termination_reason;
      f.final_distance = d;
      f.revisit_steps = revisits_;
      f.planner_calls = sched_.calls();
      f.planner_events = static_cast<int>(sched_.events().size());
    }
    return r.breakdown.total;
  }

  EpisodeResult result() const {
    EpisodeResult r;
    r.episode_id = log_.header.episode_id;
    r.success = log_.footer.success;
    r.shortest = log_.footer.l_i;
    r.traveled = log_.footer.p_i;
    r.steps = log_.footer.steps;
    r.revisit_steps = log_.footer.revisit_steps;
    r.planner_calls = log_.footer.planner_calls;
    r.difficulty = log_.header.difficulty;
    return r;
  }

  bool done() const { return env_->done(); }
  const NavEnv& env() const { return *env_; }
  const Plan& plan() const { return sched_.current(); }
  EpisodeLog& log() { return log_; }
  double episode_return() const { return return_; }

 private:
  const EpisodeRunConfig* cfg_;
  std::unique_ptr<Planner> owned_;
  PlanScheduler sched_;
  std::optional<NavEnv> env_;
  RewardConfig reward_cfg_;
  RewardState state_;
  std::optional<Action> prev_;
  bool record_ = true;
  EpisodeLog log_;
  double traveled_ = 0.0;
  int revisits_ = 0;
  double return_ = 0.0;
};

const GridMap& map_for(const MapSet& maps, const Episode& ep) {
  const auto it = maps.find(ep.map_ref);
  if (it == maps.end()) {
    throw Error(ErrorCode::InvalidConfig, "episode " + ep.id + " refers to unknown map '" +
                                              ep.map_ref + "'");
  }
  return it->second;
}

MatrixXd gather_columns(const MatrixXd& m, const std::vector<int>& cols) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

}  // namespace

EpisodeLog run_episode(const GridMap& map, const Episode& episode, Planner& planner,
                       Executor& executor, const EpisodeRunConfig& cfg) {
  EpisodeSlot slot(cfg, &planner);
  slot.begin(map, episode, cfg.reward.wsp_enabled, true);
  executor.begin_episode();
  while (!slot.done()) {
    const auto feats = slot.prepare();
    const ExecutorContext ctx{&slot.env(), &slot.plan(), &feats};
    slot.apply(executor.act(ctx));
  }
  return std::move(slot.log());
}

std::vector<EpisodeLog> evaluate_policy(const PolicyNet& net, const MapSet& maps,
                                        const std::vector<Episode>& episodes,
                                        const EpisodeRunConfig& cfg) {
  const int n = static_cast<int>(episodes.size());
  std::unique_ptr<Planner> shared;
  if (is_bridge(cfg.hier)) shared = make_planner(cfg.hier);
  std::vector<std::unique_ptr<EpisodeSlot>> slots;
  slots.reserve(n);
  for (int i = 0; i < n; ++i) {
    slots.push_back(std::make_unique<EpisodeSlot>(cfg, shared.get()));
    slots.back()->begin(map_for(maps, episodes[i]), episodes[i], cfg.reward.wsp_enabled, true);
  }
  Hidden hidden = zero_hidden(net.shape(), n);
  std::vector<int> active(n);
  std::iota(active.begin(), active.end(), 0);
  while (!active.empty()) {
    const int m = static_cast<int>(active.size());
    MatrixXd x(kFusedWidth, m);
    for (int j = 0; j < m; ++j) {
      const auto f = slots[active[j]]->prepare();
      x.col(j) = Eigen::Map<const Eigen::VectorXd>(f.fused.data(), kFusedWidth);
    }
    Hidden h(hidden.size());
    for (std::size_t l = 0; l < hidden.size(); ++l) h[l] = gather_columns(hidden[l], active);
    const auto out = policy_step(net, x, h);
    std::vector<int> still;
    for (int j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < hidden.size(); ++l) hidden[l].col(active[j]) = out.hidden[l].col(j);
      int best = 0;
      for (int a = 1; a < kNumActions; ++a) {
        if (out.probs(a, j) > out.probs(best, j)) best = a;
      }
      auto& slot = *slots[active[j]];
      slot.apply(static_cast<Action>(best));
      if (!slot.done()) still.push_back(active[j]);
    }
    active = std::move(still);
  }
  std::vector<EpisodeLog> logs;
  logs.reserve(n);
  for (auto& s : slots) logs.push_back(std::move(s->log()));
  return logs;
}

// ---------------------------------------------------------------------------

std::string curve_header(const std::string& config_hash) {
  return "# config_hash=" + config_hash +
         "\niteration,env_steps,mean_reward,probe_SR,probe_SPL,wsp_enabled\n";
}

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

std::string curve_line(const CurveRow& r) {
  std::ostringstream o;
  o << r.iteration << ',' << r.env_steps << ',' << fmt(r.mean_reward) << ','
    << fmt(r.probe_sr) << ',' << fmt(r.probe_spl) << ',' << (r.wsp_enabled ? 1 : 0) << '\n';
  return o.str();
}

namespace {

json curve_row_json(const CurveRow& r) {
  return json{{"iteration", r.iteration}, {"env_steps", r.env_steps},
              {"mean_reward", r.mean_reward}, {"probe_SR", r.probe_sr},
              {"probe_SPL", r.probe_spl}, {"wsp_enabled", r.wsp_enabled}};
}

CurveRow curve_row_from_json(const json& j) {
  CurveRow r;
  r.iteration = j.at("iteration").get<long>();
  r.env_steps = j.at("env_steps").get<long>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.probe_sr = j.at("probe_SR").get<double>();
  r.probe_spl = j.at("probe_SPL").get<double>();
  r.wsp_enabled = j.at("wsp_enabled").get<bool>();
  return r;
}

}  // namespace

json to_json(const Checkpoint& c) {
  json curve = json::array();
  for (const auto& r : c.curve) curve.push_back(curve_row_json(r));
  return json{{"format", "hrnav-checkpoint"},
              {"version", 1},
              {"config_hash", c.config_hash},
              {"resume_hash", c.resume_hash},
              {"seed", c.seed},
              {"iteration", c.iteration},
              {"env_steps", c.env_steps},
              {"shape",
               {{"input", c.shape.input},
                {"embed", c.shape.embed},
                {"hidden", c.shape.hidden},
                {"layers", c.shape.layers},
                {"actions", c.shape.actions}}},
              {"params", c.params},
              {"adam", {{"m", c.adam_m}, {"v", c.adam_v}, {"t", c.adam_t}}},
              {"curve", curve}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "hrnav-checkpoint" || j.at("version") != 1) {
      throw Error(ErrorCode::InvalidConfig, "not a version-1 checkpoint");
    }
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    c.resume_hash = j.value("resume_hash", std::string());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<long>();
    c.env_steps = j.at("env_steps").get<long>();
    const auto& s = j.at("shape");
    c.shape = NetShape{s.at("input").get<int>(), s.at("embed").get<int>(),
                       s.at("hidden").get<int>(), s.at("layers").get<int>(),
                       s.at("actions").get<int>()};
    c.params = j.at("params").get<std::vector<double>>();
    if (j.contains("adam")) {
      c.adam_m = j["adam"].at("m").get<std::vector<double>>();
      c.adam_v = j["adam"].at("v").get<std::vector<double>>();
      c.adam_t = j["adam"].at("t").get<long>();
    }
    if (j.contains("curve")) {
      for (const auto& r : j["curve"]) c.curve.push_back(curve_row_from_json(r));
    }
    if (c.params.size() != PolicyNet::param_count(c.shape)) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter count does not match its shape");
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path);
  out << to_json(c).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

PolicyNet net_from_checkpoint(const Checkpoint& c) {
  PolicyNet net(c.shape);
  net.params() = c.params;
  return net;
}

// ---------------------------------------------------------------------------

namespace {

struct TrainSlot {
  std::unique_ptr<EpisodeSlot> ep;
  Rng rng;
  ObservationFeatures pending;
  bool fresh = true;  // next step starts a new episode
};

void start_episode(TrainSlot& s, const TrainJob& job, bool wsp_on, bool record) {
  const auto& ep = job.train_episodes[uniform_index(s.rng, job.train_episodes.size())];
  s.ep->begin(map_for(job.maps, ep), ep, wsp_on, record);
  s.pending = s.ep->prepare();
  s.fresh = true;
}

/// Runs `fn(i)` for i in [0, n) across `workers` threads in contiguous chunks.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int w = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t * n / w; i < (t + 1) * n / w; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

TrainResult train(const TrainJob& job) {
  const TrainConfig& tc = job.train;
  tc.validate();
  job.reward.validate();
  job.hier.validate();
  if (job.train_episodes.empty()) throw Error(ErrorCode::InvalidConfig, "no training episodes");
  if (is_bridge(job.hier) && tc.workers > 1) {
    throw Error(ErrorCode::InvalidConfig, "the bridge planner requires train.workers = 1");
  }

  PolicyNet net(tc.net);
  net.init(derive_seed(tc.seed, 0));
  Adam adam(net.param_count(), tc.learning_rate);
  long start_iter = 0;
  long env_steps = 0;
  std::vector<CurveRow> curve;
  if (job.resume) {
    const auto& c = *job.resume;
    if (!(c.shape == tc.net)) throw Error(ErrorCode::ShapeMismatch, "checkpoint shape differs");
    net.params() = c.params;
    if (c.adam_m.size() == net.param_count()) {
      adam.m = c.adam_m;
      adam.v = c.adam_v;
      adam.t = c.adam_t;
    }
    start_iter = c.iteration;
    env_steps = c.env_steps;
    curve = c.curve;
  }

  EpisodeRunConfig run_cfg{job.hier, job.reward, job.config_hash};
  std::unique_ptr<Planner> shared;
  if (is_bridge(job.hier)) shared = make_planner(job.hier);

  const int N = tc.num_envs;
  const int T = tc.rollout_len;
  const long iterations = tc.iterations();
  const bool record = static_cast<bool>(job.on_episode);
  std::vector<TrainSlot> slots(N);
  for (int i = 0; i < N; ++i) {
    slots[i].ep = std::make_unique<EpisodeSlot>(run_cfg, shared.get());
    slots[i].rng.seed(derive_seed(tc.seed, 1000 + static_cast<std::uint64_t>(start_iter) * N + i));
  }
  Rng update_rng(derive_seed(tc.seed, 7 + static_cast<std::uint64_t>(start_iter)));
  bool wsp_on = job.reward.wsp_enabled && wsp_schedule(start_iter, iterations, tc.wsp_warmup);
  for (auto& s : slots) start_episode(s, job, wsp_on, record);
  Hidden hidden = zero_hidden(tc.net, N);

  const PpoCoefficients coefs{tc.clip, tc.entropy_coef, tc.value_coef};
  int consecutive_failures = 0;
  std::vector<double> grad;

  for (long iter = start_iter; iter < iterations; ++iter) {
    wsp_on = job.reward.wsp_enabled && wsp_schedule(iter, iterations, tc.wsp_warmup);

    SequenceBatch full;
    full.steps = T;
    full.batch = N;
    full.initial_hidden = hidden;
    full.inputs.reserve(T);
    full.keep_hidden.reserve(T);
    full.actions.assign(T, std::vector<int>(N, 0));
    full.old_log_probs.resize(T, N);
    MatrixXd values(T, N), rewards(T, N);
    std::vector<std::vector<std::uint8_t>> dones(N, std::vector<std::uint8_t>(T, 0));
    double reward_sum = 0.0;
    std::vector<int> chosen(N, 0);
    std::vector<double> step_reward(N, 0.0);

    for (int t = 0; t < T; ++t) {
      MatrixXd x(kFusedWidth, N);
      RowVectorXd keep(N);
      for (int i = 0; i < N; ++i) {
        auto& s = slots[i];
        if (tc.patch_dropout > 0.0) {
          for (int p = 0; p < kPatchSize * kPatchSize; ++p) {
            if (uniform01(s.rng) < tc.patch_dropout) s.pending.fused[p] = 0.0;
          }
        }
        x.col(i) = Eigen::Map<const Eigen::VectorXd>(s.pending.fused.data(), kFusedWidth);
        keep(i) = s.fresh ? 0.0 : 1.0;
        s.fresh = false;
      }
      for (auto& h : hidden) h.array().rowwise() *= keep.array();
      auto out = policy_step(net, x, hidden);
      hidden = std::move(out.hidden);
      for (int i = 0; i < N; ++i) {
        const double u = uniform01(slots[i].rng);
        double acc = 0.0;
        int a = kNumActions - 1;
        for (int j = 0; j < kNumActions; ++j) {
          acc += out.probs(j, i);
          if (u < acc) {
            a = j;
            break;
          }
        }
        chosen[i] = a;
        full.actions[t][i] = a;
        full.old_log_probs(t, i) = std::log(out.probs(a, i));
        values(t, i) = out.values(i);
      }
      full.inputs.push_back(std::move(x));
      full.keep_hidden.push_back(std::move(keep));

      parallel_for(N, tc.workers, [&](int i) {
        auto& s = slots[i];
        step_reward[i] = s.ep->apply(static_cast<Action>(chosen[i]));
        if (s.ep->done()) {
          dones[i][t] = 1;
        } else {
          s.pending = s.ep->prepare();
        }
      });
      for (int i = 0; i < N; ++i) {
        rewards(t, i) = step_reward[i];
        reward_sum += step_reward[i];
        auto& s = slots[i];
        if (dones[i][t]) {
          if (record) job.on_episode(s.ep->log());
          start_episode(s, job, wsp_on, record);
        }
      }
    }
    env_steps += static_cast<long>(T) * N;

    // Bootstrap values for unfinished sequences.
    MatrixXd x_last(kFusedWidth, N);
    RowVectorXd keep_last(N);
    for (int i = 0; i < N; ++i) {
      x_last.col(i) = Eigen::Map<const Eigen::VectorXd>(slots[i].pending.fused.data(), kFusedWidth);
      keep_last(i) = slots[i].fresh ? 0.0 : 1.0;
    }
    Hidden h_last = hidden;
    for (auto& h : h_last) h.array().rowwise() *= keep_last.array();
    const auto boot = policy_step(net, x_last, h_last);

    full.advantages.resize(T, N);
    full.returns.resize(T, N);
    for (int i = 0; i < N; ++i) {
      std::vector<double> r(T), v(T);
      for (int t = 0; t < T; ++t) {
        r[t] = rewards(t, i);
        v[t] = values(t, i);
      }
      const auto g = gae_advantages(r, v, dones[i], tc.discount, tc.gae_lambda, boot.values(i));
      for (int t = 0; t < T; ++t) {
        full.advantages(t, i) = g.advantages[t];
        full.returns(t, i) = g.returns[t];
      }
    }
    {
      const double mean = full.advantages.mean();
      const double var = (full.advantages.array() - mean).square().mean();
      full.advantages = ((full.advantages.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
    }

    bool failed = false;
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    const int mb = tc.minibatches;
    for (int epoch = 0; epoch < tc.epochs_per_update && !failed; ++epoch) {
      for (int i = N - 1; i > 0; --i) {
        std::swap(order[i], order[uniform_index(update_rng, static_cast<std::size_t>(i) + 1)]);
      }
      for (int b = 0; b < mb && !failed; ++b) {
        std::vector<int> cols(order.begin() + b * N / mb, order.begin() + (b + 1) * N / mb);
        SequenceBatch sb;
        sb.steps = T;
        sb.batch = static_cast<int>(cols.size());
        sb.inputs.reserve(T);
        sb.keep_hidden.reserve(T);
        for (int t = 0; t < T; ++t) {
          sb.inputs.push_back(gather_columns(full.inputs[t], cols));
          RowVectorXd k(sb.batch);
          std::vector<int> acts(sb.batch);
          for (int c = 0; c < sb.batch; ++c) {
            k(c) = full.keep_hidden[t](cols[c]);
            acts[c] = full.actions[t][cols[c]];
          }
          sb.keep_hidden.push_back(std::move(k));
          sb.actions.push_back(std::move(acts));
        }
        sb.old_log_probs = gather_columns(full.old_log_probs, cols);
        sb.advantages = gather_columns(full.advantages, cols);
        sb.returns = gather_columns(full.returns, cols);
        for (const auto& h : full.initial_hidden) sb.initial_hidden.push_back(gather_columns(h, cols));
        try {
          ppo_loss(net, sb, coefs, &grad);
          const double norm = global_norm(grad);
          if (norm > tc.max_grad_norm) {
            const double scale = tc.max_grad_norm / norm;
            for (double& g : grad) g *= scale;
          }
          adam.step(net.params(), grad);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFiniteActivation && e.code() != ErrorCode::NonFiniteGradient) {
            throw;
          }
          failed = true;
        }
      }
    }
    if (failed) {
      if (++consecutive_failures >= 2) {
        throw Error(ErrorCode::DivergenceDetected,
                    "non-finite loss in two consecutive updates at iteration " +
                        std::to_string(iter));
      }
    } else {
      consecutive_failures = 0;
    }

    CurveRow row;
    row.iteration = iter + 1;
    row.env_steps = env_steps;
    row.mean_reward = reward_sum / (static_cast<double>(T) * N);
    row.wsp_enabled = wsp_on;
    const bool probe = (iter + 1) % tc.probe_interval == 0 || iter + 1 == iterations;
    if (probe && !job.probe_episodes.empty()) {
      EpisodeRunConfig probe_cfg = run_cfg;
      probe_cfg.reward.wsp_enabled = wsp_on;
      const auto logs = evaluate_policy(net, job.maps, job.probe_episodes, probe_cfg);
      std::vector<EpisodeResult> results;
      for (const auto& l : logs) results.push_back(result_from_log(l));
      row.probe_sr = sr(results);
      row.probe_spl = spl(results);
    } else if (!curve.empty()) {
      row.probe_sr = curve.back().probe_sr;
      row.probe_spl = curve.back().probe_spl;
    }
    curve.push_back(row);
    if (job.on_iteration) job.on_iteration(row);
  }

  TrainResult res;
  auto& c = res.checkpoint;
  c.config_hash = job.config_hash;
  c.resume_hash = job.resume_hash;
  c.seed = tc.seed;
  c.iteration = std::max(start_iter, iterations);
  c.env_steps = env_steps;
  c.shape = tc.net;
  c.params = net.params();
  c.adam_m = adam.m;
  c.adam_v = adam.v;
  c.adam_t = adam.t;
  c.curve = curve;
  res.curve = curve;
  return res;
}

}  // namespace hrnav
