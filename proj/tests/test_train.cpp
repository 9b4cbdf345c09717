#include <doctest.h>

#include "hrnav/error.hpp"
#include "hrnav/train.hpp"
#include "support.hpp"

using namespace hrnav;

namespace {

TrainJob small_job(long iterations, bool wsp) {
  TrainJob job;
  const auto map = load_map_file(support::map_path("four_rooms"));
  job.maps.emplace(map.meta().name, map);
  job.train_episodes = sample_episodes(map, 2, 3, 120);
  job.probe_episodes = sample_episodes(map, 1, 4, 120);
  job.reward.wsp_enabled = wsp;
  job.train.rollout_len = 16;
  job.train.num_envs = 4;
  job.train.minibatches = 2;
  job.train.epochs_per_update = 2;
  job.train.total_env_steps = iterations * 16 * 4;
  job.train.probe_interval = 2;
  job.train.seed = 5;
  job.config_hash = "0123456789abcdef";
  return job;
}

void same_curves(const std::vector<CurveRow>& a, const std::vector<CurveRow>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iteration == b[i].iteration);
    CHECK(a[i].env_steps == b[i].env_steps);
    CHECK(a[i].mean_reward == b[i].mean_reward);
    CHECK(a[i].probe_sr == b[i].probe_sr);
    CHECK(a[i].probe_spl == b[i].probe_spl);
    CHECK(a[i].wsp_enabled == b[i].wsp_enabled);
  }
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const auto a = train(small_job(4, true));
  const auto b = train(small_job(4, true));
  same_curves(a.curve, b.curve);
  CHECK(a.checkpoint.params == b.checkpoint.params);
  CHECK(a.checkpoint.iteration == 4);
  CHECK(a.checkpoint.env_steps == 4 * 16 * 4);

  auto job = small_job(4, true);
  job.train.seed = 6;
  CHECK(train(job).checkpoint.params != a.checkpoint.params);
}

TEST_CASE("worker threads do not change the result") {
  auto job = small_job(3, true);
  const auto serial = train(job);
  job.train.workers = 3;
  const auto threaded = train(job);
  same_curves(serial.curve, threaded.curve);
  CHECK(serial.checkpoint.params == threaded.checkpoint.params);
}

TEST_CASE("wsp is off for the first half of training") {
  auto job = small_job(6, true);
  std::vector<EpisodeLog> logs;
  job.on_episode = [&](const EpisodeLog& l) { logs.push_back(l); };
  const auto res = train(job);
  REQUIRE(res.curve.size() == 6);
  for (const auto& r : res.curve) CHECK(r.wsp_enabled == (r.iteration > 3));
  REQUIRE_FALSE(logs.empty());
  int without = 0;
  for (const auto& l : logs) {
    if (l.header.wsp_enabled) continue;
    ++without;
    for (const auto& s : l.steps) {
      CHECK(s.reward.wsp_path_term == 0.0);
      CHECK(s.reward.wsp_revisit_term == 0.0);
    }
  }
  CHECK(without > 0);
}

TEST_CASE("wsp-disabled training never logs wsp terms") {
  auto job = small_job(4, false);
  std::vector<EpisodeLog> logs;
  job.on_episode = [&](const EpisodeLog& l) { logs.push_back(l); };
  const auto res = train(job);
  for (const auto& r : res.curve) CHECK_FALSE(r.wsp_enabled);
  for (const auto& l : logs) {
    CHECK_FALSE(l.header.wsp_enabled);
    for (const auto& s : l.steps) {
      CHECK(s.reward.wsp_path_term == 0.0);
      CHECK(s.reward.wsp_revisit_term == 0.0);
    }
  }
}

TEST_CASE("resume continues from the saved iteration") {
  const auto first = train(small_job(2, true));
  auto job = small_job(4, true);
  job.resume = first.checkpoint;
  const auto rest = train(job);
  REQUIRE(rest.curve.size() == 4);
  for (int i = 0; i < 2; ++i) {
    CHECK(rest.curve[i].iteration == first.curve[i].iteration);
    CHECK(rest.curve[i].mean_reward == first.curve[i].mean_reward);
  }
  CHECK(rest.curve[2].iteration == 3);
  CHECK(rest.curve[3].iteration == 4);
  CHECK(rest.curve[3].env_steps == 4 * 16 * 4);
  CHECK(rest.checkpoint.iteration == 4);
  CHECK(rest.checkpoint.adam_t > first.checkpoint.adam_t);

  // A checkpoint already past the budget trains nothing further.
  auto done = small_job(2, true);
  done.resume = rest.checkpoint;
  const auto again = train(done);
  CHECK(again.checkpoint.params == rest.checkpoint.params);
  CHECK(again.checkpoint.iteration == 4);
}

TEST_CASE("resume rejects a different network shape") {
  auto c = train(small_job(1, true)).checkpoint;
  auto job = small_job(2, true);
  job.train.net.hidden += 1;
  job.resume = c;
  CHECK_THROWS_AS(train(job), Error);
}

TEST_CASE("checkpoint round trip") {
  const auto res = train(small_job(2, true));
  const auto path = support::scratch_dir("ckpt") + "/checkpoint.json";
  save_checkpoint(path, res.checkpoint);
  const auto back = load_checkpoint(path);
  CHECK(back.config_hash == res.checkpoint.config_hash);
  CHECK(back.iteration == res.checkpoint.iteration);
  CHECK(back.env_steps == res.checkpoint.env_steps);
  CHECK(back.shape == res.checkpoint.shape);
  CHECK(back.params == res.checkpoint.params);
  CHECK(back.adam_m == res.checkpoint.adam_m);
  CHECK(back.adam_v == res.checkpoint.adam_v);
  CHECK(back.adam_t == res.checkpoint.adam_t);
  same_curves(back.curve, res.checkpoint.curve);

  const PolicyNet net = net_from_checkpoint(back);
  CHECK(net.params() == res.checkpoint.params);

  auto j = to_json(res.checkpoint);
  j["params"].erase(0);
  try {
    checkpoint_from_json(j);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("two consecutive non-finite updates abort training") {
  auto c = train(small_job(1, true)).checkpoint;
  PolicyNet probe(c.shape);
  // A huge value bias keeps the forward pass finite but overflows the value loss.
  c.params[probe.offsets().val_b] = 1e200;
  auto job = small_job(4, true);
  job.resume = c;
  try {
    train(job);
    FAIL("expected DivergenceDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergenceDetected);
  }
}

TEST_CASE("training config validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.minibatches = tc.num_envs + 1;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = TrainConfig{};
  tc.clip = 0.0;
  CHECK_THROWS_AS(tc.validate(), Error);
  tc = TrainConfig{};
  tc.total_env_steps = 1000;
  tc.rollout_len = 64;
  tc.num_envs = 8;
  CHECK(tc.iterations() == 2);

  auto job = small_job(1, true);
  job.hier.planner = "Bridge:/bin/true";
  job.train.workers = 2;
  CHECK_THROWS_AS(train(job), Error);
}
