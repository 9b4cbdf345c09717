#include <doctest.h>

#include <sstream>

#include "hrnav/error.hpp"
#include "hrnav/train.hpp"
#include "hrnav/trajlog.hpp"
#include "support.hpp"

using namespace hrnav;

namespace {

struct Fixture {
  GridMap map = load_map_file(support::map_path("four_rooms"));
  std::vector<Episode> episodes = sample_episodes(map, 2, 11);
};

std::vector<EpisodeLog> greedy_logs(const Fixture& f, const RewardConfig& reward) {
  HierConfig hier;
  const EpisodeRunConfig cfg{hier, reward, "feedbeef"};
  GreedyExecutor greedy;
  std::vector<EpisodeLog> logs;
  for (const auto& ep : f.episodes) {
    auto planner = make_planner(hier);
    logs.push_back(run_episode(f.map, ep, *planner, greedy, cfg));
  }
  return logs;
}

}  // namespace

TEST_CASE("episode logs survive a write/read round trip") {
  Fixture f;
  RewardConfig reward;
  reward.wsp_enabled = true;
  const auto logs = greedy_logs(f, reward);
  std::stringstream io;
  for (const auto& l : logs) write_episode_log(io, l);
  const auto back = read_episode_logs(io);
  REQUIRE(back.size() == logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& a = logs[i];
    const auto& b = back[i];
    CHECK(b.header.episode_id == a.header.episode_id);
    CHECK(b.header.config_hash == "feedbeef");
    CHECK(b.header.wsp_enabled == a.header.wsp_enabled);
    CHECK(b.header.shortest_path_length == a.header.shortest_path_length);
    CHECK(b.header.goal_views == a.header.goal_views);
    REQUIRE(b.steps.size() == a.steps.size());
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
      CHECK(b.steps[t].x == a.steps[t].x);
      CHECK(b.steps[t].y == a.steps[t].y);
      CHECK(b.steps[t].heading == a.steps[t].heading);
      CHECK(b.steps[t].action == a.steps[t].action);
      CHECK(b.steps[t].d_t == a.steps[t].d_t);
      CHECK(b.steps[t].reward == a.steps[t].reward);
      CHECK(b.steps[t].plan_token == a.steps[t].plan_token);
      CHECK(b.steps[t].revisit == a.steps[t].revisit);
    }
    CHECK(b.footer.success == a.footer.success);
    CHECK(b.footer.steps == a.footer.steps);
    CHECK(b.footer.reason == a.footer.reason);
    CHECK(b.footer.p_i == a.footer.p_i);
  }
}

TEST_CASE("replay reproduces every logged reward bit for bit") {
  Fixture f;
  for (int mode = 0; mode < 2; ++mode) {
    for (bool wsp : {false, true}) {
      RewardConfig reward;
      reward.formulation = mode == 0 ? Formulation::Additive : Formulation::Potential;
      reward.wsp_enabled = wsp;
      const auto logs = greedy_logs(f, reward);
      for (const auto& l : logs) CHECK(replay_mismatch(f.map, l, reward) == -1);
    }
  }
}

TEST_CASE("replay points at a tampered step") {
  Fixture f;
  RewardConfig reward;
  reward.wsp_enabled = true;
  auto logs = greedy_logs(f, reward);
  auto& l = logs.front();
  REQUIRE(l.steps.size() > 3);
  l.steps[2].reward.view_term = std::nextafter(l.steps[2].reward.view_term, 1.0);
  CHECK(replay_mismatch(f.map, l, reward) == 2);
}

TEST_CASE("wsp terms are zero in logs written without wsp") {
  Fixture f;
  RewardConfig reward;
  reward.wsp_enabled = false;
  for (const auto& l : greedy_logs(f, reward)) {
    CHECK_FALSE(l.header.wsp_enabled);
    for (const auto& s : l.steps) {
      CHECK(s.reward.wsp_path_term == 0.0);
      CHECK(s.reward.wsp_revisit_term == 0.0);
    }
  }
}

TEST_CASE("malformed log streams are rejected") {
  std::stringstream bad("{\"not\": \"a header\"}\n");
  CHECK_THROWS_AS(read_episode_logs(bad), Error);
  std::stringstream junk("this is not json\n");
  CHECK_THROWS_AS(read_episode_logs(junk), Error);
}

TEST_CASE("episode files round trip") {
  Fixture f;
  const auto path = support::scratch_dir("episodes") + "/eps.jsonl";
  write_episodes_jsonl(path, f.episodes);
  const auto back = read_episodes_jsonl(path);
  REQUIRE(back.size() == f.episodes.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == f.episodes[i].id);
    CHECK(back[i].start.x == f.episodes[i].start.x);
    CHECK(back[i].goal.heading == f.episodes[i].goal.heading);
    CHECK(back[i].shortest_path_length == f.episodes[i].shortest_path_length);
    CHECK(back[i].difficulty == f.episodes[i].difficulty);
  }
}
