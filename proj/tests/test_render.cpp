#include <doctest.h>

#include <regex>

#include "hrnav/render.hpp"
#include "support.hpp"

using namespace hrnav;

namespace {

int count(const std::string& s, const std::string& needle) {
  int n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

GridMap open_room() { return load_map(".....\n.....\n.....\n", MapMeta{0.25, 0.0, "room"}); }

StepRecord rec(double x, double y, const std::string& token, int plan_step, bool revisit = false) {
  StepRecord s;
  s.x = x;
  s.y = y;
  s.plan_token = token;
  s.plan_step = plan_step;
  s.revisit = revisit;
  return s;
}

}  // namespace

TEST_CASE("render: map alone") {
  const auto map = load_map_file(support::map_path("four_rooms"));
  const auto svg = render_svg(map, nullptr);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count(svg, "class=\"obstacle\"") > 0);
  CHECK(count(svg, "<polyline") == 0);
  CHECK(svg.find("id=\"start\"") == std::string::npos);
}

TEST_CASE("render: one plan gives one polyline") {
  const auto map = open_room();
  EpisodeLog log;
  log.header.start = {0.125, 0.375, 0};
  log.header.goal = {1.125, 0.375, 0};
  for (int i = 1; i <= 4; ++i) log.steps.push_back(rec(0.125 + 0.25 * i, 0.375, "GoToWaypoint", 0));
  const auto svg = render_svg(map, &log, 100.0);
  CHECK(count(svg, "<polyline") == 1);
  // Start point plus four steps.
  const std::regex pts("points=\"([^\"]*)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, pts));
  CHECK(count(m[1].str(), ",") == 5);
  CHECK(svg.find("id=\"start\"") != std::string::npos);
  CHECK(svg.find("id=\"goal\"") != std::string::npos);
}

TEST_CASE("render: segments break where a new plan is issued") {
  const auto map = open_room();
  EpisodeLog log;
  log.header.start = {0.125, 0.125, 0};
  const int k = 3;
  for (int t = 0; t < 8; ++t) {
    const int issued = (t / k) * k;
    log.steps.push_back(rec(0.125 + 0.1 * (t + 1), 0.125, issued == 3 ? "Explore" : "GoToWaypoint", issued));
  }
  const auto svg = render_svg(map, &log);
  CHECK(count(svg, "<polyline") == 3);
  CHECK(svg.find("data-plan-step=\"0\"") != std::string::npos);
  CHECK(svg.find("data-plan-step=\"3\"") != std::string::npos);
  CHECK(svg.find("data-plan-step=\"6\"") != std::string::npos);
  CHECK(svg.find("data-token=\"Explore\"") != std::string::npos);
}

TEST_CASE("render: revisit cells are hatched once each") {
  const auto map = open_room();
  EpisodeLog log;
  log.header.start = {0.125, 0.125, 0};
  log.steps = {rec(0.375, 0.125, "Explore", 0), rec(0.125, 0.125, "Explore", 0, true),
               rec(0.375, 0.125, "Explore", 0, true), rec(0.125, 0.125, "Explore", 0, true)};
  const auto svg = render_svg(map, &log);
  CHECK(svg.find("<pattern id=\"hatch\"") != std::string::npos);
  CHECK(count(svg, "class=\"revisit\"") == 2);
  CHECK(count(svg, "url(#hatch)") == 2);
}
