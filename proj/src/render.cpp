#include "hrnav/render.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "hrnav/hier.hpp"

namespace hrnav {

namespace {

const char* token_colour(const std::string& token) {
  if (token == "GoToWaypoint") return "#1f77b4";
  if (token == "ExitRoom") return "#ff7f0e";
  if (token == "FollowCorridor") return "#2ca02c";
  if (token == "ApproachGoal") return "#9467bd";
  if (token == "StopNearGoal") return "#d62728";
  return "#7f7f7f";  // Explore and anything unknown
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_svg(const GridMap& map, const EpisodeLog* log, double px_per_m) {
  const double s = map.cell_size() * px_per_m;
  const double w = map.cols() * s;
  const double h = map.rows() * s;
  // World y grows upwards; SVG y grows downwards.
  auto X = [&](double x) { return num(x * px_per_m); };
  auto Y = [&](double y) { return num(h - y * px_per_m); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
    << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  o << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" "
       "stroke=\"#e377c2\" stroke-width=\"2\"/></pattern></defs>\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h)
    << "\" fill=\"#ffffff\"/>\n";
  o << "<g id=\"map\">\n";
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const CellIndex ci{r, c};
      if (!map.is_blocked(ci)) continue;
      const char* fill = map.is_obstacle(ci) ? "#222222" : "#bbbbbb";
      o << "<rect class=\"" << (map.is_obstacle(ci) ? "obstacle" : "inflated") << "\" x=\""
        << num(c * s) << "\" y=\"" << num(h - (r + 1) * s) << "\" width=\"" << num(s)
        << "\" height=\"" << num(s) << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  o << "</g>\n";
  if (log != nullptr) {
    std::set<std::pair<int, int>> revisit;
    for (const auto& st : log->steps) {
      if (st.revisit) {
        const auto cell = map.cell_of({st.x, st.y});
        revisit.insert({cell.row, cell.col});
      }
    }
    o << "<g id=\"revisits\">\n";
    for (const auto& [r, c] : revisit) {
      o << "<rect class=\"revisit\" x=\"" << num(c * s) << "\" y=\"" << num(h - (r + 1) * s)
        << "\" width=\"" << num(s) << "\" height=\"" << num(s) << "\" fill=\"url(#hatch)\"/>\n";
    }
    o << "</g>\n<g id=\"path\" fill=\"none\" stroke-width=\"3\">\n";
    // One polyline per plan; consecutive segments share their boundary point.
    Vec2 prev = log->header.start.position();
    std::size_t i = 0;
    while (i < log->steps.size()) {
      const auto& first = log->steps[i];
      o << "<polyline class=\"segment\" data-token=\"" << first.plan_token << "\" data-plan-step=\""
        << first.plan_step << "\" stroke=\"" << token_colour(first.plan_token) << "\" points=\""
        << X(prev.x) << ',' << Y(prev.y);
      while (i < log->steps.size() && log->steps[i].plan_step == first.plan_step &&
             log->steps[i].plan_token == first.plan_token) {
        prev = {log->steps[i].x, log->steps[i].y};
        o << ' ' << X(prev.x) << ',' << Y(prev.y);
        ++i;
      }
      o << "\"/>\n";
    }
    o << "</g>\n";
    const auto& hd = log->header;
    o << "<circle id=\"start\" cx=\"" << X(hd.start.x) << "\" cy=\"" << Y(hd.start.y)
      << "\" r=\"6\" fill=\"#2ca02c\"/>\n";
    o << "<circle id=\"goal\" cx=\"" << X(hd.goal.x) << "\" cy=\"" << Y(hd.goal.y)
      << "\" r=\"6\" fill=\"#d62728\"/>\n";
    o << "<text x=\"4\" y=\"14\" font-size=\"12\" font-family=\"monospace\">" << hd.episode_id
      << " config " << hd.config_hash << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hrnav
