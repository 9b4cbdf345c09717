#include "hrnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hrnav/error.hpp"

namespace hrnav {

double spl(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResultSet, "spl over no episodes");
  double acc = 0.0;
  for (const auto& r : results) {
    if (!(r.shortest > 0.0)) {
      throw Error(ErrorCode::ZeroShortestPath, "episode " + r.episode_id);
    }
    if (r.success) acc += r.shortest / std::max(r.traveled, r.shortest);
  }
  return acc / static_cast<double>(results.size());
}

double sr(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResultSet, "sr over no episodes");
  const auto hits = std::count_if(results.begin(), results.end(),
                                  [](const EpisodeResult& r) { return r.success; });
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

StratifiedReport stratified_report(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResultSet, "no episodes to report");
  StratifiedReport rep;
  std::array<std::vector<EpisodeResult>, 3> groups;
  for (const auto& r : results) groups[static_cast<int>(r.difficulty)].push_back(r);
  double macro_sr = 0.0;
  double macro_spl = 0.0;
  int present = 0;
  for (int i = 0; i < 3; ++i) {
    if (groups[i].empty()) continue;
    rep.strata[i] = StratumStats{groups[i].size(), sr(groups[i]), spl(groups[i])};
    macro_sr += rep.strata[i]->sr;
    macro_spl += rep.strata[i]->spl;
    ++present;
  }
  rep.overall = {results.size(), sr(results), spl(results)};
  rep.macro = {results.size(), macro_sr / present, macro_spl / present};
  rep.pooled_differs_from_macro = std::abs(rep.overall.sr - rep.macro.sr) > 1e-12 ||
                                  std::abs(rep.overall.spl - rep.macro.spl) > 1e-12;
  return rep;
}

std::string results_csv(const StratifiedReport& report, const std::string& split,
                        const std::string& config_hash) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "split,difficulty,n,SR,SPL\n";
  for (int i = 0; i < 3; ++i) {
    if (!report.strata[i]) continue;
    const auto& s = *report.strata[i];
    out << split << ',' << to_string(static_cast<Difficulty>(i)) << ',' << s.n << ',' << s.sr
        << ',' << s.spl << '\n';
  }
  out << split << ",Overall," << report.overall.n << ',' << report.overall.sr << ','
      << report.overall.spl << '\n';
  out << "# config_hash=" << config_hash;
  if (report.pooled_differs_from_macro) {
    out << " overall=pooled macro_SR=" << report.macro.sr << " macro_SPL=" << report.macro.spl;
  }
  out << '\n';
  return out.str();
}

double amortized_latency(double t_fast_ms, double t_slow_ms, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "planning interval k must be >= 1");
  return t_fast_ms + t_slow_ms / static_cast<double>(k);
}

WanderingDiagnostics wandering_diagnostics(const EpisodeLog& log) {
  WanderingDiagnostics d;
  const auto& steps = log.steps;
  if (steps.empty()) return d;
  int revisits = 0;
  double traveled = 0.0;
  Vec2 prev = log.header.start.position();
  for (const auto& s : steps) {
    if (s.revisit) ++revisits;
    traveled += distance(prev, {s.x, s.y});
    prev = {s.x, s.y};
  }
  d.revisit_rate = static_cast<double>(revisits) / static_cast<double>(steps.size());
  const double l = log.header.shortest_path_length;
  d.path_ratio = l > 0.0 ? traveled / l : 0.0;
  for (std::size_t i = 0; i + 2 < steps.size(); ++i) {
    const Action a = steps[i].action;
    const Action b = steps[i + 1].action;
    const Action c = steps[i + 2].action;
    const bool lrl = a == Action::TurnLeft && b == Action::TurnRight && c == Action::TurnLeft;
    const bool rlr = a == Action::TurnRight && b == Action::TurnLeft && c == Action::TurnRight;
    if (lrl || rlr) ++d.oscillation_count;
  }
  return d;
}

EpisodeResult result_from_log(const EpisodeLog& log) {
  EpisodeResult r;
  r.episode_id = log.header.episode_id;
  r.shortest = log.header.shortest_path_length;
  r.difficulty = log.header.difficulty;
  r.steps = static_cast<int>(log.steps.size());
  Vec2 prev = log.header.start.position();
  for (const auto& s : log.steps) {
    r.traveled += distance(prev, {s.x, s.y});
    prev = {s.x, s.y};
    if (s.revisit) ++r.revisit_steps;
  }
  if (!log.steps.empty()) {
    const auto& last = log.steps.back();
    r.success = last.action == Action::Stop && last.d_t <= kSuccessDistanceM;
  }
  r.planner_calls = log.footer.planner_calls;
  return r;
}

}  // namespace hrnav
