#include "hrnav/annot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace hrnav::annot {

using nlohmann::json;

TrajectoryRecord trajectory_from_json(const json& j) {
  try {
    TrajectoryRecord t;
    t.id = j.at("id").get<std::string>();
    t.num_frames = j.at("num_frames").get<int>();
    t.actions = j.value("actions", std::vector<std::string>{});
    t.instruction = j.value("instruction", std::string{});
    t.sub_instructions = j.at("sub_instructions").get<std::vector<std::string>>();
    if (t.num_frames <= 0) throw Error(ErrorCode::InvalidConfig, t.id + ": num_frames <= 0");
    if (!t.actions.empty() && static_cast<int>(t.actions.size()) != t.num_frames) {
      throw Error(ErrorCode::InvalidConfig, t.id + ": actions length differs from num_frames");
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("trajectory record: ") + e.what());
  }
}

json to_json(const TrajectoryRecord& t) {
  return json{{"id", t.id},
              {"num_frames", t.num_frames},
              {"actions", t.actions},
              {"instruction", t.instruction},
              {"sub_instructions", t.sub_instructions}};
}

std::vector<TrajectoryRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path);
  std::vector<TrajectoryRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trajectory_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
    }
  }
  return out;
}

namespace {

const std::regex& line_pattern() {
  static const std::regex re(
      R"(^# +Instruction([0-9]+): +from +frame +([0-9]+) +(?:to +frame +([0-9]+)|(onwards)) *;?$)");
  return re;
}

std::optional<std::int64_t> to_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

GroundingParse parse_grounding(std::string_view text, int num_frames) {
  GroundingParse out;
  std::vector<std::pair<SubTaskInterval, int>> parsed;  // interval, line number
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::smatch m;
    if (!std::regex_match(line, m, line_pattern())) {
      out.violation = FormatViolation{ErrorCode::MalformedLine, line_no, "unparseable: " + line};
      return out;
    }
    const auto index = to_int(m[1].str());
    const auto start = to_int(m[2].str());
    const bool onwards = m[4].matched;
    const auto end = onwards ? std::optional<std::int64_t>(num_frames) : to_int(m[3].str());
    if (!index || !start || !end || *index < 1 || *index > 1'000'000) {
      out.violation = FormatViolation{ErrorCode::MalformedLine, line_no, "number out of range"};
      return out;
    }
    if (!onwards && *end < *start) {
      out.violation = FormatViolation{ErrorCode::MalformedLine, line_no, "end frame before start"};
      return out;
    }
    SubTaskInterval iv{static_cast<int>(*index), *start, *end, onwards};
    parsed.emplace_back(iv, line_no);
  }
  if (parsed.empty()) {
    out.violation = FormatViolation{ErrorCode::MalformedLine, 0, "no instruction lines"};
    return out;
  }
  std::set<int> seen;
  for (const auto& [iv, ln] : parsed) {
    if (!seen.insert(iv.index).second) {
      out.violation = FormatViolation{ErrorCode::DuplicateIndex, ln,
                                      "Instruction" + std::to_string(iv.index) + " repeated"};
      return out;
    }
  }
  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const auto& a, const auto& b) { return a.first.index < b.first.index; });
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (parsed[i].first.index != static_cast<int>(i) + 1) {
      out.violation = FormatViolation{ErrorCode::NonContinuousIndices, parsed[i].second,
                                      "expected Instruction" + std::to_string(i + 1) +
                                          ", found Instruction" +
                                          std::to_string(parsed[i].first.index)};
      return out;
    }
    out.intervals.push_back(parsed[i].first);
  }
  return out;
}

std::string serialize_grounding(const std::vector<SubTaskInterval>& intervals) {
  std::string out;
  for (const auto& iv : intervals) {
    out += "# Instruction" + std::to_string(iv.index) + ": from frame " +
           std::to_string(iv.start_frame);
    out += iv.onwards ? std::string(" onwards;") : " to frame " + std::to_string(iv.end_frame) + ";";
    out += '\n';
  }
  return out;
}

std::string_view to_string(TemporalViolationKind k) {
  switch (k) {
    case TemporalViolationKind::StartOrder: return "StartOrder";
    case TemporalViolationKind::Overlap: return "Overlap";
    case TemporalViolationKind::OutOfRange: return "OutOfRange";
    case TemporalViolationKind::Empty: return "Empty";
  }
  return "?";
}

TemporalVerdict check_temporal(const std::vector<SubTaskInterval>& intervals, int num_frames) {
  TemporalVerdict v;
  auto flag = [&](TemporalViolationKind kind, int a, int b, std::int64_t from, std::int64_t to) {
    v.ok = false;
    v.violations.push_back({kind, a, b, from, to});
  };
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (iv.start_frame < 0 || iv.end_frame > num_frames || iv.start_frame >= num_frames) {
      flag(TemporalViolationKind::OutOfRange, iv.index, 0, iv.start_frame, iv.end_frame);
    }
    if (iv.end_frame <= iv.start_frame) {
      flag(TemporalViolationKind::Empty, iv.index, 0, iv.start_frame, iv.end_frame);
    }
    if (i > 0 && !(iv.start_frame > intervals[i - 1].start_frame)) {
      flag(TemporalViolationKind::StartOrder, intervals[i - 1].index, iv.index,
           intervals[i - 1].start_frame, iv.start_frame);
    }
  }
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    for (std::size_t j = i + 1; j < intervals.size(); ++j) {
      const auto lo = std::max(intervals[i].start_frame, intervals[j].start_frame);
      const auto hi = std::min(intervals[i].end_frame, intervals[j].end_frame);
      if (lo < hi) flag(TemporalViolationKind::Overlap, intervals[i].index, intervals[j].index, lo, hi);
    }
  }
  return v;
}

StubJudge StubJudge::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open judge fixture " + path);
  try {
    return StubJudge(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

std::string StubJudge::judge(const JudgeRequest& request) {
  const auto key = std::to_string(request.index);
  if (fixture_.contains(request.trajectory_id) && fixture_[request.trajectory_id].contains(key)) {
    const auto& v = fixture_[request.trajectory_id][key];
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  json verdict{{"consistent", true},
               {"evidence_frames", request.frames},
               {"confidence", 1.0},
               {"reason", "stub default"}};
  return verdict.dump();
}

std::vector<std::int64_t> sample_frames(const SubTaskInterval& iv, int count) {
  std::vector<std::int64_t> frames;
  const std::int64_t len = iv.end_frame - iv.start_frame;
  if (len <= 0 || count <= 0) return frames;
  if (len <= count) {
    for (std::int64_t f = iv.start_frame; f < iv.end_frame; ++f) frames.push_back(f);
    return frames;
  }
  if (count == 1) return {iv.start_frame + (len - 1) / 2};
  for (int i = 0; i < count; ++i) {
    frames.push_back(iv.start_frame + (i * (len - 1)) / (count - 1));
  }
  return frames;
}

SemanticVerdict judge_semantic(const std::string& trajectory_id, const SubTaskInterval& interval,
                               const std::string& sub_task,
                               const std::vector<std::int64_t>& frames, Judge& judge) {
  SemanticVerdict v;
  v.index = interval.index;
  std::string raw;
  try {
    raw = judge.judge({trajectory_id, interval.index, sub_task, frames});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::JudgeUnavailable) throw;
    v.skipped = true;
    v.note = "JudgeUnavailable";
    return v;
  }
  auto malformed = [&v](const std::string& why) {
    v.skipped = true;
    v.note = "MalformedJudgeOutput: " + why;
    v.consistent = false;
    v.confidence = 0.0;
    v.evidence_frames.clear();
    v.reason.clear();
    return v;
  };
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception&) {
    return malformed("not JSON");
  }
  if (!j.is_object()) return malformed("not an object");
  if (!j.contains("consistent") || !j["consistent"].is_boolean()) return malformed("consistent");
  if (!j.contains("confidence") || !j["confidence"].is_number()) return malformed("confidence");
  if (!j.contains("evidence_frames") || !j["evidence_frames"].is_array()) {
    return malformed("evidence_frames");
  }
  if (!j.contains("reason") || !j["reason"].is_string()) return malformed("reason");
  v.confidence = j["confidence"].get<double>();
  if (!(v.confidence >= 0.0 && v.confidence <= 1.0)) return malformed("confidence out of [0,1]");
  for (const auto& f : j["evidence_frames"]) {
    if (!f.is_number_integer()) return malformed("evidence frame not an integer");
    v.evidence_frames.push_back(f.get<std::int64_t>());
  }
  v.consistent = j["consistent"].get<bool>();
  v.reason = j["reason"].get<std::string>();
  return v;
}

TQCMReport run_tqcm(const TrajectoryRecord& traj, std::string_view annotation, Judge* judge,
                    int frames_per_interval) {
  TQCMReport r;
  r.trajectory_id = traj.id;
  auto parsed = parse_grounding(annotation, traj.num_frames);
  if (parsed.ok() && parsed.intervals.size() != traj.sub_instructions.size()) {
    parsed.violation = FormatViolation{
        ErrorCode::NonContinuousIndices, 0,
        "expected " + std::to_string(traj.sub_instructions.size()) + " instructions, found " +
            std::to_string(parsed.intervals.size())};
  }
  r.format_ok = parsed.ok();
  r.format_violation = parsed.violation;
  if (!r.format_ok) return r;

  const auto temporal = check_temporal(parsed.intervals, traj.num_frames);
  r.temporal_ok = temporal.ok;
  r.temporal_violations = temporal.violations;
  if (!temporal.ok) return r;

  bool semantic_ok = true;
  if (judge != nullptr) {
    std::vector<SemanticVerdict> verdicts;
    for (const auto& iv : parsed.intervals) {
      const auto frames = sample_frames(iv, frames_per_interval);
      verdicts.push_back(
          judge_semantic(traj.id, iv, traj.sub_instructions[iv.index - 1], frames, *judge));
      if (!verdicts.back().skipped && !verdicts.back().consistent) semantic_ok = false;
    }
    r.semantic = std::move(verdicts);
  }
  r.retained = semantic_ok;
  return r;
}

json to_json(const TQCMReport& r) {
  json j{{"trajectory_id", r.trajectory_id}, {"format_ok", r.format_ok}, {"retained", r.retained}};
  if (r.format_violation) {
    j["format_violation"] = {{"code", std::string(hrnav::to_string(r.format_violation->code))},
                             {"line", r.format_violation->line_no},
                             {"detail", r.format_violation->detail}};
  } else {
    j["format_violation"] = nullptr;
  }
  j["temporal_ok"] = r.temporal_ok ? json(*r.temporal_ok) : json(nullptr);
  json tv = json::array();
  for (const auto& v : r.temporal_violations) {
    tv.push_back({{"kind", std::string(to_string(v.kind))},
                  {"first", v.first_index},
                  {"second", v.second_index},
                  {"frames", json::array({v.frame_begin, v.frame_end})}});
  }
  j["temporal_violations"] = tv;
  if (r.semantic) {
    json sv = json::array();
    for (const auto& v : *r.semantic) {
      json e{{"index", v.index}, {"skipped", v.skipped}};
      if (v.skipped) {
        e["note"] = v.note;
      } else {
        e["consistent"] = v.consistent;
        e["confidence"] = v.confidence;
        e["evidence_frames"] = v.evidence_frames;
        e["reason"] = v.reason;
      }
      sv.push_back(e);
    }
    j["semantic"] = sv;
  } else {
    j["semantic"] = "Skipped";
  }
  return j;
}

void QualityAccumulator::add(const TQCMReport& r) {
  ++samples_;
  if (r.format_ok) ++format_ok_;
  if (r.temporal_ok) {
    ++temporal_run_;
    if (*r.temporal_ok) ++temporal_ok_;
  }
  if (r.semantic) {
    for (const auto& v : *r.semantic) {
      if (v.skipped) continue;
      ++judged_;
      if (v.consistent) ++consistent_;
    }
  }
  if (r.retained) ++retained_;
}

void QualityAccumulator::merge(const QualityAccumulator& o) {
  samples_ += o.samples_;
  format_ok_ += o.format_ok_;
  temporal_run_ += o.temporal_run_;
  temporal_ok_ += o.temporal_ok_;
  judged_ += o.judged_;
  consistent_ += o.consistent_;
  retained_ += o.retained_;
}

QualityMetrics QualityAccumulator::metrics() const {
  auto pct = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  QualityMetrics m;
  m.samples = samples_;
  m.format_pct = pct(format_ok_, samples_);
  m.temporal_pct = pct(temporal_ok_, temporal_run_);
  m.semantic_pct = pct(consistent_, judged_);
  m.retained_count = retained_;
  return m;
}

QualityMetrics quality_metrics(const std::vector<TQCMReport>& reports) {
  QualityAccumulator acc;
  for (const auto& r : reports) acc.add(r);
  return acc.metrics();
}

std::string quality_csv(const std::vector<TQCMReport>& reports) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s.precision(1);
    s << std::fixed << *v;
    return s.str();
  };
  std::vector<TQCMReport> kept;
  for (const auto& r : reports) {
    if (r.retained) kept.push_back(r);
  }
  std::ostringstream out;
  out << "data,samples,format,temporal,semantic\n";
  const auto before = quality_metrics(reports);
  out << "before_tqcm," << before.samples << ',' << fmt(before.format_pct) << ','
      << fmt(before.temporal_pct) << ',' << fmt(before.semantic_pct) << '\n';
  const auto after = quality_metrics(kept);
  out << "after_tqcm," << after.samples << ',' << fmt(after.format_pct) << ','
      << fmt(after.temporal_pct) << ',' << fmt(after.semantic_pct) << '\n';
  return out.str();
}

json to_json(const PlanningSample& s) {
  return json{{"trajectory_id", s.trajectory_id},
              {"history_frames", s.history_frames},
              {"current_frame", s.current_frame},
              {"goal_frame", s.goal_frame},
              {"label_index", s.label_index},
              {"label", s.label}};
}

std::vector<PlanningSample> label_samples(const TrajectoryRecord& traj,
                                          const std::vector<SubTaskInterval>& intervals,
                                          int window, int history_len) {
  if (window < 0) throw Error(ErrorCode::WindowNonPositive, "window must be >= 0");
  if (intervals.empty()) throw Error(ErrorCode::IntervalGap, traj.id + ": no intervals");
  std::int64_t expected = 0;
  for (const auto& iv : intervals) {
    if (iv.start_frame != expected || iv.end_frame <= iv.start_frame) {
      throw Error(ErrorCode::IntervalGap,
                  traj.id + ": intervals do not tile frames at " + std::to_string(expected));
    }
    expected = iv.end_frame;
  }
  if (expected != traj.num_frames) {
    throw Error(ErrorCode::IntervalGap, traj.id + ": last interval ends at " +
                                            std::to_string(expected));
  }
  if (traj.sub_instructions.size() < intervals.size()) {
    throw Error(ErrorCode::InvalidConfig, traj.id + ": fewer sub-instructions than intervals");
  }

  std::vector<PlanningSample> out;
  std::size_t active = 0;
  for (int t = 0; t < traj.num_frames; ++t) {
    while (intervals[active].end_frame <= t) ++active;
    std::size_t label = active;
    for (std::size_t k = active + 1; k < intervals.size(); ++k) {
      const auto s = intervals[k].start_frame;
      if (s > t + window) break;
      if (s > t) {
        label = k;
        break;
      }
    }
    PlanningSample ps;
    ps.trajectory_id = traj.id;
    for (int h = std::max(0, t - history_len); h < t; ++h) ps.history_frames.push_back(h);
    ps.current_frame = t;
    ps.goal_frame = traj.num_frames - 1;
    ps.label_index = intervals[label].index;
    ps.label = traj.sub_instructions[intervals[label].index - 1];
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace hrnav::annot
