#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hrnav/error.hpp"

namespace hrnav::annot {

struct TrajectoryRecord {
  std::string id;
  int num_frames = 0;
  std::vector<std::string> actions;
  std::string instruction;
  std::vector<std::string> sub_instructions;
};

TrajectoryRecord trajectory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrajectoryRecord& t);
std::vector<TrajectoryRecord> read_manifest(const std::string& path);

/// Frames [start_frame, end_frame). `onwards` intervals have end_frame
/// resolved to the trajectory's frame count.
struct SubTaskInterval {
  int index = 0;  // 1-based
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  bool onwards = false;

  friend bool operator==(const SubTaskInterval&, const SubTaskInterval&) = default;
};

struct FormatViolation {
  ErrorCode code = ErrorCode::MalformedLine;
  int line_no = 0;  // 1-based; 0 when not tied to a line
  std::string detail;
};

struct GroundingParse {
  std::vector<SubTaskInterval> intervals;  // sorted by index
  std::optional<FormatViolation> violation;

  bool ok() const { return !violation.has_value(); }
};

/// Parses lines of the form
///   `# Instruction<N>: from frame <S> to frame <E>;`
///   `# Instruction<N>: from frame <S> onwards;`
/// tolerating repeated spaces and a missing trailing semicolon.
GroundingParse parse_grounding(std::string_view text, int num_frames);

/// Canonical text: single spaces, trailing semicolons, index order.
std::string serialize_grounding(const std::vector<SubTaskInterval>& intervals);

enum class TemporalViolationKind : std::uint8_t { StartOrder, Overlap, OutOfRange, Empty };
std::string_view to_string(TemporalViolationKind k);

struct TemporalViolation {
  TemporalViolationKind kind = TemporalViolationKind::Overlap;
  int first_index = 0;
  int second_index = 0;  // 0 when the violation concerns one interval
  std::int64_t frame_begin = 0;
  std::int64_t frame_end = 0;  // exclusive
};

struct TemporalVerdict {
  bool ok = true;
  std::vector<TemporalViolation> violations;
};

TemporalVerdict check_temporal(const std::vector<SubTaskInterval>& intervals, int num_frames);

struct JudgeRequest {
  std::string trajectory_id;
  int index = 0;
  std::string sub_task;
  std::vector<std::int64_t> frames;
};

/// A semantic-grounding judge returns raw JSON text. Implementations throw
/// Error(JudgeUnavailable) when they cannot answer.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string judge(const JudgeRequest& request) = 0;
};

/// Replays fixture verdicts keyed on (trajectory id, interval index).
class StubJudge : public Judge {
 public:
  StubJudge() = default;
  explicit StubJudge(nlohmann::json fixture) : fixture_(std::move(fixture)) {}
  static StubJudge from_file(const std::string& path);

  std::string judge(const JudgeRequest& request) override;

 private:
  nlohmann::json fixture_ = nlohmann::json::object();
};

struct SemanticVerdict {
  int index = 0;
  bool skipped = false;
  std::string note;  // MalformedJudgeOutput / JudgeUnavailable when skipped
  bool consistent = false;
  double confidence = 0.0;
  std::vector<std::int64_t> evidence_frames;
  std::string reason;
};

/// Uniformly spaced frames inside [start, end), at most `count`.
std::vector<std::int64_t> sample_frames(const SubTaskInterval& interval, int count = 4);

SemanticVerdict judge_semantic(const std::string& trajectory_id,
                               const SubTaskInterval& interval, const std::string& sub_task,
                               const std::vector<std::int64_t>& frames, Judge& judge);

struct TQCMReport {
  std::string trajectory_id;
  bool format_ok = false;
  std::optional<FormatViolation> format_violation;
  std::optional<bool> temporal_ok;  // nullopt when not executed
  std::vector<TemporalViolation> temporal_violations;
  std::optional<std::vector<SemanticVerdict>> semantic;  // nullopt when skipped
  bool retained = false;
};

/// Runs the three checks in order; later stages run only when earlier pass.
TQCMReport run_tqcm(const TrajectoryRecord& traj, std::string_view annotation, Judge* judge,
                    int frames_per_interval = 4);

nlohmann::json to_json(const TQCMReport& r);

struct QualityMetrics {
  std::size_t samples = 0;
  std::optional<double> format_pct;
  std::optional<double> temporal_pct;  // over format-passing reports
  std::optional<double> semantic_pct;  // over judged intervals
  std::size_t retained_count = 0;
};

/// Count-based aggregation; merging shards equals aggregating the union.
class QualityAccumulator {
 public:
  void add(const TQCMReport& r);
  void merge(const QualityAccumulator& other);
  QualityMetrics metrics() const;

 private:
  std::size_t samples_ = 0;
  std::size_t format_ok_ = 0;
  std::size_t temporal_run_ = 0;
  std::size_t temporal_ok_ = 0;
  std::size_t judged_ = 0;
  std::size_t consistent_ = 0;
  std::size_t retained_ = 0;
};

QualityMetrics quality_metrics(const std::vector<TQCMReport>& reports);

/// `data,samples,format,temporal,semantic` rows for all reports and the
/// retained subset; undefined percentages print as n/a.
std::string quality_csv(const std::vector<TQCMReport>& reports);

struct PlanningSample {
  std::string trajectory_id;
  std::vector<int> history_frames;
  int current_frame = 0;
  int goal_frame = 0;
  int label_index = 0;
  std::string label;
};

nlohmann::json to_json(const PlanningSample& s);

/// Labels each frame with the sub-task starting inside (t, t + window], or
/// the active sub-task when none starts there. Intervals must tile
/// [0, num_frames).
std::vector<PlanningSample> label_samples(const TrajectoryRecord& traj,
                                          const std::vector<SubTaskInterval>& intervals,
                                          int window = 4, int history_len = 15);

}  // namespace hrnav::annot
