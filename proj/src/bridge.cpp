#include "hrnav/bridge.hpp"

#include <algorithm>
#include <chrono>

#include "hrnav/error.hpp"

namespace hrnav {

BridgePlanner::BridgePlanner(const std::string& command, double timeout_ms, int history_len)
    : command_(command),
      timeout_ms_(timeout_ms),
      history_len_(history_len),
      proc_(std::make_unique<LineProcess>(command)) {}

PlannerRequest BridgePlanner::make_request(const PlanningContext& ctx, int history_len) {
  PlannerRequest req;
  req.episode_id = ctx.episode->id;
  req.step = ctx.step;
  req.patch = ego_patch(*ctx.map, ctx.pose);
  req.goal = describe_goal(ctx.pose, ctx.episode->goal.position(), ctx.geodesic_to_goal);
  if (ctx.history != nullptr) {
    const auto& h = *ctx.history;
    const std::size_t n = std::min<std::size_t>(h.size(), static_cast<std::size_t>(history_len));
    req.history.assign(h.end() - static_cast<std::ptrdiff_t>(n), h.end());
  }
  return req;
}

Plan BridgePlanner::bridge_plan(const PlannerRequest& request) {
  if (exited_) throw Error(ErrorCode::ProcessExited, "planner process is gone");
  if (!proc_->write_line(encode_request(request))) {
    exited_ = true;
    throw Error(ErrorCode::ProcessExited, "planner closed its input");
  }
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  while (true) {
    const double elapsed =
        std::chrono::duration<double, std::milli>(clock::now() - start).count();
    const auto r = proc_->read_line(std::max(0.0, timeout_ms_ - elapsed));
    if (r.status == LineProcess::ReadStatus::Eof) {
      exited_ = true;
      throw Error(ErrorCode::ProcessExited, "planner closed its output");
    }
    if (r.status == LineProcess::ReadStatus::Timeout) {
      // The late answer to this request must not be mistaken for the next one.
      ++stale_responses_;
      throw Error(ErrorCode::PlannerTimeout,
                  "no response within " + std::to_string(timeout_ms_) + " ms");
    }
    if (stale_responses_ > 0) {
      --stale_responses_;
      continue;
    }
    return decode_response(r.line);
  }
}

PlanOutcome BridgePlanner::plan(const PlanningContext& ctx, const Plan& previous) {
  PlanOutcome out{previous, std::nullopt};
  try {
    out.plan = bridge_plan(make_request(ctx, history_len_));
    out.plan.issued_at_step = ctx.step;
  } catch (const Error& e) {
    PlannerEventKind kind = PlannerEventKind::ProtocolError;
    if (e.code() == ErrorCode::PlannerTimeout) kind = PlannerEventKind::Timeout;
    if (e.code() == ErrorCode::ProcessExited) kind = PlannerEventKind::ProcessExited;
    if (e.code() != ErrorCode::PlannerTimeout && e.code() != ErrorCode::ProcessExited &&
        e.code() != ErrorCode::ProtocolError) {
      throw;
    }
    out.plan = previous;
    out.event = PlannerEvent{kind, ctx.step, e.what()};
  }
  return out;
}

}  // namespace hrnav
