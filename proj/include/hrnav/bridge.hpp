#pragma once

#include <memory>
#include <string>

#include "hrnav/hier.hpp"
#include "hrnav/subprocess.hpp"

namespace hrnav {

/// Synchronous planner call over a child process speaking one JSON object
/// per line. Failures retain the previous plan and surface as events.
class BridgePlanner : public Planner {
 public:
  BridgePlanner(const std::string& command, double timeout_ms, int history_len = kDefaultHistoryLen);

  PlanOutcome plan(const PlanningContext& ctx, const Plan& previous) override;

  /// Sends one request and decodes one response. Throws Error with
  /// ProtocolError, PlannerTimeout or ProcessExited.
  Plan bridge_plan(const PlannerRequest& request);

  static PlannerRequest make_request(const PlanningContext& ctx, int history_len);

 private:
  std::string command_;
  double timeout_ms_;
  int history_len_;
  std::unique_ptr<LineProcess> proc_;
  int stale_responses_ = 0;
  bool exited_ = false;
};

}  // namespace hrnav
