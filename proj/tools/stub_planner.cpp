// Line-protocol planner used by tests and the latency bench. Reads one
// request per line and answers after an optional delay.
#include <chrono>
#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "hrnav/error.hpp"
#include "hrnav/hier.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stub planner speaking the hrnav line protocol"};
  double delay_ms = 0.0;
  std::string mode = "explore";
  int exit_after = -1;
  int slow_from = -1;
  double slow_ms = 0.0;
  app.add_option("--delay-ms", delay_ms, "delay before every answer");
  app.add_option("--mode", mode, "explore | waypoint | garbage | silent");
  app.add_option("--exit-after", exit_after, "exit after answering this many requests");
  app.add_option("--slow-from", slow_from, "requests from this index on wait --slow-ms");
  app.add_option("--slow-ms", slow_ms, "extra delay for slow requests");
  CLI11_PARSE(app, argc, argv);
  std::signal(SIGPIPE, SIG_IGN);

  std::ios::sync_with_stdio(false);
  std::string line;
  int answered = 0;
  while (std::getline(std::cin, line)) {
    if (exit_after >= 0 && answered >= exit_after) return 0;
    hrnav::PlannerRequest req;
    try {
      req = hrnav::decode_request(line);
    } catch (const hrnav::Error& e) {
      std::cerr << "stub planner: " << e.what() << '\n';
      continue;
    }
    double wait = delay_ms;
    if (slow_from >= 0 && answered >= slow_from) wait += slow_ms;
    if (wait > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
    if (mode == "silent") {
      ++answered;
      continue;
    }
    if (mode == "garbage") {
      std::cout << "{\"token\": 42}" << std::endl;
    } else {
      hrnav::Plan p = hrnav::null_plan();
      if (mode == "waypoint" && !req.history.empty()) {
        p.token = hrnav::PlanToken::GoToWaypoint;
        p.waypoint = hrnav::Vec2{req.history.back().x + 1.0, req.history.back().y};
        p.text = "step " + std::to_string(req.step);
      }
      std::cout << hrnav::encode_response(p) << std::endl;
    }
    ++answered;
  }
  return 0;
}
