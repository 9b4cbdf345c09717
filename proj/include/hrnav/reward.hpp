#pragma once

#include <cstdint>
#include <set>
#include <string_view>
#include <tuple>

#include "hrnav/env.hpp"

namespace hrnav {

enum class RevisitMode : std::uint8_t { ReentryOnly, AnyRepeat };
enum class Formulation : std::uint8_t { Additive, Potential };

std::string_view to_string(RevisitMode m);
std::string_view to_string(Formulation f);
RevisitMode revisit_mode_from_string(std::string_view s);
Formulation formulation_from_string(std::string_view s);

struct RewardConfig {
  double d_s = 1.0;             // success distance, m
  double alpha_s = 25.0;        // success view angle, deg
  double gamma_slack = 0.01;    // magnitude; always subtracted
  double lambda_w = 0.2;
  double lambda_rv = 0.02;
  double revisit_radius = 0.25;  // voxel size s, m
  RevisitMode revisit_mode = RevisitMode::ReentryOnly;
  bool wsp_enabled = true;
  Formulation formulation = Formulation::Additive;

  /// Throws InvalidConfig when an invariant is violated.
  void validate() const;
};

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

/// Component-wise floor(p / s); z is fixed at 0 for planar agents.
VoxelKey quantize_voxel(double x, double y, double z, double s);
inline VoxelKey quantize_voxel(Vec2 p, double s) { return quantize_voxel(p.x, p.y, 0.0, s); }

/// Per-episode accumulators.
struct RewardState {
  double d_prev = 0.0;
  double alpha_prev = 0.0;  // degrees
  double path_len = 0.0;
  double revisit_counter = 0.0;
  std::set<VoxelKey> visited;
  VoxelKey last_voxel;
};

/// Starting state: the start voxel counts as visited.
RewardState initial_reward_state(const RewardConfig& cfg, Vec2 start, double d0,
                                 double alpha0_deg);

struct ZerComponents {
  Formulation formulation = Formulation::Additive;
  double distance_term = 0.0;
  double view_term = 0.0;
  double slack_term = 0.0;
  double d_t = 0.0;
  double alpha_t = 0.0;  // degrees

  double sum() const { return distance_term + view_term + slack_term; }
};

/// Dense distance/view shaping with slack. Under the Potential formulation
/// the view term is not gated by the success radius.
ZerComponents zer_step_reward(const RewardConfig& cfg, double d_prev, double d_t,
                              double alpha_prev_deg, double alpha_t_deg);

double success_reward(const RewardConfig& cfg, double d_t, double alpha_t_deg, bool stopped);

/// Unweighted wandering-penalty components for one step.
struct WspComponents {
  Formulation formulation = Formulation::Additive;
  bool enabled = true;
  double path_delta = 0.0;     // Δℓ
  double revisit_delta = 0.0;  // Δc
  bool revisit = false;
  VoxelKey voxel;
  double path_len = 0.0;         // ℓ after the step
  double revisit_counter = 0.0;  // C after the step

  /// r^wsp = -Δℓ - Δc, zero when disabled.
  double value() const { return enabled ? -path_delta - revisit_delta : 0.0; }
};

/// Advances the accumulators. The state is updated whether or not WSP is
/// enabled so diagnostics stay meaningful during warm-up.
WspComponents wsp_step(const RewardConfig& cfg, RewardState& state, Vec2 p_prev, Vec2 p_t);

struct RewardBreakdown {
  double distance_term = 0.0;
  double view_term = 0.0;
  double slack_term = 0.0;
  double success_term = 0.0;
  double wsp_path_term = 0.0;     // weighted by lambda_w
  double wsp_revisit_term = 0.0;  // weighted by lambda_w
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

RewardBreakdown total_step_reward(const RewardConfig& cfg, const ZerComponents& zer,
                                  double success, const WspComponents& wsp);

/// Φ = λ_w(ℓ + C) + d + α, α in radians. The λ_w term is dropped when WSP is disabled.
double potential(const RewardConfig& cfg, double path_len, double revisit_counter, double d,
                 double alpha_deg);

bool wsp_schedule(long iteration, long total_iterations, double warmup_fraction = 0.5);

/// Full per-step evaluation: ZER, success, WSP and state bookkeeping.
struct StepReward {
  RewardBreakdown breakdown;
  WspComponents wsp;
  ZerComponents zer;
};

StepReward evaluate_step(const RewardConfig& cfg, RewardState& state, Vec2 p_prev, Vec2 p_t,
                         double d_t, double alpha_t_deg, bool stopped);

double deg_to_rad(double deg);

}  // namespace hrnav
