#include "hrnav/reward.hpp"

#include <cmath>
#include <numbers>

#include "hrnav/error.hpp"

namespace hrnav {

std::string_view to_string(RevisitMode m) {
  return m == RevisitMode::ReentryOnly ? "ReentryOnly" : "AnyRepeat";
}

std::string_view to_string(Formulation f) {
  return f == Formulation::Additive ? "Additive" : "Potential";
}

RevisitMode revisit_mode_from_string(std::string_view s) {
  if (s == "ReentryOnly") return RevisitMode::ReentryOnly;
  if (s == "AnyRepeat") return RevisitMode::AnyRepeat;
  throw Error(ErrorCode::InvalidConfig, "unknown revisit_mode '" + std::string(s) + "'");
}

Formulation formulation_from_string(std::string_view s) {
  if (s == "Additive") return Formulation::Additive;
  if (s == "Potential") return Formulation::Potential;
  throw Error(ErrorCode::InvalidConfig, "unknown formulation '" + std::string(s) + "'");
}

void RewardConfig::validate() const {
  if (!(d_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "d_s must be > 0");
  if (!(alpha_s > 0.0 && alpha_s < 180.0)) {
    throw Error(ErrorCode::InvalidConfig, "alpha_s must lie in (0, 180)");
  }
  if (!(lambda_w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda_w must be >= 0");
  if (!(lambda_rv >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda_rv must be >= 0");
  if (!(revisit_radius > 0.0)) {
    throw Error(ErrorCode::NonPositiveResolution, "revisit_radius must be > 0");
  }
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

VoxelKey quantize_voxel(double x, double y, double z, double s) {
  if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveResolution, "voxel size must be > 0");
  return {static_cast<std::int64_t>(std::floor(x / s)),
          static_cast<std::int64_t>(std::floor(y / s)),
          static_cast<std::int64_t>(std::floor(z / s))};
}

RewardState initial_reward_state(const RewardConfig& cfg, Vec2 start, double d0,
                                 double alpha0_deg) {
  RewardState st;
  st.d_prev = d0;
  st.alpha_prev = alpha0_deg;
  st.last_voxel = quantize_voxel(start, cfg.revisit_radius);
  st.visited.insert(st.last_voxel);
  return st;
}

ZerComponents zer_step_reward(const RewardConfig& cfg, double d_prev, double d_t,
                              double alpha_prev_deg, double alpha_t_deg) {
  ZerComponents z;
  z.formulation = cfg.formulation;
  z.d_t = d_t;
  z.alpha_t = alpha_t_deg;
  z.distance_term = d_prev - d_t;
  const bool gated = cfg.formulation == Formulation::Additive && !(d_t <= cfg.d_s);
  z.view_term = gated ? 0.0 : deg_to_rad(alpha_prev_deg) - deg_to_rad(alpha_t_deg);
  z.slack_term = -cfg.gamma_slack;
  return z;
}

double success_reward(const RewardConfig& cfg, double d_t, double alpha_t_deg, bool stopped) {
  if (!stopped) return 0.0;
  const bool in_area = d_t <= cfg.d_s;
  const bool aligned = in_area && alpha_t_deg <= cfg.alpha_s;
  return 5.0 * ((in_area ? 1.0 : 0.0) + (aligned ? 1.0 : 0.0));
}

WspComponents wsp_step(const RewardConfig& cfg, RewardState& state, Vec2 p_prev, Vec2 p_t) {
  WspComponents w;
  w.formulation = cfg.formulation;
  w.enabled = cfg.wsp_enabled;
  w.path_delta = distance(p_prev, p_t);
  w.voxel = quantize_voxel(p_t, cfg.revisit_radius);
  const bool seen = state.visited.contains(w.voxel);
  w.revisit = cfg.revisit_mode == RevisitMode::AnyRepeat ? seen
                                                         : seen && !(w.voxel == state.last_voxel);
  w.revisit_delta = w.revisit ? cfg.lambda_rv : 0.0;
  state.path_len += w.path_delta;
  state.revisit_counter += w.revisit_delta;
  state.visited.insert(w.voxel);
  state.last_voxel = w.voxel;
  w.path_len = state.path_len;
  w.revisit_counter = state.revisit_counter;
  return w;
}

RewardBreakdown total_step_reward(const RewardConfig& cfg, const ZerComponents& zer,
                                  double success, const WspComponents& wsp) {
  if (zer.formulation != wsp.formulation || zer.formulation != cfg.formulation) {
    throw Error(ErrorCode::FormulationMismatch, "reward components disagree on formulation");
  }
  RewardBreakdown b;
  b.distance_term = zer.distance_term;
  b.view_term = zer.view_term;
  b.slack_term = zer.slack_term;
  b.success_term = success;
  if (wsp.enabled) {
    // Additive: λ_w·r^wsp. Potential: the λ_w(ℓ + C) part of Φ_{t-1} - Φ_t,
    // which is the same quantity split by component.
    b.wsp_path_term = -cfg.lambda_w * wsp.path_delta;
    b.wsp_revisit_term = -cfg.lambda_w * wsp.revisit_delta;
  }
  b.total = b.distance_term + b.view_term + b.slack_term + b.success_term + b.wsp_path_term +
            b.wsp_revisit_term;
  return b;
}

double potential(const RewardConfig& cfg, double path_len, double revisit_counter, double d,
                 double alpha_deg) {
  const double wander = cfg.wsp_enabled ? cfg.lambda_w * (path_len + revisit_counter) : 0.0;
  return wander + d + deg_to_rad(alpha_deg);
}

bool wsp_schedule(long iteration, long total_iterations, double warmup_fraction) {
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "warmup_fraction must lie in [0, 1]");
  }
  return static_cast<double>(iteration) >= warmup_fraction * static_cast<double>(total_iterations);
}

StepReward evaluate_step(const RewardConfig& cfg, RewardState& state, Vec2 p_prev, Vec2 p_t,
                         double d_t, double alpha_t_deg, bool stopped) {
  StepReward out;
  out.zer = zer_step_reward(cfg, state.d_prev, d_t, state.alpha_prev, alpha_t_deg);
  const double rs = success_reward(cfg, d_t, alpha_t_deg, stopped);
  out.wsp = wsp_step(cfg, state, p_prev, p_t);
  out.breakdown = total_step_reward(cfg, out.zer, rs, out.wsp);
  state.d_prev = d_t;
  state.alpha_prev = alpha_t_deg;
  return out;
}

}  // namespace hrnav
