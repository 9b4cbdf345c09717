#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hrnav/env.hpp"
#include "hrnav/hier.hpp"
#include "hrnav/rng.hpp"

namespace hrnav {

constexpr int kGoalVecWidth = 3;
constexpr int kFusedWidth = kPatchSize * kPatchSize + kGoalVecWidth + kPlanFeatureWidth + kNumActions;
static_assert(kFusedWidth == 138);

constexpr double kGoalDistanceScaleM = 10.0;

using GoalVec = std::array<double, kGoalVecWidth>;

/// (sin, cos) of the egocentric goal bearing and min(geodesic / 10 m, 1).
GoalVec goal_vector(const Pose& pose, Vec2 goal, double geodesic_m);

/// Concatenation of the navigation channel (patch, goal vector), the plan
/// channel and the previous action one-hot.
struct ObservationFeatures {
  std::array<double, kFusedWidth> fused{};

  std::span<const double> ego_patch() const { return {fused.data(), kPatchSize * kPatchSize}; }
  std::span<const double> goal_vec() const {
    return {fused.data() + kPatchSize * kPatchSize, kGoalVecWidth};
  }
  std::span<const double> plan_feat() const {
    return {fused.data() + kPatchSize * kPatchSize + kGoalVecWidth, kPlanFeatureWidth};
  }
  std::span<const double> prev_action() const {
    return {fused.data() + kFusedWidth - kNumActions, kNumActions};
  }
};

/// Throws Error(ShapeMismatch) unless the spans have widths 121, 3, 10, 4.
ObservationFeatures fuse(std::span<const double> patch, std::span<const double> goal_vec,
                         std::span<const double> plan_feat, std::span<const double> prev_action);
ObservationFeatures fuse(const EgoPatch& patch, const GoalVec& goal_vec, const PlanFeature& plan,
                         std::optional<Action> prev_action);

struct NetShape {
  int input = kFusedWidth;
  int embed = 64;
  int hidden = 128;
  int layers = 2;
  int actions = kNumActions;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

/// Affine+tanh encoder, stacked GRU cells, linear actor and critic heads.
/// Parameters live in one flat vector so optimisers and checks can treat
/// them uniformly.
class PolicyNet {
 public:
  explicit PolicyNet(NetShape shape = {});

  static std::size_t param_count(const NetShape& shape);
  std::size_t param_count() const { return params_.size(); }
  const NetShape& shape() const { return shape_; }

  void init(std::uint64_t seed);
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using CMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using CVecMap = Eigen::Map<const Eigen::VectorXd>;

  struct Offsets {
    std::size_t enc_w, enc_b;
    std::vector<std::size_t> w_ih, w_hh, b_ih, b_hh;
    std::size_t act_w, act_b, val_w, val_b;
  };
  const Offsets& offsets() const { return off_; }

  CMatMap enc_w() const;
  CVecMap enc_b() const;
  CMatMap w_ih(int layer) const;
  CMatMap w_hh(int layer) const;
  CVecMap b_ih(int layer) const;
  CVecMap b_hh(int layer) const;
  CMatMap act_w() const;
  CVecMap act_b() const;
  CMatMap val_w() const;
  double val_b() const { return params_[off_.val_b]; }

 private:
  NetShape shape_;
  Offsets off_;
  std::vector<double> params_;
};

/// Recurrent state: one hidden × batch matrix per layer.
using Hidden = std::vector<Eigen::MatrixXd>;
Hidden zero_hidden(const NetShape& shape, int batch);

struct PolicyOutput {
  Eigen::MatrixXd logits;  // actions × batch
  Eigen::MatrixXd probs;   // actions × batch
  Eigen::RowVectorXd values;
  Hidden hidden;
};

/// One step for a batch (columns of `inputs`). Throws Error(NonFiniteActivation).
PolicyOutput policy_step(const PolicyNet& net, const Eigen::MatrixXd& inputs, const Hidden& hidden);

struct ActionDistribution {
  std::array<double, kNumActions> probs{};
  double value = 0.0;
};

/// Single-sample convenience wrapper.
ActionDistribution policy_step(const PolicyNet& net, const ObservationFeatures& feats,
                               Hidden& hidden);

double entropy(std::span<const double> probs);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalised advantage estimation. `dones[t]` marks that the episode ended
/// after step t; `last_value` bootstraps past the final step.
Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values,
                          std::span<const std::uint8_t> dones, double discount, double lambda,
                          double last_value = 0.0);

/// Training batch of B sequences of length T.
struct SequenceBatch {
  int steps = 0;
  int batch = 0;
  std::vector<Eigen::MatrixXd> inputs;         // T × (input × B)
  std::vector<Eigen::RowVectorXd> keep_hidden; // T × B, 0 where the episode restarted
  std::vector<std::vector<int>> actions;       // T × B
  Eigen::MatrixXd old_log_probs;               // T × B
  Eigen::MatrixXd advantages;                  // T × B
  Eigen::MatrixXd returns;                     // T × B
  Hidden initial_hidden;
};

struct PpoCoefficients {
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
};

struct LossStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate loss with value and entropy terms, averaged over all
/// T × B samples. When `grad` is non-null it receives dLoss/dParams computed
/// by backpropagation through time.
LossStats ppo_loss(const PolicyNet& net, const SequenceBatch& batch, const PpoCoefficients& coefs,
                   std::vector<double>* grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 2.5e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-5);

  void step(std::vector<double>& params, const std::vector<double>& grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  std::vector<double> m, v;
  long t = 0;

 private:
  double lr_, beta1_, beta2_, eps_;
};

double global_norm(const std::vector<double>& g);

}  // namespace hrnav
