#include "hrnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrnav/error.hpp"

namespace hrnav {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

GoalVec goal_vector(const Pose& pose, Vec2 goal, double geodesic_m) {
  GoalVec g{0.0, 1.0, 0.0};
  if (distance(pose.position(), goal) > 0.0) {
    const double b = relative_bearing_deg(pose, goal) * std::numbers::pi / 180.0;
    g[0] = std::sin(b);
    g[1] = std::cos(b);
  }
  g[2] = std::isfinite(geodesic_m) ? std::clamp(geodesic_m / kGoalDistanceScaleM, 0.0, 1.0) : 1.0;
  return g;
}

ObservationFeatures fuse(std::span<const double> patch, std::span<const double> goal_vec,
                         std::span<const double> plan_feat, std::span<const double> prev_action) {
  constexpr std::size_t np = kPatchSize * kPatchSize;
  if (patch.size() != np || goal_vec.size() != kGoalVecWidth ||
      plan_feat.size() != kPlanFeatureWidth || prev_action.size() != kNumActions) {
    throw Error(ErrorCode::ShapeMismatch,
                "expected widths 121/3/10/4, got " + std::to_string(patch.size()) + "/" +
                    std::to_string(goal_vec.size()) + "/" + std::to_string(plan_feat.size()) +
                    "/" + std::to_string(prev_action.size()));
  }
  ObservationFeatures f;
  auto out = f.fused.begin();
  out = std::copy(patch.begin(), patch.end(), out);
  out = std::copy(goal_vec.begin(), goal_vec.end(), out);
  out = std::copy(plan_feat.begin(), plan_feat.end(), out);
  std::copy(prev_action.begin(), prev_action.end(), out);
  return f;
}

ObservationFeatures fuse(const EgoPatch& patch, const GoalVec& goal_vec, const PlanFeature& plan,
                         std::optional<Action> prev_action) {
  std::array<double, kPatchSize * kPatchSize> p{};
  std::copy(patch.begin(), patch.end(), p.begin());
  std::array<double, kNumActions> a{};
  if (prev_action) a[static_cast<int>(*prev_action)] = 1.0;
  return fuse(p, goal_vec, plan, a);
}

// ---------------------------------------------------------------------------

std::size_t PolicyNet::param_count(const NetShape& s) {
  std::size_t n = static_cast<std::size_t>(s.embed) * (s.input + 1);
  for (int l = 0; l < s.layers; ++l) {
    const int in = l == 0 ? s.embed : s.hidden;
    n += static_cast<std::size_t>(3 * s.hidden) * (in + s.hidden + 2);
  }
  n += static_cast<std::size_t>(s.actions) * (s.hidden + 1);
  n += static_cast<std::size_t>(s.hidden) + 1;
  return n;
}

PolicyNet::PolicyNet(NetShape shape) : shape_(shape) {
  if (shape.input < 1 || shape.embed < 1 || shape.hidden < 1 || shape.layers < 1 ||
      shape.actions < 1) {
    throw Error(ErrorCode::InvalidConfig, "network dimensions must be positive");
  }
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t o = at;
    at += n;
    return o;
  };
  const std::size_t H = shape.hidden;
  off_.enc_w = take(static_cast<std::size_t>(shape.embed) * shape.input);
  off_.enc_b = take(shape.embed);
  for (int l = 0; l < shape.layers; ++l) {
    const std::size_t in = l == 0 ? shape.embed : H;
    off_.w_ih.push_back(take(3 * H * in));
    off_.w_hh.push_back(take(3 * H * H));
    off_.b_ih.push_back(take(3 * H));
    off_.b_hh.push_back(take(3 * H));
  }
  off_.act_w = take(shape.actions * H);
  off_.act_b = take(shape.actions);
  off_.val_w = take(H);
  off_.val_b = take(1);
  params_.assign(at, 0.0);
}

void PolicyNet::init(std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = (2.0 * uniform01(rng) - 1.0) * bound;
  };
  const auto& s = shape_;
  const std::size_t H = s.hidden;
  fill(off_.enc_w, static_cast<std::size_t>(s.embed) * s.input, 1.0 / std::sqrt(s.input));
  fill(off_.enc_b, s.embed, 0.0);
  const double gb = 1.0 / std::sqrt(static_cast<double>(H));
  for (int l = 0; l < s.layers; ++l) {
    const std::size_t in = l == 0 ? s.embed : H;
    fill(off_.w_ih[l], 3 * H * in, gb);
    fill(off_.w_hh[l], 3 * H * H, gb);
    fill(off_.b_ih[l], 3 * H, gb);
    fill(off_.b_hh[l], 3 * H, gb);
  }
  // Small actor weights start the policy close to uniform.
  fill(off_.act_w, s.actions * H, 0.01 * gb);
  fill(off_.act_b, s.actions, 0.0);
  fill(off_.val_w, H, gb);
  fill(off_.val_b, 1, 0.0);
}

PolicyNet::CMatMap PolicyNet::enc_w() const {
  return {params_.data() + off_.enc_w, shape_.embed, shape_.input};
}
PolicyNet::CVecMap PolicyNet::enc_b() const { return {params_.data() + off_.enc_b, shape_.embed}; }
PolicyNet::CMatMap PolicyNet::w_ih(int l) const {
  return {params_.data() + off_.w_ih[l], 3 * shape_.hidden, l == 0 ? shape_.embed : shape_.hidden};
}
PolicyNet::CMatMap PolicyNet::w_hh(int l) const {
  return {params_.data() + off_.w_hh[l], 3 * shape_.hidden, shape_.hidden};
}
PolicyNet::CVecMap PolicyNet::b_ih(int l) const {
  return {params_.data() + off_.b_ih[l], 3 * shape_.hidden};
}
PolicyNet::CVecMap PolicyNet::b_hh(int l) const {
  return {params_.data() + off_.b_hh[l], 3 * shape_.hidden};
}
PolicyNet::CMatMap PolicyNet::act_w() const {
  return {params_.data() + off_.act_w, shape_.actions, shape_.hidden};
}
PolicyNet::CVecMap PolicyNet::act_b() const {
  return {params_.data() + off_.act_b, shape_.actions};
}
PolicyNet::CMatMap PolicyNet::val_w() const {
  return {params_.data() + off_.val_w, 1, shape_.hidden};
}

Hidden zero_hidden(const NetShape& shape, int batch) {
  return Hidden(shape.layers, MatrixXd::Zero(shape.hidden, batch));
}

// ---------------------------------------------------------------------------

namespace {

MatrixXd sigmoid(const MatrixXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

struct LayerCache {
  MatrixXd h_prev, r, z, n, g, h;
};

struct StepCache {
  MatrixXd e;
  std::vector<LayerCache> layers;
  MatrixXd logits;
  RowVectorXd values;
};

/// Forward pass for one time step. `h_prev` must already be masked.
void forward_step(const PolicyNet& net, const MatrixXd& x, const Hidden& h_prev, StepCache& c) {
  const int H = net.shape().hidden;
  c.e = ((net.enc_w() * x).colwise() + net.enc_b()).array().tanh().matrix();
  c.layers.resize(net.shape().layers);
  const MatrixXd* u = &c.e;
  for (int l = 0; l < net.shape().layers; ++l) {
    auto& L = c.layers[l];
    L.h_prev = h_prev[l];
    const MatrixXd gi = (net.w_ih(l) * *u).colwise() + net.b_ih(l);
    const MatrixXd gh = (net.w_hh(l) * L.h_prev).colwise() + net.b_hh(l);
    L.r = sigmoid(gi.topRows(H) + gh.topRows(H));
    L.z = sigmoid(gi.middleRows(H, H) + gh.middleRows(H, H));
    L.g = gh.bottomRows(H);
    L.n = (gi.bottomRows(H).array() + L.r.array() * L.g.array()).tanh().matrix();
    L.h = ((1.0 - L.z.array()) * L.n.array() + L.z.array() * L.h_prev.array()).matrix();
    u = &L.h;
  }
  c.logits = (net.act_w() * *u).colwise() + net.act_b();
  c.values = (net.val_w() * *u).array() + net.val_b();
}

MatrixXd softmax_cols(const MatrixXd& logits) {
  MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

}  // namespace

PolicyOutput policy_step(const PolicyNet& net, const MatrixXd& inputs, const Hidden& hidden) {
  const auto& s = net.shape();
  if (inputs.rows() != s.input || static_cast<int>(hidden.size()) != s.layers) {
    throw Error(ErrorCode::ShapeMismatch, "input or hidden shape does not match the network");
  }
  for (const auto& h : hidden) {
    if (h.rows() != s.hidden || h.cols() != inputs.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "hidden state shape does not match the network");
    }
  }
  StepCache c;
  forward_step(net, inputs, hidden, c);
  PolicyOutput out;
  out.logits = std::move(c.logits);
  out.values = std::move(c.values);
  out.hidden.reserve(c.layers.size());
  for (auto& L : c.layers) out.hidden.push_back(std::move(L.h));
  if (!out.logits.allFinite() || !out.values.allFinite()) {
    throw Error(ErrorCode::NonFiniteActivation, "policy produced a non-finite activation");
  }
  out.probs = softmax_cols(out.logits);
  return out;
}

ActionDistribution policy_step(const PolicyNet& net, const ObservationFeatures& feats,
                               Hidden& hidden) {
  if (net.shape().input != kFusedWidth) {
    throw Error(ErrorCode::ShapeMismatch, "network input width is not the fused width");
  }
  const MatrixXd x = Eigen::Map<const VectorXd>(feats.fused.data(), kFusedWidth);
  auto out = policy_step(net, x, hidden);
  hidden = std::move(out.hidden);
  ActionDistribution d;
  for (int a = 0; a < kNumActions; ++a) d.probs[a] = out.probs(a, 0);
  d.value = out.values(0);
  return d;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values,
                          std::span<const std::uint8_t> dones, double discount, double lambda,
                          double last_value) {
  if (rewards.size() != values.size() || rewards.size() != dones.size()) {
    throw Error(ErrorCode::ShapeMismatch, "rewards, values and dones must have equal lengths");
  }
  const std::size_t T = rewards.size();
  Advantages out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double gae = 0.0;
  double next_value = last_value;
  for (std::size_t i = T; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + discount * next_value * live - values[i];
    gae = delta + discount * lambda * live * gae;
    out.advantages[i] = gae;
    out.returns[i] = gae + values[i];
    next_value = values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

LossStats ppo_loss(const PolicyNet& net, const SequenceBatch& batch, const PpoCoefficients& coefs,
                   std::vector<double>* grad) {
  const auto& s = net.shape();
  const int T = batch.steps;
  const int B = batch.batch;
  const int H = s.hidden;
  const int NL = s.layers;
  if (T < 1 || B < 1 || static_cast<int>(batch.inputs.size()) != T ||
      static_cast<int>(batch.keep_hidden.size()) != T ||
      static_cast<int>(batch.actions.size()) != T || batch.old_log_probs.rows() != T ||
      batch.advantages.rows() != T || batch.returns.rows() != T ||
      static_cast<int>(batch.initial_hidden.size()) != NL) {
    throw Error(ErrorCode::ShapeMismatch, "malformed sequence batch");
  }
  const double inv_n = 1.0 / (static_cast<double>(T) * B);

  std::vector<StepCache> caches(T);
  Hidden h = batch.initial_hidden;
  for (int t = 0; t < T; ++t) {
    for (auto& hl : h) hl.array().rowwise() *= batch.keep_hidden[t].array();
    forward_step(net, batch.inputs[t], h, caches[t]);
    for (int l = 0; l < NL; ++l) h[l] = caches[t].layers[l].h;
  }

  LossStats st;
  std::vector<MatrixXd> d_logits(T);
  std::vector<RowVectorXd> d_values(T);
  int clipped = 0;
  for (int t = 0; t < T; ++t) {
    const auto& c = caches[t];
    if (!c.logits.allFinite() || !c.values.allFinite()) {
      throw Error(ErrorCode::NonFiniteActivation, "non-finite activation in loss forward pass");
    }
    const MatrixXd p = softmax_cols(c.logits);
    const MatrixXd shifted = c.logits.rowwise() - c.logits.colwise().maxCoeff();
    MatrixXd dl = MatrixXd::Zero(s.actions, B);
    RowVectorXd dv(B);
    for (int b = 0; b < B; ++b) {
      const double lse = std::log(shifted.col(b).array().exp().sum());
      const VectorXd lp = shifted.col(b).array() - lse;
      const int a = batch.actions[t][b];
      if (a < 0 || a >= s.actions) throw Error(ErrorCode::ShapeMismatch, "action out of range");
      const double adv = batch.advantages(t, b);
      const double ratio = std::exp(lp(a) - batch.old_log_probs(t, b));
      const double lo = 1.0 - coefs.clip;
      const double hi = 1.0 + coefs.clip;
      const double surr1 = ratio * adv;
      const double surr2 = std::clamp(ratio, lo, hi) * adv;
      st.policy_loss -= std::min(surr1, surr2) * inv_n;
      // d(-min(surr1, surr2))/d logp, zero where the clipped branch is active.
      double g_logp = 0.0;
      if (surr1 <= surr2 || (ratio >= lo && ratio <= hi)) {
        g_logp = -ratio * adv;
      } else {
        ++clipped;
      }
      double ent = 0.0;
      for (int j = 0; j < s.actions; ++j) ent -= p(j, b) * lp(j);
      st.entropy += ent * inv_n;
      const double verr = c.values(b) - batch.returns(t, b);
      st.value_loss += 0.5 * verr * verr * inv_n;
      for (int j = 0; j < s.actions; ++j) {
        const double onehot = j == a ? 1.0 : 0.0;
        dl(j, b) = inv_n * (g_logp * (onehot - p(j, b)) +
                            coefs.entropy_coef * p(j, b) * (lp(j) + ent));
      }
      dv(b) = inv_n * coefs.value_coef * verr;
    }
    d_logits[t] = std::move(dl);
    d_values[t] = std::move(dv);
  }
  st.clip_fraction = clipped * inv_n;
  st.loss = st.policy_loss + coefs.value_coef * st.value_loss - coefs.entropy_coef * st.entropy;
  if (!std::isfinite(st.loss)) {
    throw Error(ErrorCode::NonFiniteActivation, "non-finite loss");
  }
  if (grad == nullptr) return st;

  grad->assign(net.param_count(), 0.0);
  auto& g = *grad;
  const auto& off = net.offsets();
  Eigen::Map<MatrixXd> g_enc_w(g.data() + off.enc_w, s.embed, s.input);
  Eigen::Map<VectorXd> g_enc_b(g.data() + off.enc_b, s.embed);
  Eigen::Map<MatrixXd> g_act_w(g.data() + off.act_w, s.actions, H);
  Eigen::Map<VectorXd> g_act_b(g.data() + off.act_b, s.actions);
  Eigen::Map<MatrixXd> g_val_w(g.data() + off.val_w, 1, H);
  double& g_val_b = g[off.val_b];

  std::vector<MatrixXd> carry(NL, MatrixXd::Zero(H, B));
  MatrixXd dgi(3 * H, B);
  MatrixXd dgh(3 * H, B);
  for (int t = T - 1; t >= 0; --t) {
    const auto& c = caches[t];
    const MatrixXd& top = c.layers[NL - 1].h;
    g_act_w.noalias() += d_logits[t] * top.transpose();
    g_act_b += d_logits[t].rowwise().sum();
    g_val_w.noalias() += d_values[t] * top.transpose();
    g_val_b += d_values[t].sum();

    MatrixXd dh = net.act_w().transpose() * d_logits[t] + net.val_w().transpose() * d_values[t];
    for (int l = NL - 1; l >= 0; --l) {
      const auto& L = c.layers[l];
      dh += carry[l];
      const MatrixXd& u = l == 0 ? c.e : c.layers[l - 1].h;
      const auto dn = (dh.array() * (1.0 - L.z.array())).eval();
      const auto dz = (dh.array() * (L.h_prev.array() - L.n.array())).eval();
      const auto da_n = (dn * (1.0 - L.n.array().square())).eval();
      const auto dr = (da_n * L.g.array()).eval();
      dgi.topRows(H) = (dr * L.r.array() * (1.0 - L.r.array())).matrix();
      dgi.middleRows(H, H) = (dz * L.z.array() * (1.0 - L.z.array())).matrix();
      dgi.bottomRows(H) = da_n.matrix();
      dgh.topRows(2 * H) = dgi.topRows(2 * H);
      dgh.bottomRows(H) = (da_n * L.r.array()).matrix();

      Eigen::Map<MatrixXd> g_w_ih(g.data() + off.w_ih[l], 3 * H, u.rows());
      Eigen::Map<MatrixXd> g_w_hh(g.data() + off.w_hh[l], 3 * H, H);
      Eigen::Map<VectorXd> g_b_ih(g.data() + off.b_ih[l], 3 * H);
      Eigen::Map<VectorXd> g_b_hh(g.data() + off.b_hh[l], 3 * H);
      g_w_ih.noalias() += dgi * u.transpose();
      g_w_hh.noalias() += dgh * L.h_prev.transpose();
      g_b_ih += dgi.rowwise().sum();
      g_b_hh += dgh.rowwise().sum();

      MatrixXd dh_prev = (dh.array() * L.z.array()).matrix();
      dh_prev.noalias() += net.w_hh(l).transpose() * dgh;
      // h_prev was the masked previous state; the mask gates its gradient too.
      dh_prev.array().rowwise() *= batch.keep_hidden[t].array();
      carry[l] = std::move(dh_prev);
      dh = net.w_ih(l).transpose() * dgi;
    }
    const MatrixXd da_e = (dh.array() * (1.0 - c.e.array().square())).matrix();
    g_enc_w.noalias() += da_e * batch.inputs[t].transpose();
    g_enc_b += da_e.rowwise().sum();
  }
  for (double v : g) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient");
  }
  return st;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : m(n, 0.0), v(n, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m.size() || grad.size() != m.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameter count");
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
  }
}

double global_norm(const std::vector<double>& g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace hrnav
