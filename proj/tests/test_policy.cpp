#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "hrnav/error.hpp"
#include "hrnav/policy.hpp"

using namespace hrnav;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Loop-only forward pass written against the documented parameter layout:
/// encoder (embed x input, embed), per layer w_ih (3H x in), w_hh (3H x H),
/// b_ih, b_hh with gates ordered r, z, n, then actor (A x H, A) and critic (H, 1).
struct RefOut {
  std::vector<double> logits;
  double value;
  std::vector<std::vector<double>> hidden;
};

RefOut reference_step(const PolicyNet& net, const std::vector<double>& x,
                      std::vector<std::vector<double>> h) {
  const auto& s = net.shape();
  const auto& p = net.params();
  std::size_t o = 0;
  auto mat = [&](int rows, int cols) {
    // Column-major rows x cols block.
    std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) m[r][c] = p[o++];
    }
    return m;
  };
  auto vec = [&](int n) {
    std::vector<double> v(p.begin() + o, p.begin() + o + n);
    o += n;
    return v;
  };
  const auto ew = mat(s.embed, s.input);
  const auto eb = vec(s.embed);
  std::vector<double> in(s.embed);
  for (int i = 0; i < s.embed; ++i) {
    double acc = eb[i];
    for (int j = 0; j < s.input; ++j) acc += ew[i][j] * x[j];
    in[i] = std::tanh(acc);
  }
  const int H = s.hidden;
  for (int l = 0; l < s.layers; ++l) {
    const int n_in = static_cast<int>(in.size());
    const auto wih = mat(3 * H, n_in);
    const auto whh = mat(3 * H, H);
    const auto bih = vec(3 * H);
    const auto bhh = vec(3 * H);
    std::vector<double> gi(3 * H), gh(3 * H);
    for (int g = 0; g < 3 * H; ++g) {
      gi[g] = bih[g];
      for (int j = 0; j < n_in; ++j) gi[g] += wih[g][j] * in[j];
      gh[g] = bhh[g];
      for (int j = 0; j < H; ++j) gh[g] += whh[g][j] * h[l][j];
    }
    std::vector<double> next(H);
    for (int i = 0; i < H; ++i) {
      const double r = sigmoid(gi[i] + gh[i]);
      const double z = sigmoid(gi[H + i] + gh[H + i]);
      const double n = std::tanh(gi[2 * H + i] + r * gh[2 * H + i]);
      next[i] = (1 - z) * n + z * h[l][i];
    }
    h[l] = next;
    in = next;
  }
  const auto aw = mat(s.actions, H);
  const auto ab = vec(s.actions);
  const auto vw = mat(1, H);
  const auto vb = vec(1);
  RefOut out;
  for (int a = 0; a < s.actions; ++a) {
    double acc = ab[a];
    for (int j = 0; j < H; ++j) acc += aw[a][j] * in[j];
    out.logits.push_back(acc);
  }
  out.value = vb[0];
  for (int j = 0; j < H; ++j) out.value += vw[0][j] * in[j];
  out.hidden = h;
  CHECK(o == p.size());
  return out;
}

}  // namespace

TEST_CASE("fuse: examples") {
  EgoPatch patch{};
  const GoalVec g{0, 0, 0};
  PlanFeature plan{};
  const auto zero = fuse(patch, g, plan, std::nullopt);
  CHECK(zero.fused.size() == 138);
  for (double v : zero.fused) CHECK(v == 0.0);

  plan[static_cast<int>(PlanToken::Explore)] = 1.0;
  const auto ex = fuse(patch, g, plan, std::nullopt);
  for (int i = 0; i < kFusedWidth; ++i) {
    CHECK(ex.fused[i] == (i == 121 + 3 + static_cast<int>(PlanToken::Explore) ? 1.0 : 0.0));
  }

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    for (auto& v : patch) v = rng() % 2;
    const GoalVec gv{0.1 * t, 0.2, 0.3};
    const auto f = fuse(patch, gv, plan, static_cast<Action>(t % 4));
    CHECK(f.fused.size() == 138);
    CHECK(f.ego_patch().size() == 121);
    CHECK(f.goal_vec()[0] == gv[0]);
    CHECK(f.prev_action()[t % 4] == 1.0);
    for (int i = 0; i < 121; ++i) CHECK(f.ego_patch()[i] == patch[i]);
  }
}

TEST_CASE("fuse: shape mismatch") {
  std::vector<double> p(120), g(3), pl(10), a(4);
  try {
    fuse(p, g, pl, a);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  p.resize(121);
  CHECK_NOTHROW(fuse(p, g, pl, a));
}

TEST_CASE("goal_vector: straight ahead and clipping") {
  const auto g = goal_vector({0, 0, 0}, {3, 0}, 3.0);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.0));
  CHECK(g[2] == doctest::Approx(0.3));
  CHECK(goal_vector({0, 0, 90}, {3, 0}, 30.0)[2] == 1.0);
  CHECK(goal_vector({0, 0, 90}, {3, 0}, 3.0)[0] == doctest::Approx(-1.0));
  CHECK(goal_vector({0, 0, 0}, {3, 0}, kUnreachable)[2] == 1.0);
}

TEST_CASE("PolicyNet: default shape and parameter count") {
  const NetShape s;
  CHECK(s.input == 138);
  CHECK(s.embed == 64);
  CHECK(s.hidden == 128);
  CHECK(s.layers == 2);
  const std::size_t enc = 64 * 138 + 64;
  const std::size_t l0 = 3 * 128 * 64 + 3 * 128 * 128 + 2 * 3 * 128;
  const std::size_t l1 = 3 * 128 * 128 + 3 * 128 * 128 + 2 * 3 * 128;
  CHECK(PolicyNet::param_count(s) == enc + l0 + l1 + 4 * 128 + 4 + 128 + 1);
  CHECK(PolicyNet::param_count(gradcheck::small_shape()) == 200);
}

TEST_CASE("policy_step: zero parameters give uniform distribution and zero value") {
  PolicyNet net;
  std::mt19937_64 rng(1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(138, 3);
  const auto out = policy_step(net, x, zero_hidden(net.shape(), 3));
  for (int j = 0; j < 3; ++j) {
    for (int a = 0; a < 4; ++a) CHECK(out.probs(a, j) == 0.25);
    CHECK(out.values(j) == 0.0);
  }
}

TEST_CASE("policy_step: matches the loop reference and is deterministic") {
  PolicyNet net = gradcheck::fixed_net(5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(11);
    for (auto& v : x) v = u(rng);
    std::vector<std::vector<double>> h(2, std::vector<double>(3));
    for (auto& l : h) {
      for (auto& v : l) v = u(rng);
    }
    Eigen::MatrixXd xm = Eigen::Map<Eigen::VectorXd>(x.data(), 11);
    Hidden hm(2);
    for (int l = 0; l < 2; ++l) hm[l] = Eigen::Map<Eigen::VectorXd>(h[l].data(), 3);

    const auto got = policy_step(net, xm, hm);
    const auto again = policy_step(net, xm, hm);
    const auto ref = reference_step(net, x, h);
    double z = 0;
    for (double v : ref.logits) z += std::exp(v);
    for (int a = 0; a < 4; ++a) {
      CHECK(got.logits(a, 0) == doctest::Approx(ref.logits[a]).epsilon(1e-12));
      CHECK(got.probs(a, 0) == doctest::Approx(std::exp(ref.logits[a]) / z).epsilon(1e-12));
      CHECK(got.probs(a, 0) == again.probs(a, 0));
    }
    CHECK(got.values(0) == doctest::Approx(ref.value).epsilon(1e-12));
    for (int l = 0; l < 2; ++l) {
      for (int i = 0; i < 3; ++i) {
        CHECK(got.hidden[l](i, 0) == doctest::Approx(ref.hidden[l][i]).epsilon(1e-12));
        CHECK(got.hidden[l](i, 0) == again.hidden[l](i, 0));
      }
    }
  }
}

TEST_CASE("policy_step: fuzzed inputs give valid distributions and bounded hidden state") {
  PolicyNet net;
  net.init(3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  Hidden h = zero_hidden(net.shape(), 4);
  for (int t = 0; t < 200; ++t) {
    Eigen::MatrixXd x(138, 4);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = i % 138 < 121 ? static_cast<double>(rng() % 2) : u(rng);
    const auto out = policy_step(net, x, h);
    h = out.hidden;
    for (int j = 0; j < 4; ++j) {
      REQUIRE(out.probs.col(j).sum() == doctest::Approx(1.0).epsilon(1e-9));
      REQUIRE(out.probs.col(j).minCoeff() >= 0.0);
      REQUIRE(std::isfinite(out.values(j)));
      std::array<double, 4> p{};
      for (int a = 0; a < 4; ++a) p[a] = out.probs(a, j);
      REQUIRE(entropy(p) <= std::log(4.0) + 1e-12);
    }
    for (const auto& layer : h) REQUIRE(layer.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("policy_step: shape and finiteness errors") {
  PolicyNet net;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(137, 1);
  CHECK_THROWS_AS(policy_step(net, x, zero_hidden(net.shape(), 1)), Error);
  x = Eigen::MatrixXd::Zero(138, 1);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  net.init(1);
  try {
    policy_step(net, x, zero_hidden(net.shape(), 1));
    FAIL("expected NonFiniteActivation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteActivation);
  }
}

TEST_CASE("entropy") {
  const std::array<double, 4> u{0.25, 0.25, 0.25, 0.25};
  CHECK(entropy(u) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  const std::array<double, 4> d{1, 0, 0, 0};
  CHECK(entropy(d) == 0.0);
}

TEST_CASE("gae_advantages: examples") {
  const std::vector<double> zeros(5, 0.0);
  const std::vector<std::uint8_t> nd(5, 0);
  const auto a0 = gae_advantages(zeros, zeros, nd, 0.99, 0.95);
  for (double a : a0.advantages) CHECK(a == 0.0);

  const std::vector<double> r1{1.0}, v1{0.0};
  const std::vector<std::uint8_t> d1{1};
  const auto a1 = gae_advantages(r1, v1, d1, 0.99, 0.95, 123.0);
  CHECK(a1.advantages[0] == 1.0);
  CHECK(a1.returns[0] == 1.0);

  const std::vector<double> r{1, -2, 0.5, 3}, v{0.3, 0.1, -0.4, 2};
  const std::vector<std::uint8_t> d{0, 0, 1, 0};
  const auto a2 = gae_advantages(r, v, d, 0.0, 0.95, 9.0);
  for (int t = 0; t < 4; ++t) {
    CHECK(a2.advantages[t] == doctest::Approx(r[t] - v[t]));
    CHECK(a2.returns[t] == doctest::Approx(a2.advantages[t] + v[t]));
  }
}

TEST_CASE("gae_advantages: matches a forward-sum oracle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int T = 1 + static_cast<int>(rng() % 30);
    std::vector<double> r(T), v(T);
    std::vector<std::uint8_t> d(T);
    for (int t = 0; t < T; ++t) {
      r[t] = u(rng);
      v[t] = u(rng);
      d[t] = rng() % 6 == 0;
    }
    const double last = u(rng), g = 0.97, lam = 0.9;
    const auto got = gae_advantages(r, v, d, g, lam, last);
    for (int t = 0; t < T; ++t) {
      // A_t = sum_l (g lam)^l delta_{t+l}, truncated at the first episode end.
      double acc = 0, w = 1;
      for (int s = t; s < T; ++s) {
        const double next_v = d[s] ? 0.0 : (s + 1 < T ? v[s + 1] : last);
        acc += w * (r[s] + g * next_v - v[s]);
        if (d[s]) break;
        w *= g * lam;
      }
      REQUIRE(got.advantages[t] == doctest::Approx(acc).epsilon(1e-12));
      REQUIRE(got.returns[t] == doctest::Approx(acc + v[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("ppo_loss: analytic gradient matches central finite differences") {
  PolicyNet net = gradcheck::fixed_net();
  REQUIRE(net.param_count() == 200);
  const auto batch = gradcheck::random_batch(net, 6, 3, 99);
  PpoCoefficients coefs;
  const auto stats = ppo_loss(net, batch, coefs, nullptr);
  CHECK(stats.clip_fraction > 0.0);
  CHECK(stats.clip_fraction < 1.0);
  const auto r = gradcheck::check(net, batch, coefs);
  CHECK(r.params == 200);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("ppo_loss: zero advantages leave only value and entropy gradients") {
  PolicyNet net = gradcheck::fixed_net(3);
  auto batch = gradcheck::random_batch(net, 4, 2, 5);
  batch.advantages.setZero();
  PpoCoefficients coefs;
  coefs.value_coef = 0.0;
  coefs.entropy_coef = 0.0;
  std::vector<double> g;
  const auto stats = ppo_loss(net, batch, coefs, &g);
  CHECK(stats.policy_loss == 0.0);
  for (double x : g) CHECK(x == 0.0);

  coefs.value_coef = 0.5;
  ppo_loss(net, batch, coefs, &g);
  CHECK(global_norm(g) > 0.0);
}

TEST_CASE("ppo_loss: at ratio 1 the surrogate gradient is the advantage-weighted log-prob gradient") {
  PolicyNet net = gradcheck::fixed_net(8);
  auto batch = gradcheck::random_batch(net, 5, 3, 17);
  // Old log-probs from the current parameters make every ratio exactly 1.
  auto log_probs = [&](const PolicyNet& n) {
    Eigen::MatrixXd lp(batch.steps, batch.batch);
    Hidden h = batch.initial_hidden;
    for (int t = 0; t < batch.steps; ++t) {
      for (auto& layer : h) layer = layer.array().rowwise() * batch.keep_hidden[t].array();
      const auto out = policy_step(n, batch.inputs[t], h);
      h = out.hidden;
      for (int j = 0; j < batch.batch; ++j) lp(t, j) = std::log(out.probs(batch.actions[t][j], j));
    }
    return lp;
  };
  batch.old_log_probs = log_probs(net);
  PpoCoefficients coefs;
  coefs.value_coef = 0.0;
  coefs.entropy_coef = 0.0;
  std::vector<double> g;
  const auto stats = ppo_loss(net, batch, coefs, &g);
  const double n = batch.steps * batch.batch;
  CHECK(stats.policy_loss == doctest::Approx(-batch.advantages.sum() / n).epsilon(1e-12));
  CHECK(stats.clip_fraction == 0.0);

  // Oracle: d/dθ of -(1/N) Σ A log π_θ(a), by central differences.
  auto& p = net.params();
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); i += 7) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = -(batch.advantages.array() * log_probs(net).array()).sum() / n;
    p[i] = keep - h;
    const double down = -(batch.advantages.array() * log_probs(net).array()).sum() / n;
    p[i] = keep;
    CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("Adam: first step moves each parameter by about the learning rate") {
  Adam opt(3, 0.1);
  std::vector<double> p{1.0, 1.0, 1.0};
  const std::vector<double> g{2.0, -0.5, 0.0};
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-5)));
  CHECK(p[1] == doctest::Approx(1.0 + 0.1 * 0.5 / (0.5 + 1e-5)));
  CHECK(p[2] == 1.0);
  CHECK(opt.t == 1);
  CHECK(global_norm({3.0, 4.0}) == 5.0);
  std::vector<double> wrong(2);
  CHECK_THROWS_AS(opt.step(wrong, g), Error);
}
