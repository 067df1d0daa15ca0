#include "doctest.h"

#include "imt/math/grad_check.hpp"
#include "imt/math/ops.hpp"
#include "imt/math/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace imt;

namespace {

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("softmax examples") {
  Vec p = softmax(Vec::Zero(3));
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Vec two(2);
  two << 1.0, 2.0;
  p = softmax(two);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.26894).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.73106).epsilon(1e-5));

  Vec big(2);
  big << 1000.0, 0.0;
  p = softmax(big);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(p[1]));

  CHECK_THROWS_AS(softmax(Vec()), std::invalid_argument);
}

TEST_CASE("softmax sums to one and is permutation-equivariant") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 12);
    Vec x = random_vec(rng, n, 20.0);
    Vec p = softmax(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK((p.array() > 0.0).all());

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vec xp(n);
    for (Eigen::Index i = 0; i < n; ++i) xp[i] = x[perm[static_cast<std::size_t>(i)]];
    Vec pp = softmax(xp);
    for (Eigen::Index i = 0; i < n; ++i) CHECK(pp[i] == doctest::Approx(p[perm[static_cast<std::size_t>(i)]]).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid examples and symmetry") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == doctest::Approx(0.73106).epsilon(1e-5));
  CHECK(sigmoid(800.0) == doctest::Approx(1.0));
  CHECK(std::isfinite(sigmoid(-800.0)));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30, 30);
  double prev_x = -31, prev_y = 0.0;
  std::vector<double> xs(100);
  for (auto& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    CHECK(sigmoid(-x) == doctest::Approx(1.0 - sigmoid(x)).epsilon(1e-12));
    CHECK(sigmoid(x) >= prev_y);
    prev_y = sigmoid(x);
    prev_x = x;
  }
  (void)prev_x;
}

namespace {

struct GruFixture {
  ParamStore store;
  std::size_t W, U, b, h, x, probe;

  GruFixture(std::size_t in, std::size_t hid) {
    W = store.add("W", {3 * hid, in});
    U = store.add("U", {3 * hid, hid});
    b = store.add("b", {3 * hid});
    h = store.add("h_prev", {hid});
    x = store.add("x", {in});
    probe = store.add("probe", {hid});
  }

  GruWeights weights() const {
    return {store.at(W).value.mat(), store.at(U).value.mat(), store.at(b).value.vec()};
  }

  double loss() const {
    const Vec out = gru_forward(weights(), store.at(h).value.vec(), store.at(x).value.vec());
    return out.dot(store.at(probe).value.vec());
  }

  double loss_and_grad() {
    GruCache cache;
    const Vec out = gru_forward(weights(), store.at(h).value.vec(), store.at(x).value.vec(), &cache);
    GruGrads g{store.at(W).grad.mat(), store.at(U).grad.mat(), store.at(b).grad.vec()};
    Vec dh_prev, dx;
    const Vec probe_v = store.at(probe).value.vec();
    gru_backward(weights(), cache, probe_v, g, dh_prev, dx);
    store.at(h).grad.vec() += dh_prev;
    store.at(x).grad.vec() += dx;
    store.at(probe).grad.vec() += out;
    return out.dot(probe_v);
  }
};

}  // namespace

TEST_CASE("gru_step hand-evaluated cases") {
  GruFixture f(3, 2);
  f.store.at(f.h).value[0] = 1.0;
  Vec out = gru_forward(f.weights(), f.store.at(f.h).value.vec(), f.store.at(f.x).value.vec());
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(0.0));

  f.store.at(f.h).value.fill(0.0);
  out = gru_forward(f.weights(), f.store.at(f.h).value.vec(), f.store.at(f.x).value.vec());
  CHECK(out.isZero());

  CHECK_THROWS(gru_forward(f.weights(), Vec::Zero(3), Vec::Zero(3)));
}

TEST_CASE("gru_step analytic gradient matches finite differences over random draws") {
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    GruFixture f(4, 3);
    f.store.init_uniform(1.0, 1000 + static_cast<std::uint64_t>(draw));
    const auto report = grad_check(
        f.store, [&] { return f.loss_and_grad(); }, [&] { return f.loss(); });
    worst = std::max(worst, report.max_relative_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient is a no-op at every step count") {
    ParamStore store;
    store.add("w", {4});
    store.init_uniform(1.0, 5);
    const ParamStore before = store;
    for (int i = 0; i < 25; ++i) {
      adam_step(store, 0.1);
      CHECK(store.same_values(before));
    }
    CHECK(store.step() == 25);
  }
  SUBCASE("first step moves by the learning rate against the gradient") {
    ParamStore store;
    store.add("w", {1});
    store.at(0).grad[0] = 1.0;
    adam_step(store, 0.01);
    // m_hat = 1, v_hat = 1 -> -lr * 1 / (1 + eps)
    CHECK(store.at(0).value[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(store.at(0).grad[0] == 0.0);
  }
  SUBCASE("restricted update leaves other parameters untouched") {
    ParamStore store;
    store.add("a", {1});
    store.add("b", {1});
    store.at(0).grad[0] = 1.0;
    store.at(1).grad[0] = 1.0;
    const std::vector<std::string> only = {"b"};
    adam_step(store, 0.5, {}, &only);
    CHECK(store.at(0).value[0] == 0.0);
    CHECK(store.at(1).value[0] < 0.0);
    CHECK(store.at(0).grad[0] == 0.0);
  }
}

TEST_CASE("grad_check closed forms") {
  ParamStore store;
  store.add("w", {1});
  store.at(0).value[0] = 3.0;
  auto f = [&] { return store.at(0).value[0] * store.at(0).value[0]; };
  auto fg = [&] {
    store.at(0).grad[0] += 2.0 * store.at(0).value[0];
    return f();
  };
  auto report = grad_check(store, fg, f);
  CHECK(report.per_parameter.at(0).analytic_at_worst == doctest::Approx(6.0));
  CHECK(report.per_parameter.at(0).numeric_at_worst == doctest::Approx(6.0).epsilon(1e-6));

  auto constant = [] { return 4.0; };
  report = grad_check(store, constant, constant);
  CHECK(report.max_relative_error == 0.0);
  CHECK(report.per_parameter.at(0).numeric_at_worst == 0.0);

  auto nan_loss = [] { return std::nan(""); };
  CHECK_THROWS(grad_check(store, nan_loss, nan_loss));
}

TEST_CASE("grad_check norm error weighs coordinates by gradient size") {
  // f = 100 x + y with the analytic gradient of y off by 1e-6.
  ParamStore store;
  store.add("w", {2});
  auto f = [&] { return 100.0 * store.at(0).value[0] + store.at(0).value[1]; };
  auto fg = [&] {
    store.at(0).grad[0] += 100.0;
    store.at(0).grad[1] += 1.0 + 1e-6;
    return f();
  };
  const auto e = grad_check(store, fg, f).per_parameter.at(0);
  const double numeric_y = (1.0 + 1e-5 - (-1e-5)) / 2e-5;  // what the step actually resolves
  CHECK(e.max_relative_error == doctest::Approx(5e-7).epsilon(1e-3));
  CHECK(e.max_abs_error == doctest::Approx(1e-6).epsilon(1e-3));
  CHECK(e.norm_relative_error == doctest::Approx(1e-6 / (2 * std::sqrt(100.0 * 100.0 + numeric_y * numeric_y)))
                                     .epsilon(1e-3));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  ParamStore store;
  store.add("emb", {3, 4});
  store.add("bias", {5});
  store.init_uniform(0.08, 11);
  store.at(0).grad.fill(0.25);
  adam_step(store, 1e-3);
  const auto path = std::filesystem::temp_directory_path() / "imt_math_test.ckpt";
  save_checkpoint(path, store, R"({"hello":1})");
  std::string meta;
  const ParamStore loaded = load_checkpoint(path, &meta);
  CHECK(meta == R"({"hello":1})");
  CHECK(loaded.step() == store.step());
  REQUIRE(loaded.size() == store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    CHECK(loaded.at(i).name == store.at(i).name);
    CHECK(loaded.at(i).value == store.at(i).value);
    CHECK(loaded.at(i).m == store.at(i).m);
    CHECK(loaded.at(i).v == store.at(i).v);
  }
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
