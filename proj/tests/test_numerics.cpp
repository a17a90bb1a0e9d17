#include <cmath>

#include "bda/autograd.hpp"
#include "bda/errors.hpp"
#include "bda/gradcheck.hpp"
#include "bda/ops.hpp"
#include "bda/optim.hpp"
#include "bda/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bda;
using namespace bda::ops;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Var leaf(bda::Shape s, Rng& rng) { return Var::leaf(oracle::random_tensor(std::move(s), rng)); }

}  // namespace

TEST_CASE("rng streams are reproducible and forks are independent of position") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const auto f1 = c.fork(7).next_u64();
  c.next_u64();
  CHECK(c.fork(7).next_u64() == f1);
  CHECK(Rng(42).fork(8).next_u64() != f1);
  // mt19937_64's 10000th output is fixed by the standard.
  Rng d(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = d.next_u64();
  CHECK(v == 9981545732273789042ULL);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) < 7);
  }
}

TEST_CASE("tensor shape contract") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ContractError);
  Tensor t({2, 3, 4, 5}, 1.0);
  CHECK(t.numel() == 120);
  t.at(1, 2, 3, 4) = 7.0;
  CHECK(t[119] == 7.0);
  CHECK(t.all_finite());
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("conv2d: 1x1 identity weight returns the input") {
  Rng rng(1);
  const Tensor x = oracle::random_tensor({2, 3, 5, 4}, rng);
  Tensor w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  const Var y = conv2d(Var::constant(x), Var::constant(w), Var::constant(Tensor({3})));
  CHECK(y.value() == x);
}

TEST_CASE("conv2d matches direct convolution") {
  Rng rng(2);
  SUBCASE("3x3 on 1x2x5x5") {
    const Tensor x = oracle::random_tensor({1, 2, 5, 5}, rng);
    const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    const Var y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b));
    CHECK(max_abs_diff(y.value(), oracle::direct_conv(x, w, b, 1)) < 1e-12);
  }
  SUBCASE("C in {1,2,4} on 7x7, both kernels and strides") {
    for (std::size_t c : {1, 2, 4}) {
      for (std::size_t k : {1, 3}) {
        for (int stride : {1, 2}) {
          const Tensor x = oracle::random_tensor({1, c, 7, 7}, rng);
          const Tensor w = oracle::random_tensor({3, c, k, k}, rng);
          const Tensor b = oracle::random_tensor({3}, rng);
          const Var y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b), stride);
          CHECK(max_abs_diff(y.value(), oracle::direct_conv(x, w, b, stride)) < 1e-12);
        }
      }
    }
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(conv2d(Var::constant(Tensor({1, 2, 4, 4})), Var::constant(Tensor({1, 3, 3, 3})),
                           Var()),
                    ContractError);
  }
}

TEST_CASE("conv2d gradients") {
  Rng rng(3);
  const Var x = leaf({1, 2, 5, 5}, rng), w = leaf({3, 2, 3, 3}, rng), b = leaf({3}, rng);
  for (int stride : {1, 2}) {
    const auto r = grad_check([&] { return sum(conv2d(x, w, b, stride)); }, {x, w, b});
    CHECK(r.max_relative_error < 1e-6);
    const Var t = Var::constant(oracle::random_tensor({1, 3, stride == 1 ? 5u : 3u, stride == 1 ? 5u : 3u}, rng));
    const auto r2 = grad_check([&] { return sum(mul(conv2d(x, w, b, stride), t)); }, {x, w, b});
    CHECK(r2.max_relative_error < 1e-6);
  }
}

TEST_CASE("group_norm") {
  Rng rng(4);
  const Var gamma = Var::leaf(Tensor({4}, 1.0)), beta = Var::leaf(Tensor({4}, 0.0));
  SUBCASE("constant input gives zeros") {
    const Var y = group_norm(Var::constant(Tensor({2, 4, 3, 3}, 3.5)), 2, gamma, beta);
    for (double v : y.value().vec()) CHECK(v == 0.0);
  }
  SUBCASE("groups == channels is instance normalization") {
    const Tensor x = oracle::random_tensor({2, 4, 5, 3}, rng);
    const Var y = group_norm(Var::constant(x), 4, gamma, beta, 1e-5);
    CHECK(max_abs_diff(y.value(), oracle::instance_norm(x, 1e-5)) < 1e-12);
  }
  SUBCASE("per-group moments") {
    const Tensor x = oracle::random_tensor({2, 4, 6, 6}, rng, -3.0, 5.0);
    const Var y = group_norm(Var::constant(x), 2, gamma, beta, 1e-12);
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t g = 0; g < 2; ++g) {
        double mu = 0.0, sq = 0.0;
        for (std::size_t c = 2 * g; c < 2 * g + 2; ++c)
          for (std::size_t i = 0; i < 36; ++i) {
            const double v = y.value()[(n * 4 + c) * 36 + i];
            mu += v;
            sq += v * v;
          }
        mu /= 72.0;
        CHECK(std::abs(mu) < 1e-10);
        CHECK(std::abs(sq / 72.0 - mu * mu - 1.0) < 1e-6);
      }
    }
  }
  SUBCASE("affine applied after normalization") {
    const Tensor x = oracle::random_tensor({1, 4, 3, 3}, rng);
    const Var g2 = Var::constant(Tensor({4}, {2.0, 2.0, 2.0, 2.0}));
    const Var b2 = Var::constant(Tensor({4}, {1.0, 1.0, 1.0, 1.0}));
    const Tensor ref = oracle::instance_norm(x, 1e-5);
    const Var y = group_norm(Var::constant(x), 4, g2, b2);
    for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(std::abs(y.value()[i] - (2 * ref[i] + 1)) < 1e-12);
  }
  SUBCASE("indivisible groups") {
    CHECK_THROWS_AS(group_norm(Var::constant(Tensor({1, 4, 2, 2})), 3, gamma, beta), ConfigError);
  }
  SUBCASE("gradients") {
    const Var x = leaf({2, 4, 3, 3}, rng);
    const Var gm = leaf({4}, rng), bt = leaf({4}, rng);
    const Var t = Var::constant(oracle::random_tensor({2, 4, 3, 3}, rng));
    const auto r = grad_check([&] { return sum(mul(group_norm(x, 2, gm, bt), t)); }, {x, gm, bt});
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("activations") {
  const Var r = relu(Var::constant(Tensor({2}, {-3.0, 2.0})));
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 2.0);
  CHECK(sigmoid(Var::constant(Tensor::scalar(0.0))).value().item() == 0.5);
  const Var s = softmax_channels(Var::constant(Tensor({1, 4, 1, 1}, 0.0)));
  for (double v : s.value().vec()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  Rng rng(5);
  const Tensor x = oracle::random_tensor({3, 5, 4, 4}, rng, -30.0, 30.0);
  const Var sm = softmax_channels(Var::constant(x));
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t p = 0; p < 16; ++p) {
      double tot = 0.0;
      for (std::size_t c = 0; c < 5; ++c) tot += sm.value()[(n * 5 + c) * 16 + p];
      CHECK(std::abs(tot - 1.0) < 1e-12);
    }
  const Var sg = sigmoid(Var::constant(oracle::random_tensor({100}, rng, -20.0, 20.0)));
  for (double v : sg.value().vec()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  const Var a = leaf({2, 3, 2, 2}, rng);
  const Var t = Var::constant(oracle::random_tensor({2, 3, 2, 2}, rng));
  CHECK(grad_check([&] { return sum(mul(softmax_channels(a), t)); }, {a}).max_relative_error < 1e-6);
  CHECK(grad_check([&] { return sum(mul(sigmoid(a), t)); }, {a}).max_relative_error < 1e-6);
  CHECK(grad_check([&] { return sum(mul(relu(a), t)); }, {a}).max_relative_error < 1e-6);
}

TEST_CASE("upsample_bilinear") {
  Rng rng(6);
  const Tensor x = oracle::random_tensor({2, 3, 4, 5}, rng);
  CHECK(upsample_bilinear(Var::constant(x), 4, 5).value() == x);
  const Var c = upsample_bilinear(Var::constant(Tensor({1, 1, 1, 1}, 0.7)), 4, 4);
  for (double v : c.value().vec()) CHECK(v == 0.7);
  const Tensor s = oracle::random_tensor({1, 2, 2, 2}, rng);
  CHECK(max_abs_diff(upsample_bilinear(Var::constant(s), 4, 4).value(), oracle::upsample(s, 4, 4)) <
        1e-12);
  CHECK(max_abs_diff(upsample_bilinear(Var::constant(x), 7, 13).value(), oracle::upsample(x, 7, 13)) <
        1e-12);
  const Var a = leaf({1, 2, 3, 3}, rng);
  const Var t = Var::constant(oracle::random_tensor({1, 2, 6, 5}, rng));
  CHECK(grad_check([&] { return sum(mul(upsample_bilinear(a, 6, 5), t)); }, {a}).max_relative_error <
        1e-6);
}

TEST_CASE("bilinear_sample") {
  Rng rng(7);
  const std::size_t h = 4, w = 5;
  Tensor gx({1, 1, h, w}), gy({1, 1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      gx.at(0, 0, y, x) = static_cast<double>(x);
      gy.at(0, 0, y, x) = static_cast<double>(y);
    }
  SUBCASE("identity grid") {
    const Tensor f = oracle::random_tensor({1, 3, h, w}, rng);
    CHECK(bilinear_sample(Var::constant(f), Var::constant(gx), Var::constant(gy)).value() == f);
  }
  SUBCASE("integer shift on a ramp clamps the last column") {
    Tensor ramp({1, 1, h, w});
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) ramp.at(0, 0, y, x) = 10.0 * y + x;
    Tensor sx = gx;
    for (auto& v : sx.data()) v += 1.0;
    const Tensor out = bilinear_sample(Var::constant(ramp), Var::constant(sx), Var::constant(gy)).value();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        CHECK(out.at(0, 0, y, x) == ramp.at(0, 0, y, std::min(x + 1, w - 1)));
  }
  SUBCASE("matches the interpolation oracle at arbitrary points") {
    const Tensor f = oracle::random_tensor({2, 2, h, w}, rng);
    const Tensor xs = oracle::random_tensor({2, 1, 3, 3}, rng, -1.0, 5.5);
    const Tensor ys = oracle::random_tensor({2, 1, 3, 3}, rng, -1.0, 4.5);
    const Tensor out = bilinear_sample(Var::constant(f), Var::constant(xs), Var::constant(ys)).value();
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 3; ++y)
          for (std::size_t x = 0; x < 3; ++x)
            CHECK(std::abs(out.at(n, c, y, x) -
                           oracle::bilinear_read(f, n, c, ys.at(n, 0, y, x), xs.at(n, 0, y, x))) < 1e-12);
  }
  SUBCASE("gradients at interior non-integer points") {
    const Var f = leaf({1, 2, h, w}, rng);
    const Var xs = Var::leaf(oracle::random_tensor({1, 1, 3, 3}, rng, 0.2, 3.8));
    const Var ys = Var::leaf(oracle::random_tensor({1, 1, 3, 3}, rng, 0.2, 2.8));
    const Var t = Var::constant(oracle::random_tensor({1, 2, 3, 3}, rng));
    const auto r = grad_check([&] { return sum(mul(bilinear_sample(f, xs, ys), t)); }, {f, xs, ys});
    CHECK(r.max_relative_error < 1e-5);
  }
}

TEST_CASE("elementwise ops and reductions have exact gradients") {
  Rng rng(8);
  const Var a = leaf({2, 3, 2, 2}, rng), b = leaf({2, 3, 2, 2}, rng), m = leaf({2, 1, 2, 2}, rng);
  const auto r = grad_check(
      [&] {
        const Var c = concat_channels({add(a, b), mul_channel_broadcast(sub(a, b), m)});
        return mean(mul(affine(slice_channels(c, 1, 5), 2.0, 0.5), slice_channels(c, 2, 6)));
      },
      {a, b, m});
  CHECK(r.max_relative_error < 1e-6);
  CHECK(r.entries_checked == a.value().numel() + b.value().numel() + m.value().numel());
}

TEST_CASE("argmax_channels picks the first maximum") {
  Tensor x({1, 3, 1, 2}, {1.0, 2.0, 5.0, 2.0, 5.0, 0.0});
  const auto idx = argmax_channels(x);
  CHECK(idx == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("backward rejects non-finite values") {
  const Var a = Var::leaf(Tensor({2}, {1.0, 0.0}));
  Var l = sum(mul(a, Var::constant(Tensor({2}, {std::numeric_limits<double>::infinity(), 1.0}))));
  CHECK_THROWS_AS(l.backward(), NumericError);
}

TEST_CASE("adamw_step") {
  SUBCASE("zero gradient only decays") {
    Parameter p("p", Tensor::scalar(1.0));
    p.var().grad_buffer();
    Parameter* ps[] = {&p};
    adamw_step(ps, AdamWConfig{});
    CHECK(p.value().item() == doctest::Approx(0.9999995).epsilon(1e-15));
    CHECK(std::abs(p.value().item() - 0.9999995) < 1e-15);
  }
  SUBCASE("one step matches the hand-executed update") {
    Parameter p("p", Tensor::scalar(1.0));
    p.var().grad_buffer()[0] = 1.0;
    Parameter* ps[] = {&p};
    AdamWConfig cfg;
    adamw_step(ps, cfg);
    const double m = 0.1 * 1.0, v = 0.001 * 1.0;
    const double mh = m / (1 - 0.9), vh = v / (1 - 0.999);
    const double expected = 1.0 - cfg.lr * mh / (std::sqrt(vh) + cfg.eps) - cfg.lr * cfg.weight_decay * 1.0;
    CHECK(std::abs(p.value().item() - expected) < 1e-15);
    CHECK(p.step() == 1);
  }
  SUBCASE("descends on a quadratic") {
    Parameter p("p", Tensor::scalar(1.0));
    Parameter* ps[] = {&p};
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.lr = 0.1;
    double prev = 1.0;
    for (int i = 0; i < 2; ++i) {
      Var f = mul(p.var(), p.var());
      f.backward();
      adamw_step(ps, cfg);
      zero_grad(ps);
      const double now = p.value().item() * p.value().item();
      CHECK(now < prev);
      prev = now;
    }
  }
  SUBCASE("missing gradient") {
    Parameter p("p", Tensor::scalar(1.0));
    Parameter* ps[] = {&p};
    CHECK_THROWS_AS(adamw_step(ps, AdamWConfig{}), ContractError);
  }
}

TEST_CASE("grad_check") {
  Rng rng(9);
  const Var a = leaf({3, 4}, rng);
  CHECK(grad_check([&] { return sum(mul(a, a)); }, {a}).max_relative_error < 1e-9);

  // Two-layer conv net under the focal-style objective on fixed input.
  const Var x = Var::constant(oracle::random_tensor({1, 2, 6, 6}, rng));
  const Var w1 = leaf({4, 2, 3, 3}, rng), b1 = leaf({4}, rng);
  const Var w2 = leaf({4, 4, 1, 1}, rng), b2 = leaf({4}, rng);
  const Var y = Var::constant(oracle::random_tensor({1, 4, 6, 6}, rng, 0.0, 1.0));
  const auto r = grad_check(
      [&] {
        const Var p = softmax_channels(conv2d(relu(conv2d(x, w1, b1)), w2, b2));
        return mean(mul(y, sub(Var::constant(Tensor({1, 4, 6, 6}, 1.0)), p)));
      },
      {w1, b1, w2, b2});
  CHECK(r.max_relative_error < 1e-4);

  const Var bad = Var::leaf(Tensor::scalar(0.0));
  CHECK_THROWS_AS(grad_check(
                      [&] {
                        return mul(bad, Var::constant(Tensor::scalar(std::numeric_limits<double>::quiet_NaN())));
                      },
                      {bad}),
                  NumericError);
}
