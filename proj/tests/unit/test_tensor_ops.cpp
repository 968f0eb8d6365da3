#include <cmath>
#include <random>

#include "crossgen/tensor/ops.hpp"
#include "crossgen/util/errors.hpp"
#include "doctest.h"

using namespace crossgen::tensor;
using crossgen::DimensionError;

namespace {

Tensor64 random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor64 t(std::move(shape));
  for (auto& v : t.data()) v = dist(gen);
  return t;
}

// Direct convolution, no im2col.
Tensor64 direct_conv(const Tensor64& x, const Tensor64& w, std::size_t stride, std::size_t pad) {
  const std::size_t c_in = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t c_out = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor64 out({c_out, oh, ow});
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
              const long y = long(i * stride + a) - long(pad), xx = long(j * stride + b) - long(pad);
              if (y < 0 || xx < 0 || y >= long(h) || xx >= long(wd)) continue;
              acc += x[(c * h + y) * wd + xx] * w[((o * c_in + c) * k + a) * k + b];
            }
        out[(o * oh + i) * ow + j] = acc;
      }
  return out;
}

double inner(const Tensor64& a, const Tensor64& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Var constant(Shape shape, float fill = 0.0f) { return Var::constant(Tensor(std::move(shape), fill)); }

}  // namespace

TEST_CASE("conv2d: strided 4x4 halves 48x48 into 64x24x24") {
  auto x = constant({1, 48, 48}, 0.5f);
  auto w = constant({64, 1, 4, 4}, 0.1f);
  auto y = conv2d(x, w, Var{}, {2, 1});
  CHECK(y.shape() == Shape{64, 24, 24});
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  std::mt19937_64 gen(5);
  auto xv = random_tensor({1, 6, 7}, gen).cast<float>();
  auto y = conv2d(Var::constant(xv), constant({1, 1, 1, 1}, 1.0f), Var{}, {1, 0});
  CHECK(y.value() == xv);
}

TEST_CASE("conv2d matches direct convolution on random 1x5x5 input") {
  std::mt19937_64 gen(42);
  auto x = random_tensor({1, 5, 5}, gen);
  auto w = random_tensor({2, 1, 3, 3}, gen);
  auto y = conv2d(Var64::constant(x), Var64::constant(w), Var64{}, {1, 0});
  auto expect = direct_conv(x, w, 1, 0);
  REQUIRE(y.shape() == expect.shape());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(std::abs(y.value()[i] - expect[i]) <= 1e-6 * std::max(1.0, std::abs(expect[i])));

  // Float path through the dispatched kernels agrees as well, with stride and padding.
  auto x2 = random_tensor({3, 9, 8}, gen);
  auto w2 = random_tensor({4, 3, 4, 4}, gen);
  auto yf = conv2d(Var::constant(x2.cast<float>()), Var::constant(w2.cast<float>()), Var{}, {2, 1});
  auto e2 = direct_conv(x2, w2, 2, 1);
  REQUIRE(yf.shape() == e2.shape());
  for (std::size_t i = 0; i < e2.size(); ++i) CHECK(yf.value()[i] == doctest::Approx(e2[i]).epsilon(1e-5));
}

TEST_CASE("conv2d rejects channel mismatch and oversize kernels") {
  CHECK_THROWS_AS(conv2d(constant({2, 5, 5}), constant({1, 3, 3, 3}), Var{}, {1, 0}), DimensionError);
  CHECK_THROWS_AS(conv2d(constant({1, 2, 2}), constant({1, 1, 5, 5}), Var{}, {1, 0}), DimensionError);
}

TEST_CASE("conv_transpose2d: decoder shape chains") {
  auto up1 = conv_transpose2d(constant({128, 7, 7}), constant({128, 64, 4, 4}), Var{}, {2, 1});
  CHECK(up1.shape() == Shape{64, 14, 14});
  auto up2 = conv_transpose2d(up1, constant({64, 1, 4, 4}), Var{}, {2, 1});
  CHECK(up2.shape() == Shape{1, 28, 28});

  auto a = conv_transpose2d(constant({64, 1, 1}), constant({64, 8, 3, 3}), Var{}, {2, 0});
  CHECK(a.shape() == Shape{8, 3, 3});
  auto b = conv_transpose2d(a, constant({8, 8, 3, 3}), Var{}, {2, 0});
  CHECK(b.shape() == Shape{8, 7, 7});
  auto c = conv_transpose2d(b, constant({8, 4, 2, 2}), Var{}, {2, 0});
  CHECK(c.shape() == Shape{4, 14, 14});
  auto d = conv_transpose2d(c, constant({4, 1, 2, 2}), Var{}, {2, 0});
  CHECK(d.shape() == Shape{1, 28, 28});
}

TEST_CASE("conv_transpose2d rejects non-positive output extent") {
  // (1-1)*1 - 2*2 + 1 < 1
  CHECK_THROWS_AS(conv_transpose2d(constant({1, 1, 1}), constant({1, 1, 1, 1}), Var{}, {1, 2}), DimensionError);
}

TEST_CASE("adjoint identity: <conv(x), y> == <x, conv_transpose(y)>") {
  std::mt19937_64 gen(9);
  struct Case {
    std::size_t c_in, c_out, h, k, stride, pad;
  };
  for (auto cs : {Case{2, 3, 6, 4, 2, 1}, Case{1, 2, 5, 3, 1, 0}, Case{3, 2, 7, 3, 2, 0}, Case{2, 2, 8, 2, 2, 0}}) {
    auto x = random_tensor({cs.c_in, cs.h, cs.h}, gen);
    auto w = random_tensor({cs.c_out, cs.c_in, cs.k, cs.k}, gen);
    auto ax = conv2d(Var64::constant(x), Var64::constant(w), Var64{}, {cs.stride, cs.pad});
    auto y = random_tensor(ax.shape(), gen);
    // conv weight [O,C,k,k] is the transposed conv weight [C_in'=O, C_out'=C, k, k].
    auto aty = conv_transpose2d(Var64::constant(y), Var64::constant(w), Var64{}, {cs.stride, cs.pad});
    REQUIRE(aty.shape() == x.shape());
    CHECK(std::abs(inner(ax.value(), y) - inner(x, aty.value())) < 1e-5);
  }
  // Float path, AIVAE first encoder layer geometry.
  auto x = random_tensor({1, 48, 48}, gen);
  auto w = random_tensor({8, 1, 4, 4}, gen);
  auto ax = conv2d(Var::constant(x.cast<float>()), Var::constant(w.cast<float>()), Var{}, {2, 1});
  auto y = random_tensor(ax.shape(), gen);
  auto aty = conv_transpose2d(Var::constant(y.cast<float>()), Var::constant(w.cast<float>()), Var{}, {2, 1});
  REQUIRE(aty.shape() == x.shape());
  const double lhs = inner(ax.value().cast<double>(), y), rhs = inner(x, aty.value().cast<double>());
  CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("dense: identity, hand sum, and matvec oracle") {
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
  Tensor input({3}, std::vector<float>{1, 2, 3});
  auto y = dense(Var::constant(input), Var::constant(eye), Var::constant(Tensor({3})));
  CHECK(y.value() == input);

  auto s = dense(Var::constant(input), constant({1, 3}, 1.0f), constant({1}, 0.0f));
  CHECK(s.value()[0] == 6.0f);

  std::mt19937_64 gen(3);
  auto x = random_tensor({8}, gen), w = random_tensor({4, 8}, gen), b = random_tensor({4}, gen);
  auto out = dense(Var64::constant(x), Var64::constant(w), Var64::constant(b));
  for (std::size_t i = 0; i < 4; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < 8; ++j) acc += w[i * 8 + j] * x[j];
    CHECK(std::abs(out.value()[i] - acc) <= 1e-6 * std::max(1.0, std::abs(acc)));
  }
  CHECK_THROWS_AS(dense(constant({5}), constant({4, 8}), Var{}), DimensionError);
}

TEST_CASE("batchnorm examples") {
  Tensor rm({1}), rv({1}, 1.0f);
  auto ones = constant({1}, 1.0f), zeros = constant({1}, 0.0f);

  SUBCASE("constant channel normalizes to zero") {
    auto y = batchnorm(constant({4, 1, 2, 2}, 3.0f), ones, zeros, rm, rv, BatchNormMode::train);
    for (float v : y.value().data()) CHECK(v == 0.0f);
  }
  SUBCASE("(-1, 1) maps to (-1, 1)/sqrt(1+eps)") {
    auto x = Var::constant(Tensor({2, 1}, std::vector<float>{-1.0f, 1.0f}));
    auto y = batchnorm(x, ones, zeros, rm, rv, BatchNormMode::train);
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y.value()[0] == doctest::Approx(-expect).epsilon(1e-7));
    CHECK(y.value()[1] == doctest::Approx(expect).epsilon(1e-7));
    // running stats: momentum 0.1 toward mean 0 and unbiased variance 2
    CHECK(rm[0] == doctest::Approx(0.0));
    CHECK(rv[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
  }
  SUBCASE("train-mode channel mean vanishes on a random batch") {
    std::mt19937_64 gen(1);
    Tensor m3({3}), v3({3}, 1.0f);
    auto x = Var::constant(random_tensor({5, 3, 4, 4}, gen, -3, 7).cast<float>());
    auto y = batchnorm(x, constant({3}, 1.0f), constant({3}, 0.0f), m3, v3, BatchNormMode::train);
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t i = 0; i < 16; ++i) s += y.value()[(b * 3 + c) * 16 + i];
      CHECK(std::abs(s / 80.0) < 1e-6);
    }
  }
  SUBCASE("eval mode uses running statistics") {
    Tensor m1({1}, 2.0f), v1({1}, 4.0f);
    auto y = batchnorm(constant({1, 1}, 4.0f), ones, zeros, m1, v1, BatchNormMode::eval);
    CHECK(y.value()[0] == doctest::Approx(2.0 / std::sqrt(4.0 + 1e-5)));
  }
  SUBCASE("batch of one is rejected in train mode") {
    CHECK_THROWS_AS(batchnorm(constant({1, 1, 2, 2}), ones, zeros, rm, rv, BatchNormMode::train), DimensionError);
  }
}

TEST_CASE("activation examples") {
  auto x = Var::constant(Tensor({2}, std::vector<float>{-3.0f, 3.0f}));
  auto r = relu(x);
  CHECK(r.value()[0] == 0.0f);
  CHECK(r.value()[1] == 3.0f);
  auto l = leaky_relu(Var::constant(Tensor({1}, -1.0f)), 0.2f);
  CHECK(l.value()[0] == doctest::Approx(-0.2f));
  auto s = softmax(constant({10}, 0.0f));
  for (float v : s.value().data()) CHECK(v == doctest::Approx(0.1f));
  auto sg = sigmoid(Var::constant(Tensor({3}, std::vector<float>{-100.0f, 0.0f, 100.0f})));
  CHECK(sg.value()[0] >= 0.0f);
  CHECK(sg.value()[1] == 0.5f);
  CHECK(sg.value()[2] <= 1.0f);
}

TEST_CASE("maxpool2d examples and oracle") {
  auto p = maxpool2d(Var::constant(Tensor({1, 2, 2}, std::vector<float>{1, 2, 3, 4})), 2, 2);
  CHECK(p.shape() == Shape{1, 1, 1});
  CHECK(p.value()[0] == 4.0f);

  auto c = maxpool2d(constant({2, 4, 4}, 1.5f), 2, 2);
  for (float v : c.value().data()) CHECK(v == 1.5f);

  std::mt19937_64 gen(8);
  auto x = random_tensor({1, 6, 6}, gen);
  auto y = maxpool2d(Var64::constant(x), 2, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double best = -1e300;
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) best = std::max(best, x[(2 * i + a) * 6 + 2 * j + b]);
      CHECK(y.value()[i * 3 + j] == best);
    }
  CHECK_THROWS_AS(maxpool2d(constant({1, 2, 2}), 3, 1), DimensionError);
}

TEST_CASE("maxpool2d routes ties to the first element in scan order") {
  auto x = Var::parameter(Tensor({1, 1, 2, 2}, 7.0f));
  backward(sum(maxpool2d(x, 2, 2)));
  CHECK(x.grad()[0] == 1.0f);
  CHECK(x.grad()[1] == 0.0f);
  CHECK(x.grad()[2] == 0.0f);
  CHECK(x.grad()[3] == 0.0f);
}

TEST_CASE("backward examples") {
  SUBCASE("sum gives all-ones gradient") {
    auto x = Var::parameter(Tensor({2, 3}, 0.7f));
    backward(sum(x));
    for (float g : x.grad().data()) CHECK(g == 1.0f);
  }
  SUBCASE("sigmoid(w x) at w=0, x=1 has derivative 0.25") {
    auto w = Var64::parameter(Tensor64({1, 1}, 0.0));
    auto x = Var64::constant(Tensor64({1}, 1.0));
    backward(sum(sigmoid(dense(x, w, Var64{}))));
    CHECK(w.grad()[0] == doctest::Approx(0.25));
  }
  SUBCASE("non-scalar loss is rejected") {
    auto x = Var::parameter(Tensor({2}, 1.0f));
    CHECK_THROWS_AS(backward(relu(x)), DimensionError);
  }
  SUBCASE("unreachable parameters keep a zero gradient") {
    auto used = Var::parameter(Tensor({2}, 1.0f));
    auto unused = Var::parameter(Tensor({2}, 1.0f));
    used.zero_grad();
    unused.zero_grad();
    backward(sum(used));
    CHECK(unused.grad()[0] == 0.0f);
    CHECK(used.grad()[0] == 1.0f);
  }
  SUBCASE("no graph under NoGradGuard") {
    auto x = Var::parameter(Tensor({2}, 1.0f));
    NoGradGuard guard;
    auto y = sum(x);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("reshape and narrow") {
  auto x = Var::parameter(Tensor({2, 4}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7}));
  auto right = narrow(x, 1, 2, 2);
  CHECK(right.value() == Tensor({2, 2}, std::vector<float>{2, 3, 6, 7}));
  backward(sum(right));
  CHECK(x.grad() == Tensor({2, 4}, std::vector<float>{0, 0, 1, 1, 0, 0, 1, 1}));
  CHECK_THROWS_AS(reshape(x, {3, 3}), DimensionError);
}

TEST_CASE("pad2d surrounds the image with zeros") {
  Tensor img({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto p = pad2d(img, 2);
  CHECK(p.shape() == Shape{1, 6, 6});
  CHECK(p[2 * 6 + 2] == 1.0f);
  CHECK(p[3 * 6 + 3] == 4.0f);
  CHECK(p[0] == 0.0f);
}

TEST_CASE("identical inputs give bit-identical outputs") {
  auto run = [] {
    std::mt19937_64 gen(77);
    auto x = Var::constant(random_tensor({2, 3, 12, 12}, gen).cast<float>());
    auto w = Var::parameter(random_tensor({5, 3, 4, 4}, gen).cast<float>());
    auto y = relu(conv2d(x, w, Var{}, {2, 1}));
    backward(sum(y));
    return std::make_pair(y.value(), w.grad());
  };
  CHECK(run() == run());
}
