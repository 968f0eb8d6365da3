#include <cmath>

#include "crossgen/tensor/ops.hpp"
#include "crossgen/tensor/param_store.hpp"
#include "crossgen/util/errors.hpp"
#include "doctest.h"

using namespace crossgen::tensor;

namespace {

void set_grad(ParamStore& store, float value) {
  for (auto& e : store.entries()) e.var.mutable_grad().fill(value);
}

}  // namespace

TEST_CASE("first Adam step with unit gradient moves each parameter by lr") {
  ParamStore store;
  store.add("w", Tensor({3, 2}, 0.5f));
  set_grad(store, 1.0f);
  adam_step(store, {.lr = 1e-3});
  // m_hat = g, v_hat = g^2, so the step is lr * 1 / (1 + eps).
  for (float v : store.param("w").value().data()) CHECK(v == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(store.step_count() == 1);
  CHECK_FALSE(store.param("w").has_grad());
}

TEST_CASE("zero gradient leaves parameters unchanged but counts the step") {
  ParamStore store;
  store.add("w", Tensor({4}, 2.0f));
  set_grad(store, 0.0f);
  adam_step(store, {});
  for (float v : store.param("w").value().data()) CHECK(v == 2.0f);
  CHECK(store.step_count() == 1);
}

TEST_CASE("two steps with constant gradient decrease the parameter monotonically") {
  ParamStore store;
  store.add("w", Tensor({1}, 1.0f));
  const double lr = 1e-2;
  double previous = 1.0;
  for (int step = 1; step <= 2; ++step) {
    set_grad(store, 0.3f);
    adam_step(store, {.lr = lr});
    const double now = store.param("w").value()[0];
    CHECK(now < previous);
    // Constant gradient: m_hat = g and v_hat = g^2 at every step.
    CHECK(previous - now == doctest::Approx(lr).epsilon(1e-4));
    previous = now;
  }
  CHECK(store.step_count() == 2);
}

TEST_CASE("Adam refuses to step without gradients") {
  ParamStore store;
  store.add("w", Tensor({2}, 1.0f));
  CHECK_THROWS_AS(adam_step(store, {}), crossgen::Error);
  store.zero_grad();
  adam_step(store, {});
  // Gradients are released after the step.
  CHECK_THROWS_AS(adam_step(store, {}), crossgen::Error);
}

TEST_CASE("moment buffers shape-match parameters and survive export/import") {
  ParamStore a;
  a.add("w", Tensor({2, 3}, 1.0f));
  a.add("b", Tensor({3}, 0.0f));
  a.add_buffer("bn.mean", Tensor({3}, 0.25f));
  for (const auto& e : a.entries()) {
    CHECK(e.adam_m.shape() == e.var.value().shape());
    CHECK(e.adam_v.shape() == e.var.value().shape());
  }
  a.zero_grad();
  backward(sum(a.param("w")));
  adam_step(a, {});

  ParamStore b;
  b.add("w", Tensor({2, 3}));
  b.add("b", Tensor({3}));
  b.add_buffer("bn.mean", Tensor({3}));
  b.import_state(a.export_state());
  CHECK(b.step_count() == 1);
  CHECK(b.param("w").value() == a.param("w").value());
  CHECK(b.entries()[0].adam_v == a.entries()[0].adam_v);
  CHECK(b.buffer("bn.mean")[0] == 0.25f);

  ParamStore wrong;
  wrong.add("w", Tensor({3, 2}));
  wrong.add("b", Tensor({3}));
  wrong.add_buffer("bn.mean", Tensor({3}));
  CHECK_THROWS_AS(wrong.import_state(a.export_state()), crossgen::Error);
}
