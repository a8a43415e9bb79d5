// SPDX-License-Identifier: Apache-2.0
//
// Gradient oracles for the primitive catalog. Analytic tape gradients are
// checked against central finite differences (h = 1e-5, relative error
// <= 1e-4 with a unit floor); dropout and noise injection are checked through
// their defining properties instead, and grad_reverse against a hand-applied
// chain rule because finite differences cannot see deliberate sign surgery.

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "robustnmt/error.hpp"
#include "robustnmt/ops.hpp"
#include "robustnmt/rng.hpp"
#include "robustnmt/tape.hpp"
#include "robustnmt/tensor.hpp"
#include "support/gradcheck.hpp"

using robustnmt::DataError;
using robustnmt::NumericalError;
using robustnmt::RngStream;
using robustnmt::ShapeError;
using robustnmt::Tape;
using robustnmt::Tensor;
using testsupport::max_rel_grad_error;
using testsupport::random_values;
namespace ops = robustnmt::ops;

namespace {

constexpr double kTol = 1e-4;

// Scalarize a non-scalar op output with a fixed random linear functional so
// the finite-difference probe mixes all Jacobian entries.
Tensor weigh(Tape& tape, const Tensor& y, std::uint64_t seed) {
  Tensor w = Tensor::from(y.shape(), random_values(y.numel(), seed));
  return ops::sum(tape, ops::mul(tape, y, w));
}

template <typename Fn>
void check_shape_error(Fn fn, const std::string& op_name) {
  try {
    fn();
    FAIL("expected ShapeError from " << op_name);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find(op_name) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("backward trivial oracles") {
  Tape tape;
  Tensor x = Tensor::from({2, 3}, random_values(6, 1), true);
  Tensor loss = ops::sum(tape, x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);

  Tape tape2;
  Tensor a = Tensor::from({1}, {3.0}, true);
  Tensor sq = ops::mul(tape2, a, a);
  tape2.backward(ops::sum(tape2, sq));
  CHECK(a.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar and off-tape losses") {
  Tape tape;
  Tensor x = Tensor::from({2, 2}, random_values(4, 2), true);
  Tensor y = ops::scale(tape, x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), NumericalError);

  Tape other;
  Tensor z = ops::sum(other, x);
  CHECK_THROWS_AS(tape.backward(z), NumericalError);
}

TEST_CASE("backward twice on one tape yields identical gradients") {
  Tape tape;
  Tensor x = Tensor::from({3, 4}, random_values(12, 3), true);
  Tensor loss = ops::mean(tape, ops::tanh(tape, ops::mul(tape, x, x)));
  tape.backward(loss);
  std::vector<double> first = x.grad();
  tape.backward(loss);
  CHECK(x.grad() == first);
}

TEST_CASE("matmul gradients match finite differences") {
  std::vector<double> bv = random_values(4 * 5, 10);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({4, 5}, bv);
              return weigh(t, ops::matmul(t, x, b), 100);
            },
            {3, 4}, random_values(12, 11)) < kTol);
  std::vector<double> av = random_values(3 * 4, 12);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({3, 4}, av);
              return weigh(t, ops::matmul(t, a, x), 101);
            },
            {4, 5}, random_values(20, 13)) < kTol);
  check_shape_error(
      [] {
        Tape t;
        Tensor a = Tensor::from({2, 3}, random_values(6, 1));
        Tensor b = Tensor::from({2, 3}, random_values(6, 2));
        ops::matmul(t, a, b);
      },
      "matmul");
}

TEST_CASE("matmul_nt gradients match finite differences") {
  std::vector<double> bv = random_values(5 * 4, 14);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({5, 4}, bv);
              return weigh(t, ops::matmul_nt(t, x, b), 102);
            },
            {3, 4}, random_values(12, 15)) < kTol);
  std::vector<double> av = random_values(3 * 4, 16);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({3, 4}, av);
              return weigh(t, ops::matmul_nt(t, a, x), 103);
            },
            {5, 4}, random_values(20, 17)) < kTol);
}

TEST_CASE("matmul_nt equals matmul against the materialized transpose") {
  Tape t;
  Tensor a = Tensor::from({3, 4}, random_values(12, 18));
  std::vector<double> b = random_values(5 * 4, 19), bt(4 * 5);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) bt[c * 5 + r] = b[r * 4 + c];
  Tensor nt = ops::matmul_nt(t, a, Tensor::from({5, 4}, b));
  Tensor mm = ops::matmul(t, a, Tensor::from({4, 5}, bt));
  CHECK(nt.values() == mm.values());
}

TEST_CASE("add gradients match finite differences in all broadcast forms") {
  std::vector<double> other = random_values(12, 20);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              return weigh(t, ops::add(t, x, Tensor::from({3, 4}, other)), 104);
            },
            {3, 4}, random_values(12, 21)) < kTol);
  // row broadcast, both sides
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({4}, random_values(4, 22));
              return weigh(t, ops::add(t, x, b), 105);
            },
            {3, 4}, random_values(12, 23)) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({3, 4}, random_values(12, 24));
              return weigh(t, ops::add(t, a, x), 106);
            },
            {4}, random_values(4, 25)) < kTol);
  // column broadcast, both sides
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({3, 1}, random_values(3, 26));
              return weigh(t, ops::add(t, x, b), 107);
            },
            {3, 4}, random_values(12, 27)) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({3, 4}, random_values(12, 28));
              return weigh(t, ops::add(t, a, x), 108);
            },
            {3, 1}, random_values(3, 29)) < kTol);
  check_shape_error(
      [] {
        Tape t;
        ops::add(t, Tensor::from({2, 3}, random_values(6, 1)),
                 Tensor::from({2}, random_values(2, 2)));
      },
      "add");
}

TEST_CASE("sub and mul gradients match finite differences") {
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({2, 5}, random_values(10, 30));
              return weigh(t, ops::sub(t, x, b), 109);
            },
            {2, 5}, random_values(10, 31)) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({2, 5}, random_values(10, 32));
              return weigh(t, ops::sub(t, a, x), 110);
            },
            {2, 5}, random_values(10, 33)) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({2, 5}, random_values(10, 34));
              return weigh(t, ops::mul(t, x, b), 111);
            },
            {2, 5}, random_values(10, 35)) < kTol);
  // column-broadcast mul, both sides
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor b = Tensor::from({2, 1}, random_values(2, 36));
              return weigh(t, ops::mul(t, x, b), 112);
            },
            {2, 5}, random_values(10, 37)) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({2, 5}, random_values(10, 38));
              return weigh(t, ops::mul(t, a, x), 113);
            },
            {2, 1}, random_values(2, 39)) < kTol);
}

TEST_CASE("scale and shift gradients match finite differences") {
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::scale(t, x, -2.5), 114); },
            {3, 3}, random_values(9, 40)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::shift(t, x, 0.75), 115); },
            {3, 3}, random_values(9, 41)) < kTol);
}

TEST_CASE("activation gradients match finite differences") {
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::sigmoid(t, x), 116); },
            {3, 4}, random_values(12, 42, 2.0)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::tanh(t, x), 117); },
            {3, 4}, random_values(12, 43, 2.0)) < kTol);
  // keep relu inputs away from the kink at zero
  std::vector<double> xv = random_values(12, 44);
  for (double& v : xv) v += v >= 0.0 ? 0.25 : -0.25;
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::relu(t, x), 118); },
            {3, 4}, xv) < kTol);
}

TEST_CASE("softmax properties and gradients") {
  Tape t;
  Tensor sym = ops::softmax(t, Tensor::from({2}, {0.0, 0.0}));
  CHECK(sym.values()[0] == doctest::Approx(0.5));
  CHECK(sym.values()[1] == doctest::Approx(0.5));

  Tensor y = ops::softmax(t, Tensor::from({3, 5}, random_values(15, 45, 4.0)));
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(y.values()[i * 5 + j] >= 0.0);
      s += y.values()[i * 5 + j];
    }
    CHECK(std::fabs(s - 1.0) <= 1e-9);
  }

  CHECK(max_rel_grad_error(
            [](Tape& tp, const Tensor& x) { return weigh(tp, ops::softmax(tp, x), 119); },
            {3, 5}, random_values(15, 46, 2.0)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& tp, const Tensor& x) { return weigh(tp, ops::log_softmax(tp, x), 120); },
            {3, 5}, random_values(15, 47, 2.0)) < kTol);

  // log_softmax values agree with log(softmax)
  Tensor xs = Tensor::from({2, 4}, random_values(8, 48, 3.0));
  Tensor ls = ops::log_softmax(t, xs);
  Tensor sm = ops::softmax(t, xs);
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(ls.values()[i] == doctest::Approx(std::log(sm.values()[i])).epsilon(1e-10));
}

TEST_CASE("embedding_gather gradients accumulate across repeated ids") {
  std::vector<std::int32_t> ids = {0, 2, 2, 4};
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& table) {
              return weigh(t, ops::embedding_gather(t, table, ids), 121);
            },
            {5, 3}, random_values(15, 49)) < kTol);
  CHECK_THROWS_AS(
      (void)[] {
        Tape t;
        Tensor table = Tensor::from({5, 3}, random_values(15, 50));
        return ops::embedding_gather(t, table, {5});
      }(),
      DataError);
}

TEST_CASE("concat, slice, stack and reshape gradients match finite differences") {
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) {
              Tensor a = Tensor::from({3, 2}, random_values(6, 51));
              Tensor c = Tensor::from({3, 4}, random_values(12, 52));
              return weigh(t, ops::concat(t, {a, x, c}), 122);
            },
            {3, 3}, random_values(9, 53)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::slice_cols(t, x, 1, 4), 123); },
            {3, 6}, random_values(18, 54)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) {
              Tensor s2 = Tensor::from({2, 3}, random_values(6, 55));
              return weigh(t, ops::stack_time(t, {x, s2, x}), 124);
            },
            {2, 3}, random_values(6, 56)) < kTol);
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& x) { return weigh(t, ops::reshape(t, x, {6, 2}), 125); },
            {3, 4}, random_values(12, 57)) < kTol);

  // stacking places step t at the middle axis
  Tape t;
  Tensor s0 = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor s1 = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor st = ops::stack_time(t, {s0, s1});
  CHECK(st.shape() == std::vector<std::size_t>{2, 2, 2});
  CHECK(st.values() == std::vector<double>{1, 2, 5, 6, 3, 4, 7, 8});
}

TEST_CASE("sum and mean gradients match finite differences") {
  CHECK(max_rel_grad_error([](Tape& t, const Tensor& x) { return ops::sum(t, x); }, {4, 3},
                           random_values(12, 58)) < kTol);
  CHECK(max_rel_grad_error([](Tape& t, const Tensor& x) { return ops::mean(t, x); }, {4, 3},
                           random_values(12, 59)) < kTol);
}

TEST_CASE("layer_norm normalizes rows and its gradients match finite differences") {
  // constant row maps to zero before the affine parameters act
  Tape t;
  Tensor g1 = Tensor::from({3}, {1.0, 1.0, 1.0});
  Tensor b0 = Tensor::from({3}, {0.0, 0.0, 0.0});
  Tensor flat = ops::layer_norm(t, Tensor::from({1, 3}, {2.5, 2.5, 2.5}), g1, b0);
  for (double v : flat.values()) CHECK(v == doctest::Approx(0.0));

  std::vector<double> gv = random_values(6, 60), bv = random_values(6, 61);
  for (double& v : gv) v += 1.5;  // keep gamma away from zero
  CHECK(max_rel_grad_error(
            [&](Tape& tp, const Tensor& x) {
              Tensor g = Tensor::from({6}, gv);
              Tensor b = Tensor::from({6}, bv);
              return weigh(tp, ops::layer_norm(tp, x, g, b), 126);
            },
            {4, 6}, random_values(24, 62)) < kTol);
  std::vector<double> xv = random_values(24, 63);
  CHECK(max_rel_grad_error(
            [&](Tape& tp, const Tensor& g) {
              Tensor x = Tensor::from({4, 6}, xv);
              Tensor b = Tensor::from({6}, bv);
              return weigh(tp, ops::layer_norm(tp, x, g, b), 127);
            },
            {6}, gv) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& tp, const Tensor& b) {
              Tensor x = Tensor::from({4, 6}, xv);
              Tensor g = Tensor::from({6}, gv);
              return weigh(tp, ops::layer_norm(tp, x, g, b), 128);
            },
            {6}, bv) < kTol);
}

TEST_CASE("dropout keeps expectation, is identity at p 0, and masks gradients") {
  Tensor x = Tensor::from({4, 8}, random_values(32, 64), true);
  RngStream rng(777);

  Tape t0;
  Tensor same = ops::dropout(t0, x, 0.0, rng, true);
  CHECK(same.node() == x.node());
  Tensor eval_same = ops::dropout(t0, x, 0.5, rng, false);
  CHECK(eval_same.node() == x.node());

  const double p = 0.3;
  std::vector<double> acc(32, 0.0);
  const int rounds = 10000;
  for (int r = 0; r < rounds; ++r) {
    Tape t;
    RngStream stream = RngStream(555).split("mask", r);
    Tensor y = ops::dropout(t, x, p, stream, true);
    for (std::size_t i = 0; i < 32; ++i) acc[i] += y.values()[i];
  }
  for (std::size_t i = 0; i < 32; ++i) {
    const double avg = acc[i] / rounds;
    CHECK(std::fabs(avg - x.values()[i]) <= 0.02 * std::max(1.0, std::fabs(x.values()[i])) + 0.02);
  }

  // same frozen mask -> the masked map is deterministic and FD-checkable
  CHECK(max_rel_grad_error(
            [](Tape& t, const Tensor& xi) {
              RngStream s(999);
              return weigh(t, ops::dropout(t, xi, 0.4, s, true), 129);
            },
            {4, 8}, random_values(32, 65)) < kTol);

  CHECK_THROWS_AS(
      (void)[&] {
        Tape t;
        RngStream s(1);
        return ops::dropout(t, x, 1.0, s, true);
      }(),
      robustnmt::ConfigError);
}

TEST_CASE("conv1d plus max_over_time reproduces hand-enumerated window responses") {
  // one filter of width 2 over a length-3, depth-1 sequence:
  // responses r_p = x_p * k_0 + x_{p+1} * k_1 + bias
  Tape t;
  Tensor x = Tensor::from({1, 3, 1}, {1.0, -2.0, 4.0});
  Tensor k = Tensor::from({1, 2, 1}, {0.5, 1.5});
  Tensor b = Tensor::from({1}, {0.25});
  Tensor conv = ops::conv1d(t, x, k, b);
  CHECK(conv.shape() == std::vector<std::size_t>{1, 2, 1});
  const double r0 = 1.0 * 0.5 + (-2.0) * 1.5 + 0.25;  // -2.25
  const double r1 = (-2.0) * 0.5 + 4.0 * 1.5 + 0.25;  // 5.25
  CHECK(conv.values()[0] == doctest::Approx(r0));
  CHECK(conv.values()[1] == doctest::Approx(r1));
  Tensor pooled = ops::max_over_time(t, conv, {2});
  CHECK(pooled.values()[0] == doctest::Approx(std::max(r0, r1)));
}

TEST_CASE("conv1d gradients match finite differences") {
  std::vector<double> kv = random_values(2 * 3 * 4, 66), bv = random_values(2, 67);
  std::vector<double> xv = random_values(2 * 6 * 4, 68);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& x) {
              Tensor k = Tensor::from({2, 3, 4}, kv);
              Tensor b = Tensor::from({2}, bv);
              return weigh(t, ops::conv1d(t, x, k, b), 130);
            },
            {2, 6, 4}, xv) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& k) {
              Tensor x = Tensor::from({2, 6, 4}, xv);
              Tensor b = Tensor::from({2}, bv);
              return weigh(t, ops::conv1d(t, x, k, b), 131);
            },
            {2, 3, 4}, kv) < kTol);
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& b) {
              Tensor x = Tensor::from({2, 6, 4}, xv);
              Tensor k = Tensor::from({2, 3, 4}, kv);
              return weigh(t, ops::conv1d(t, x, k, b), 132);
            },
            {2}, bv) < kTol);
  check_shape_error(
      [] {
        Tape t;
        ops::conv1d(t, Tensor::from({1, 2, 3}, random_values(6, 1)),
                    Tensor::from({1, 4, 3}, random_values(12, 2)),
                    Tensor::from({1}, {0.0}));
      },
      "conv1d");
}

TEST_CASE("max_over_time honors per-row valid windows and routes gradients") {
  Tape t;
  Tensor x = Tensor::from({2, 3, 2}, {1, 9,  5, 2,  7, 3,    // row 0
                                      4, 1,  8, 6,  9, 9});  // row 1
  Tensor y = ops::max_over_time(t, x, {2, 3});
  // row 0 sees positions 0..1 only, row 1 all three
  CHECK(y.values() == std::vector<double>{5, 9, 9, 9});

  CHECK(max_rel_grad_error(
            [](Tape& tp, const Tensor& xi) {
              return weigh(tp, ops::max_over_time(tp, xi, {3, 2}), 133);
            },
            {2, 3, 4}, random_values(24, 69)) < kTol);
}

TEST_CASE("binary cross entropy matches finite differences off the clamp") {
  std::vector<double> pv = random_values(6, 70);
  for (double& v : pv) v = 0.5 + 0.4 * v;  // (0.1, 0.9)
  std::vector<double> targets = {1, 0, 0, 1, 1, 0};
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& p) {
              return ops::binary_cross_entropy(t, p, targets);
            },
            {6, 1}, pv) < kTol);

  // clamped probabilities contribute the clamped value and zero gradient
  Tape t;
  Tensor p = Tensor::from({2, 1}, {1e-12, 1.0}, true);
  Tensor loss = ops::binary_cross_entropy(t, p, {0.0, 1.0});
  CHECK(loss.values()[0] ==
        doctest::Approx(0.5 * (-std::log(1.0 - 1e-7) - std::log(1.0 - 1e-7))));
  t.backward(loss);
  CHECK(p.grad()[0] == 0.0);
  CHECK(p.grad()[1] == 0.0);
}

TEST_CASE("categorical cross entropy matches finite differences and direct log-softmax") {
  std::vector<std::int32_t> targets = {2, 0, 4};
  CHECK(max_rel_grad_error(
            [&](Tape& t, const Tensor& logits) {
              return weigh(t, ops::categorical_cross_entropy(t, logits, targets), 134);
            },
            {3, 5}, random_values(15, 71, 3.0)) < kTol);

  Tape t;
  Tensor logits = Tensor::from({3, 5}, random_values(15, 72, 3.0));
  Tensor nll = ops::categorical_cross_entropy(t, logits, targets);
  Tensor lsm = ops::log_softmax(t, logits);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(nll.values()[i] ==
          doctest::Approx(-lsm.values()[i * 5 + static_cast<std::size_t>(targets[i])])
              .epsilon(1e-10));
  CHECK_THROWS_AS(ops::categorical_cross_entropy(t, logits, {0, 1}), ShapeError);
  CHECK_THROWS_AS(ops::categorical_cross_entropy(t, logits, {0, 1, 5}), DataError);
}

TEST_CASE("gaussian noise adds sigma-scaled draws and passes gradients through") {
  Tensor x = Tensor::from({3, 4}, random_values(12, 73), true);
  RngStream a(2024), b(2024);
  Tape t;
  Tensor y = ops::gaussian_noise_add(t, x, 0.1, a);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(y.values()[i] == doctest::Approx(x.values()[i] + 0.1 * b.next_gaussian()));
  Tensor loss = weigh(t, y, 135);
  t.backward(loss);
  // gradient of x equals the weights exactly: noise is constant offset
  std::vector<double> w = random_values(12, 135);
  for (std::size_t i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(w[i]));
}

TEST_CASE("grad_reverse forwards bitwise and flips gradient sign") {
  Tape t;
  Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
  Tensor y = ops::grad_reverse(t, x);
  CHECK(y.values() == x.values());

  Tensor loss = ops::sum(t, y);
  t.backward(loss);
  CHECK(x.grad() == std::vector<double>{-1.0, -1.0});

  // composite: loss = sum(c .* grad_reverse(x)) -> grad is -c
  Tape t2;
  Tensor x2 = Tensor::from({2}, {0.3, 0.7}, true);
  Tensor c = Tensor::from({2}, {2.0, 3.0});
  t2.backward(ops::sum(t2, ops::mul(t2, c, ops::grad_reverse(t2, x2))));
  CHECK(x2.grad() == std::vector<double>{-2.0, -3.0});
}
