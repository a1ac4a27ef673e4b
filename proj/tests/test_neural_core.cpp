#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "cegzsl/grad_check.hpp"

using namespace cegzsl;

TEST_CASE("matmul variants agree with a triple loop") {
  Rng rng(1);
  const Mat a = fixture::random_mat(5, 3, rng), b = fixture::random_mat(3, 4, rng);
  const Mat c = matmul(a, b);
  const Mat at = fixture::random_mat(3, 5, rng);
  const Mat bt = fixture::random_mat(4, 3, rng);
  const Mat tn = matmul_tn(at, b);
  const Mat nt = matmul_nt(a, bt);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0, s_tn = 0, s_nt = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        s += double(a(i, k)) * b(k, j);
        s_tn += double(at(k, i)) * b(k, j);
        s_nt += double(a(i, k)) * bt(j, k);
      }
      CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-6));
      CHECK(tn(i, j) == doctest::Approx(s_tn).epsilon(1e-6));
      CHECK(nt(i, j) == doctest::Approx(s_nt).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(Mat(2, 2, std::vector<float>(3)), ShapeError);
}

TEST_CASE("rng streams are reproducible and forks independent") {
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  c.set_counter(5);
  Rng d(7);
  for (int i = 0; i < 5; ++i) d.next_u64();
  CHECK(c.next_u64() == d.next_u64());
  CHECK(Rng(7).fork(1).next_u64() != Rng(7).fork(2).next_u64());
  // below() stays in range and hits every value.
  std::vector<int> hits(6);
  for (int i = 0; i < 600; ++i) ++hits[a.below(6)];
  for (int h : hits) CHECK(h > 50);
}

TEST_CASE("mlp forward matches the scalar oracle for every layer kind") {
  Rng rng(3);
  Mlp<float> net({LayerSpec::affine(4, 6), LayerSpec::leaky_relu(6, 0.2), LayerSpec::affine(6, 5),
                  LayerSpec::relu(5), LayerSpec::affine(5, 3), LayerSpec::l2_normalize_rows(3)});
  net.init(rng);
  fixture::jitter_biases(net, rng);
  Mlp<float> head({LayerSpec::affine(4, 1), LayerSpec::sigmoid(1)});
  head.init(rng);
  const Mat x = fixture::random_mat(8, 4, rng);
  const Mat y = net.predict(x), p = head.predict(x);
  const auto ry = oracle::mlp(net, oracle::rows_of(x)), rp = oracle::mlp(head, oracle::rows_of(x));
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(double(y(i, j)) == doctest::Approx(double(ry[i][j])).epsilon(1e-5));
    CHECK(double(p(i, 0)) == doctest::Approx(double(rp[i][0])).epsilon(1e-6));
    double n = 0;
    for (std::size_t j = 0; j < 3; ++j) n += double(y(i, j)) * y(i, j);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(Mlp<float>({LayerSpec::affine(4, 6), LayerSpec::affine(5, 2)}), ShapeError);
  CHECK_THROWS_AS(net.predict(fixture::random_mat(2, 3, rng)), ShapeError);
}

TEST_CASE("forward and predict agree; backward consumes the tape") {
  Rng rng(4);
  Mlp<float> net({LayerSpec::affine(3, 4), LayerSpec::leaky_relu(4, 0.2), LayerSpec::affine(4, 2)});
  net.init(rng);
  const Mat x = fixture::random_mat(5, 3, rng);
  CHECK(net.forward(x) == net.predict(x));
  CHECK(net.has_tape());
  net.backward(Mat(5, 2, 1.0f));
  CHECK_FALSE(net.has_tape());
  CHECK_THROWS_AS(net.backward(Mat(5, 2, 1.0f)), StateError);
}

TEST_CASE("softmax cross-entropy matches the oracle and is stable") {
  Rng rng(5);
  const Mat logits = fixture::random_mat(8, 5, rng, -3, 3);
  std::vector<std::size_t> t = {0, 1, 2, 3, 4, 0, 1, 2};
  Mat grad;
  const float v = softmax_cross_entropy(logits, std::span<const std::size_t>(t), &grad);
  long double ref = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    oracle::Vec row(logits.row(i).begin(), logits.row(i).end());
    ref += oracle::class_single(row, t[i], 1.0L);
  }
  CHECK(v == doctest::Approx(double(ref / 8)).epsilon(1e-6));
  for (std::size_t i = 0; i < 8; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += grad(i, j);
    CHECK(s == doctest::Approx(0.0).epsilon(1e-6));
  }
  Mat huge(1, 3);
  huge(0, 0) = 1e4f;
  huge(0, 1) = -1e4f;
  std::vector<std::size_t> one = {0};
  CHECK(std::isfinite(softmax_cross_entropy<float>(huge, std::span<const std::size_t>(one), nullptr)));
}

TEST_CASE("adam step matches a hand computation and respects lr 0") {
  Param<float> p(1, 2);
  p.value(0, 0) = 1.0f;
  p.value(0, 1) = -2.0f;
  p.grad(0, 0) = 0.5f;
  p.grad(0, 1) = -0.25f;
  std::vector<Param<float>> ps = {p};
  const AdamConfig cfg{0.1, 0.5, 0.999, 1e-8};
  adam_step(std::span(ps), cfg);
  // First step: m_hat = g, v_hat = g^2, so each value moves by lr * g / (|g| + eps).
  CHECK(ps[0].value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-6));
  CHECK(ps[0].value(0, 1) == doctest::Approx(-2.0 + 0.1 * 0.25 / (0.25 + 1e-8)).epsilon(1e-6));
  CHECK(ps[0].grad(0, 0) == 0.0f);
  CHECK(ps[0].step_count == 1);

  std::vector<Param<float>> frozen = {p};
  adam_step(std::span(frozen), AdamConfig{0.0, 0.5, 0.999, 1e-8});
  CHECK(frozen[0].value == p.value);

  std::vector<Param<float>> bad = {p};
  bad[0].grad(0, 1) = NAN;
  CHECK_THROWS_AS(adam_step(std::span(bad), cfg), NumericsError);
  CHECK(bad[0].value == p.value);
}

TEST_CASE("adam defaults are the published ones") {
  const AdamConfig a;
  CHECK(a.lr == 1e-4);
  CHECK(a.beta1 == 0.5);
  CHECK(a.beta2 == 0.999);
}

TEST_CASE("grad_check accepts correct gradients and rejects a flipped one") {
  Rng rng(6);
  Mlp<float> net({LayerSpec::affine(3, 5), LayerSpec::leaky_relu(5, 0.2), LayerSpec::affine(5, 2),
                  LayerSpec::sigmoid(2)});
  net.init(rng);
  fixture::jitter_biases(net, rng);
  const Mat x = fixture::random_mat(4, 3, rng);
  auto sum_sq = [](const MatD& out, MatD* g) {
    double s = 0;
    if (g) *g = MatD(out.rows(), out.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
      s += out[i] * out[i];
      if (g) (*g)[i] = 2 * out[i];
    }
    return s;
  };
  const auto ok = grad_check(net, sum_sq, x);
  CHECK(ok.passed(1e-4));
  CHECK(ok.checked > 0);

  auto wrong = [&](const MatD& out, MatD* g) {
    const double v = sum_sq(out, g);
    if (g) (*g)[0] = -(*g)[0];
    return v;
  };
  CHECK_FALSE(grad_check(net, wrong, x).passed(1e-4));
}

TEST_CASE("relative error uses the floor for tiny gradients") {
  CHECK(relative_error(1.0, 1.0, 1e-6) == 0.0);
  CHECK(relative_error(1e-9, 0.0, 1e-6) == doctest::Approx(1e-3));
  CHECK(relative_error(2.0, 1.0, 1e-6) == doctest::Approx(0.5));
}

TEST_CASE("probes straddling a kink are flagged, not scored") {
  // A relu with a pre-activation right at zero: the finite difference sees
  // half a slope, the analytic gradient does not.
  Mlp<float> net({LayerSpec::affine(1, 1), LayerSpec::relu(1)});
  net.params()[0].value(0, 0) = 1.0f;
  net.params()[1].value(0, 0) = 0.0f;
  const Mat x(1, 1, 0.0f);
  auto identity = [](const MatD& out, MatD* g) {
    if (g) *g = MatD(1, 1, 1.0);
    return out(0, 0);
  };
  const auto r = grad_check(net, identity, x);
  CHECK(r.flagged > 0);
  CHECK(r.passed(1e-4));
}
