#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cegzsl;

namespace {

const fixture::Dims kDims;

// A discriminator whose output is exactly 0.5 for every input.
DiscriminatorNet<float> half_d() {
  Rng rng(0);
  auto d = make_discriminator(kDims.d_x, kDims.d_a, kDims.hidden, kDims.slope, rng);
  for (auto& p : d.net.params()) p.value.fill(0.0f);
  return d;
}

}  // namespace

TEST_CASE("generate draws fresh noise per row, is seeded and non-negative") {
  Rng rng(1);
  const auto g = make_generator(4, 4, 16, 6, 0.2, rng);
  Mat a(5, 4);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = 0.25f * j;
  }
  Rng r1(9), r2(9);
  const Mat x1 = generate(g, a, r1), x2 = generate(g, a, r2);
  CHECK(x1 == x2);
  std::set<std::vector<float>> distinct;
  for (std::size_t i = 0; i < 5; ++i) distinct.insert({x1.row(i).begin(), x1.row(i).end()});
  CHECK(distinct.size() == 5);
  for (float v : x1.values()) CHECK(v >= 0.0f);
  CHECK_THROWS_AS(generate(g, Mat(2, 3), r1), ShapeError);
}

TEST_CASE("generator width follows the feature dimension") {
  Rng rng(2);
  const auto g = make_generator(85, 85, 32, 2048, 0.2, rng);
  Rng r(3);
  CHECK(generate(g, Mat(2, 85, 0.5f), r).cols() == 2048);
  CHECK_THROWS_AS(make_generator(4, 0, 8, 6, 0.2, rng), DomainError);
}

TEST_CASE("adversarial value at an undecided discriminator is -2 ln 2") {
  Rng rng(4);
  const auto d = half_d();
  const Mat rx = fixture::random_mat(8, kDims.d_x, rng), fx = fixture::random_mat(8, kDims.d_x, rng);
  const Mat a = fixture::random_mat(8, kDims.d_a, rng);
  CHECK(adversarial_value(d, rx, a, fx, a) == doctest::Approx(-2 * std::numbers::ln2).epsilon(1e-7));
}

TEST_CASE("a perfect discriminator drives the value to zero from below") {
  const Mat p_real(4, 1, 1.0f - 1e-7f), p_fake(4, 1, 1e-7f);
  const float v = adversarial_from_probs(p_real, p_fake).value;
  CHECK(v < 0.0f);
  CHECK(v > -1e-5f);
  // Saturated probabilities stay finite through the clamp.
  CHECK(std::isfinite(adversarial_from_probs(Mat(2, 1, 0.0f), Mat(2, 1, 1.0f)).value));
}

TEST_CASE("adversarial value matches the scalar oracle and ignores row order") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = make_discriminator(kDims.d_x, kDims.d_a, kDims.hidden, kDims.slope, rng);
    const Mat rx = fixture::random_mat(8, kDims.d_x, rng), fx = fixture::random_mat(8, kDims.d_x, rng, 0, 2);
    const Mat ra = fixture::random_mat(8, kDims.d_a, rng), fa = fixture::random_mat(8, kDims.d_a, rng);
    oracle::Rows in_r, in_f;
    const auto orx = oracle::rows_of(rx), ofx = oracle::rows_of(fx), ora = oracle::rows_of(ra),
               ofa = oracle::rows_of(fa);
    for (int i = 0; i < 8; ++i) {
      in_r.push_back(oracle::concat(orx[i], ora[i]));
      in_f.push_back(oracle::concat(ofx[i], ofa[i]));
    }
    const long double ref = oracle::adversarial(oracle::mlp(d.net, in_r), oracle::mlp(d.net, in_f));
    const float v = adversarial_value(d, rx, ra, fx, fa);
    CHECK(std::abs(v - ref) <= 1e-5);

    std::vector<std::size_t> perm = {7, 3, 5, 0, 1, 6, 2, 4};
    const auto sp = std::span<const std::size_t>(perm);
    const float vp = adversarial_value(d, gather_rows(rx, sp), gather_rows(ra, sp), fx, fa);
    CHECK(vp == doctest::Approx(v).epsilon(1e-6));
  }
}

TEST_CASE("generator-side adversarial terms") {
  const Mat p(3, 1, 0.25f);
  Mat g;
  CHECK(generator_adversarial_from_probs(p, GeneratorLoss::minimax, &g) ==
        doctest::Approx(std::log(0.75)).epsilon(1e-6));
  CHECK(generator_adversarial_from_probs(p, GeneratorLoss::non_saturating, &g) ==
        doctest::Approx(-std::log(0.25)).epsilon(1e-6));
  CHECK(g(0, 0) == doctest::Approx(-1.0 / (3 * 0.25)).epsilon(1e-6));
}

TEST_CASE("discriminator steps mostly increase V on a frozen generator") {
  int rising = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    const auto g = make_generator(kDims.d_a, kDims.noise, kDims.hidden, kDims.d_x, kDims.slope, rng);
    auto d = make_discriminator(kDims.d_x, kDims.d_a, kDims.hidden, kDims.slope, rng);
    const Mat rx = fixture::random_mat(16, kDims.d_x, rng, 0, 2);
    const Mat a = fixture::random_mat(16, kDims.d_a, rng, 0, 1);
    const Mat fx = generate(g, a, rng);
    const AdamConfig opt{1e-3, 0.5, 0.999, 1e-8};
    const float v0 = discriminator_step(d, rx, a, fx, a, opt);
    const float v1 = discriminator_step(d, rx, a, fx, a, opt);
    const float v2 = adversarial_value(d, rx, a, fx, a);
    rising += (v1 >= v0 && v2 >= v1);
  }
  CHECK(rising >= 16);
}

TEST_CASE("zero learning rate leaves both networks unchanged") {
  Rng rng(6);
  auto g = make_generator(kDims.d_a, kDims.noise, kDims.hidden, kDims.d_x, kDims.slope, rng);
  auto d = make_discriminator(kDims.d_x, kDims.d_a, kDims.hidden, kDims.slope, rng);
  const auto g0 = fixture::all_values(g.net), d0 = fixture::all_values(d.net);
  const Mat a = fixture::random_mat(8, kDims.d_a, rng);
  const Mat rx = fixture::random_mat(8, kDims.d_x, rng);
  const AdamConfig frozen{0.0, 0.5, 0.999, 1e-8};
  discriminator_step(d, rx, a, generate(g, a, rng), a, frozen);
  generator_step(g, d, a, rng, GeneratorLoss::minimax, frozen);
  generator_step(g, d, a, rng, GeneratorLoss::non_saturating, frozen);
  CHECK(fixture::all_values(g.net) == g0);
  CHECK(fixture::all_values(d.net) == d0);
}

TEST_CASE("generator steps only move the generator") {
  Rng rng(7);
  auto g = make_generator(kDims.d_a, kDims.noise, kDims.hidden, kDims.d_x, kDims.slope, rng);
  auto d = make_discriminator(kDims.d_x, kDims.d_a, kDims.hidden, kDims.slope, rng);
  const auto g0 = fixture::all_values(g.net), d0 = fixture::all_values(d.net);
  generator_step(g, d, fixture::random_mat(8, kDims.d_a, rng), rng, GeneratorLoss::minimax,
                 AdamConfig{1e-2, 0.5, 0.999, 1e-8});
  CHECK(fixture::all_values(g.net) != g0);
  CHECK(fixture::all_values(d.net) == d0);
}

TEST_CASE("unseen synthesis counts rows per class and composes with E") {
  Rng rng(8);
  const SyntheticWorld w = fixture::world(0, 10);
  const auto g = make_generator(8, 8, 16, 32, 0.2, rng);
  Rng r1(1), r2(1);
  const auto [x, ids] = synthesize_unseen_embeddings(g, nullptr, w.dataset.semantic, 100, r1);
  CHECK(x.rows() == 300);
  std::map<ClassId, int> counts;
  for (auto c : ids) ++counts[c];
  CHECK(counts == std::map<ClassId, int>{{8, 100}, {9, 100}, {10, 100}});

  // An identity embedding reproduces the raw generated rows.
  Mlp<float> identity({LayerSpec::affine(32, 32)});
  for (std::size_t j = 0; j < 32; ++j) identity.params()[0].value(j, j) = 1.0f;
  const auto [xe, ide] = synthesize_unseen_embeddings(g, &identity, w.dataset.semantic, 100, r2);
  CHECK(xe == x);
  CHECK(ide == ids);
  CHECK_THROWS(synthesize_unseen_embeddings(g, nullptr, w.dataset.semantic, 0, r1));
}

TEST_CASE("paper synthesis counts are accepted by the presets") {
  const std::map<std::string, std::size_t> expected = {
      {"AWA1", 1800}, {"AWA2", 2400}, {"CUB", 300}, {"FLO", 600}, {"SUN", 100}};
  for (const auto& [name, n] : expected) {
    const TrainConfig c = paper_preset(name);
    CHECK(c.n_syn_per_unseen == n);
    CHECK_NOTHROW(c.validate());
  }
}
