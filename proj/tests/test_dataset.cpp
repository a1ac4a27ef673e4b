#include <cmath>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "cegzsl/binary_io.hpp"

using namespace cegzsl;

namespace {

FeatureDataset toy(Rng& rng, std::size_t s = 2, std::size_t u = 1) {
  FeatureDataset ds;
  ds.semantic.descriptors = fixture::random_mat(s + u, 3, rng, 0, 1);
  ds.semantic.seen_count = s;
  ds.semantic.unseen_count = u;
  ds.train_x = fixture::random_mat(6, 4, rng);
  for (std::size_t i = 0; i < 6; ++i) ds.train_y.push_back(static_cast<ClassId>(1 + i % s));
  ds.test_seen_x = fixture::random_mat(2, 4, rng);
  ds.test_seen_y = {1, 2};
  ds.test_unseen_x = fixture::random_mat(3, 4, rng);
  ds.test_unseen_y = std::vector<ClassId>(3, static_cast<ClassId>(s + 1));
  return ds;
}

}  // namespace

TEST_CASE("gzb round-trip is the identity") {
  Rng rng(1);
  const FeatureDataset ds = toy(rng);
  CHECK(decode_gzb(encode_gzb(ds)) == ds);
  const auto dir = fixture::scratch_dir("gzb");
  save_dataset(ds, (dir / "toy.gzb").string(), DatasetFormat::gzb);
  const FeatureDataset back = load_dataset((dir / "toy.gzb").string());
  CHECK(back == ds);
  CHECK(back.train_x.rows() == 6);
}

TEST_CASE("gzb header follows the published layout") {
  Rng rng(2);
  const auto bytes = encode_gzb(toy(rng));
  binary::Reader r(bytes);
  CHECK(r.magic(4) == "GZB1");
  CHECK(r.u32() == 1);  // version
  CHECK(r.u32() == 2);  // S
  CHECK(r.u32() == 1);  // U
  CHECK(r.u32() == 4);  // d_x
  CHECK(r.u32() == 3);  // d_a
  CHECK(r.u32() == 6);
  CHECK(r.u32() == 2);
  CHECK(r.u32() == 3);
}

TEST_CASE("csv bundle round-trips within decimal precision") {
  Rng rng(3);
  const FeatureDataset ds = toy(rng);
  const auto dir = fixture::scratch_dir("csv");
  save_dataset(ds, (dir / "bundle").string(), DatasetFormat::csv_bundle);
  CHECK(detect_format((dir / "bundle").string()) == DatasetFormat::csv_bundle);
  const FeatureDataset back = load_dataset((dir / "bundle").string());
  CHECK(back.train_y == ds.train_y);
  CHECK(back.test_unseen_y == ds.test_unseen_y);
  CHECK(back.semantic.seen_count == 2);
  for (std::size_t i = 0; i < ds.train_x.size(); ++i) CHECK(std::abs(back.train_x[i] - ds.train_x[i]) <= 1e-6);
  for (std::size_t i = 0; i < ds.semantic.descriptors.size(); ++i) {
    CHECK(std::abs(back.semantic.descriptors[i] - ds.semantic.descriptors[i]) <= 1e-6);
  }
}

TEST_CASE("an empty seen test partition is representable") {
  Rng rng(4);
  FeatureDataset ds = toy(rng);
  ds.test_seen_x = Mat(0, 4);
  ds.test_seen_y.clear();
  CHECK(decode_gzb(encode_gzb(ds)) == ds);
}

TEST_CASE("split and shape violations are hard errors") {
  Rng rng(5);
  FeatureDataset ds = toy(rng);
  ds.train_y[0] = 3;  // an unseen class in the training split
  CHECK_THROWS_AS(ds.validate(), SplitViolation);
  CHECK_THROWS_AS(decode_gzb(encode_gzb(ds)), SplitViolation);

  FeatureDataset bad_unseen = toy(rng);
  bad_unseen.test_unseen_y[0] = 1;
  CHECK_THROWS_AS(bad_unseen.validate(), SplitViolation);

  FeatureDataset widths = toy(rng);
  widths.test_seen_x = fixture::random_mat(2, 5, rng);
  CHECK_THROWS_AS(widths.validate(), ShapeError);

  FeatureDataset twins = toy(rng);
  for (std::size_t j = 0; j < 3; ++j) twins.semantic.descriptors(1, j) = twins.semantic.descriptors(0, j);
  CHECK_THROWS(twins.validate());
}

TEST_CASE("foreign or truncated files are rejected") {
  Rng rng(6);
  auto bytes = encode_gzb(toy(rng));
  auto foreign = bytes;
  foreign[0] = 'X';
  CHECK_THROWS_AS(decode_gzb(foreign), MagicMismatch);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_gzb(bytes), IoError);
}

TEST_CASE("paper-sized shapes are accepted") {
  Rng rng(7);
  FeatureDataset ds;
  ds.semantic.descriptors = fixture::random_mat(50, 85, rng, 0, 1);
  ds.semantic.seen_count = 40;
  ds.semantic.unseen_count = 10;
  ds.train_x = Mat(40, 2048, 0.5f);
  for (ClassId c = 1; c <= 40; ++c) ds.train_y.push_back(c);
  ds.test_seen_x = Mat(1, 2048);
  ds.test_seen_y = {1};
  ds.test_unseen_x = Mat(1, 2048);
  ds.test_unseen_y = {41};
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("synthetic world is deterministic, valid and recoverable") {
  const SyntheticWorld a = fixture::world(1), b = fixture::world(1);
  CHECK(a.dataset == b.dataset);
  CHECK_NOTHROW(a.dataset.validate());
  CHECK(a.dataset.train_x.rows() == 7 * 80);
  CHECK(a.dataset.test_seen_x.rows() == 7 * 20);
  CHECK(a.dataset.test_unseen_x.rows() == 3 * 100);
  CHECK(a.oracle_unseen_acc >= 0.95);
  for (float v : a.dataset.semantic.descriptors.values()) CHECK((v >= 0.0f && v <= 1.0f));

  // Recompute the unseen oracle accuracy by brute force from the true means.
  const auto& ds = a.dataset;
  std::vector<ClassId> pred;
  for (std::size_t i = 0; i < ds.test_unseen_x.rows(); ++i) {
    double best = INFINITY;
    ClassId arg = 0;
    for (std::size_t c = 0; c < a.class_means.rows(); ++c) {
      double d = 0;
      for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
        const double t = double(ds.test_unseen_x(i, j)) - a.class_means(c, j);
        d += t * t;
      }
      if (d < best) {
        best = d;
        arg = static_cast<ClassId>(c + 1);
      }
    }
    pred.push_back(arg);
  }
  CHECK(per_class_top1(pred, ds.test_unseen_y, unseen_ids(ds.semantic)) ==
        doctest::Approx(a.oracle_unseen_acc));
}

TEST_CASE("class means follow the affine descriptor map") {
  const SyntheticWorld w = fixture::world(2);
  const Mat& a = w.dataset.semantic.descriptors;
  for (std::size_t c = 0; c < a.rows(); ++c) {
    for (std::size_t j = 0; j < 32; ++j) {
      double m = w.map_bias(0, j);
      for (std::size_t k = 0; k < 8; ++k) m += double(a(c, k)) * w.map_weight(k, j);
      CHECK(w.class_means(c, j) == doctest::Approx(m).epsilon(1e-5));
    }
  }
}

TEST_CASE("zero noise collapses each class onto its mean") {
  SyntheticWorldSpec s;
  s.seen = 3;
  s.unseen = 2;
  s.feature_dim = 6;
  s.attr_dim = 3;
  s.n_per_class = 10;
  s.noise_sigma = 0.0;
  const SyntheticWorld w = make_synthetic_world(s);
  for (std::size_t i = 0; i < w.dataset.test_unseen_x.rows(); ++i) {
    const ClassId c = w.dataset.test_unseen_y[i];
    for (std::size_t j = 0; j < 6; ++j) CHECK(w.dataset.test_unseen_x(i, j) == w.class_means(c - 1, j));
  }
  SyntheticWorldSpec narrow = s;
  narrow.feature_dim = 2;
  CHECK_THROWS(make_synthetic_world(narrow));
}

TEST_CASE("per-class top-1 averages classes, not instances") {
  std::vector<ClassId> truth, pred;
  for (int i = 0; i < 10; ++i) {
    truth.push_back(1);
    pred.push_back(1);
  }
  for (int i = 0; i < 1000; ++i) {
    truth.push_back(2);
    pred.push_back(1);
  }
  const std::vector<ClassId> classes = {1, 2};
  CHECK(per_class_top1(pred, truth, classes) == doctest::Approx(0.5));
  CHECK(per_class_top1(truth, truth, classes) == 1.0);
  CHECK_THROWS_AS(per_class_top1(pred, truth, std::vector<ClassId>{}), DomainError);
  // A class absent from the truth labels is left out of the mean.
  CHECK(per_class_top1(pred, truth, std::vector<ClassId>{1, 2, 3}) == doctest::Approx(0.5));
}

TEST_CASE("per-class top-1 equals a brute-force tally and ignores order") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClassId> truth, pred;
    for (int i = 0; i < 60; ++i) {
      truth.push_back(static_cast<ClassId>(1 + rng.below(3)));
      pred.push_back(static_cast<ClassId>(1 + rng.below(3)));
    }
    double total = 0;
    int present = 0;
    for (ClassId c = 1; c <= 3; ++c) {
      int n = 0, hit = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != c) continue;
        ++n;
        hit += pred[i] == c;
      }
      if (n == 0) continue;
      total += double(hit) / n;
      ++present;
    }
    const std::vector<ClassId> classes = {1, 2, 3};
    const double got = per_class_top1(pred, truth, classes);
    CHECK(got == doctest::Approx(total / present));
    std::reverse(truth.begin(), truth.end());
    std::reverse(pred.begin(), pred.end());
    CHECK(per_class_top1(pred, truth, classes) == got);
  }
}
