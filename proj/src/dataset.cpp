#include "cegzsl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cegzsl/rng.hpp"

namespace cegzsl {

Mat SemanticTable::rows_for(std::span<const ClassId> ids) const {
  Mat out(ids.size(), dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 1 || ids[i] > class_count()) {
      throw DomainError("class id " + std::to_string(ids[i]) + " is not in the semantic table");
    }
    auto src = descriptors.row(ids[i] - 1);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void SemanticTable::validate() const {
  if (seen_count < 1 || unseen_count < 1) {
    throw DomainError("a GZSL split needs at least one seen and one unseen class");
  }
  if (descriptors.rows() != class_count()) {
    throw ShapeError("semantic table has " + std::to_string(descriptors.rows()) +
                     " rows for S+U=" + std::to_string(class_count()));
  }
  if (dim() == 0) throw ShapeError("semantic descriptors have zero width");
  if (!all_finite(descriptors)) throw DomainError("semantic descriptors contain NaN/Inf");
  std::set<std::vector<float>> distinct;
  for (std::size_t i = 0; i < descriptors.rows(); ++i) {
    auto r = descriptors.row(i);
    if (!distinct.emplace(r.begin(), r.end()).second) {
      throw DomainError("class " + std::to_string(i + 1) + " duplicates another descriptor");
    }
  }
}

namespace {

void check_partition(const Mat& x, const std::vector<ClassId>& y, std::size_t d_x,
                     const char* name) {
  if (x.rows() != y.size()) {
    throw ShapeError(std::string(name) + ": " + std::to_string(x.rows()) + " rows but " +
                     std::to_string(y.size()) + " labels");
  }
  if (x.rows() > 0 && x.cols() != d_x) {
    throw ShapeError(std::string(name) + ": feature width " + std::to_string(x.cols()) +
                     " differs from train width " + std::to_string(d_x));
  }
  if (!all_finite(x)) throw DomainError(std::string(name) + " contains NaN/Inf");
}

}  // namespace

void FeatureDataset::validate() const {
  semantic.validate();
  const std::size_t d_x = train_x.cols();
  if (train_x.rows() == 0 || d_x == 0) throw ShapeError("training partition is empty");
  check_partition(train_x, train_y, d_x, "train");
  check_partition(test_seen_x, test_seen_y, d_x, "test_seen");
  check_partition(test_unseen_x, test_unseen_y, d_x, "test_unseen");
  for (ClassId y : train_y) {
    if (!semantic.is_seen(y)) {
      throw SplitViolation("train label " + std::to_string(y) + " is outside the seen range 1.." +
                           std::to_string(semantic.seen_count));
    }
  }
  for (ClassId y : test_seen_y) {
    if (!semantic.is_seen(y)) {
      throw SplitViolation("test_seen label " + std::to_string(y) + " is not a seen class");
    }
  }
  for (ClassId y : test_unseen_y) {
    if (!semantic.is_unseen(y)) {
      throw SplitViolation("test_unseen label " + std::to_string(y) + " is not an unseen class");
    }
  }
}

void SyntheticWorldSpec::validate() const {
  if (seen < 1 || unseen < 1) throw DomainError("synthetic world needs S >= 1 and U >= 1");
  if (feature_dim == 0 || attr_dim == 0) throw DomainError("synthetic world dims must be positive");
  if (feature_dim < attr_dim) throw DomainError("synthetic world requires d_x >= d_a");
  if (n_per_class < 1) throw DomainError("n_per_class must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw DomainError("noise_sigma must be finite and non-negative");
  }
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw DomainError("train_fraction must lie in (0, 1]");
  }
  if (!map_weight.empty() &&
      (map_weight.rows() != attr_dim || map_weight.cols() != feature_dim)) {
    throw ShapeError("explicit class map weight must be d_a x d_x");
  }
  if (!map_bias.empty() && (map_bias.rows() != 1 || map_bias.cols() != feature_dim)) {
    throw ShapeError("explicit class map bias must be 1 x d_x");
  }
}

namespace {

ClassId nearest_mean(std::span<const float> x, const Mat& means) {
  ClassId best = 1;
  double best_d = INFINITY;
  for (std::size_t c = 0; c < means.rows(); ++c) {
    auto m = means.row(c);
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = static_cast<double>(x[j]) - m[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<ClassId>(c + 1);
    }
  }
  return best;
}

}  // namespace

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec) {
  spec.validate();
  const std::size_t classes = spec.seen + spec.unseen;
  const Rng root(spec.seed);
  Rng attr_rng = root.fork(1);
  Rng map_rng = root.fork(2);
  Rng noise_rng = root.fork(3);

  SyntheticWorld world;
  Mat descriptors(classes, spec.attr_dim);
  for (auto& v : descriptors.values()) v = static_cast<float>(attr_rng.uniform());

  world.map_weight = spec.map_weight;
  world.map_bias = spec.map_bias;
  if (world.map_weight.empty()) {
    world.map_weight = Mat(spec.attr_dim, spec.feature_dim);
    for (auto& v : world.map_weight.values()) v = static_cast<float>(spec.map_scale * map_rng.normal());
  }
  if (world.map_bias.empty()) {
    world.map_bias = Mat(1, spec.feature_dim);
    for (auto& v : world.map_bias.values()) v = static_cast<float>(spec.map_offset + map_rng.normal());
  }
  world.class_means = matmul(descriptors, world.map_weight);
  for (std::size_t c = 0; c < classes; ++c) {
    auto r = world.class_means.row(c);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += world.map_bias[j];
  }

  auto& ds = world.dataset;
  ds.semantic = SemanticTable{descriptors, spec.seen, spec.unseen};
  const auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(spec.n_per_class)));
  std::vector<float> train, test_seen, test_unseen;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto id = static_cast<ClassId>(c + 1);
    const bool seen = c < spec.seen;
    for (std::size_t n = 0; n < spec.n_per_class; ++n) {
      std::vector<float>* dst;
      if (!seen) {
        dst = &test_unseen;
        ds.test_unseen_y.push_back(id);
      } else if (n < n_train) {
        dst = &train;
        ds.train_y.push_back(id);
      } else {
        dst = &test_seen;
        ds.test_seen_y.push_back(id);
      }
      for (float m : world.class_means.row(c)) {
        dst->push_back(static_cast<float>(m + spec.noise_sigma * noise_rng.normal()));
      }
    }
  }
  const std::size_t d = spec.feature_dim;
  auto to_matrix = [d](std::vector<float>& v) {
    const std::size_t rows = v.size() / d;
    return Mat(rows, d, std::move(v));
  };
  ds.train_x = to_matrix(train);
  ds.test_seen_x = to_matrix(test_seen);
  ds.test_unseen_x = to_matrix(test_unseen);

  auto oracle = [&](const Mat& x, const std::vector<ClassId>& y, std::span<const ClassId> set) {
    if (y.empty()) return 0.0;
    std::vector<ClassId> pred(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) pred[i] = nearest_mean(x.row(i), world.class_means);
    return per_class_top1(pred, y, set);
  };
  const auto seen_set = seen_ids(ds.semantic);
  const auto unseen_set = unseen_ids(ds.semantic);
  world.oracle_seen_acc = oracle(ds.test_seen_x, ds.test_seen_y, seen_set);
  world.oracle_unseen_acc = oracle(ds.test_unseen_x, ds.test_unseen_y, unseen_set);
  ds.validate();
  return world;
}

std::vector<std::pair<ClassId, double>> per_class_accuracy(std::span<const ClassId> pred,
                                                           std::span<const ClassId> truth,
                                                           std::span<const ClassId> class_set) {
  if (pred.size() != truth.size()) throw ShapeError("predictions and labels are not aligned");
  std::map<ClassId, std::pair<std::size_t, std::size_t>> tally;  // id -> (hits, total)
  for (ClassId c : class_set) tally.emplace(c, std::pair<std::size_t, std::size_t>{0, 0});
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto it = tally.find(truth[i]);
    if (it == tally.end()) continue;
    ++it->second.second;
    if (pred[i] == truth[i]) ++it->second.first;
  }
  std::vector<std::pair<ClassId, double>> out;
  for (const auto& [id, ht] : tally) {
    if (ht.second == 0) continue;
    out.emplace_back(id, static_cast<double>(ht.first) / static_cast<double>(ht.second));
  }
  return out;
}

double per_class_top1(std::span<const ClassId> pred, std::span<const ClassId> truth,
                      std::span<const ClassId> class_set) {
  if (class_set.empty()) throw DomainError("per-class accuracy over an empty class set");
  const auto acc = per_class_accuracy(pred, truth, class_set);
  if (acc.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [id, a] : acc) s += a;
  return s / static_cast<double>(acc.size());
}

std::vector<ClassId> seen_ids(const SemanticTable& t) {
  std::vector<ClassId> v(t.seen_count);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<ClassId>(i + 1);
  return v;
}

std::vector<ClassId> unseen_ids(const SemanticTable& t) {
  std::vector<ClassId> v(t.unseen_count);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<ClassId>(t.seen_count + i + 1);
  return v;
}

std::vector<ClassId> all_ids(const SemanticTable& t) {
  std::vector<ClassId> v(t.class_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<ClassId>(i + 1);
  return v;
}

}  // namespace cegzsl
