#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cegzsl/matrix.hpp"

namespace cegzsl {

// Class ids are 1-based: 1..S are seen classes, S+1..S+U unseen.
using ClassId = std::uint32_t;

struct SemanticTable {
  Mat descriptors;  // (S+U) x d_a, seen rows first
  std::size_t seen_count = 0;
  std::size_t unseen_count = 0;

  std::size_t class_count() const { return seen_count + unseen_count; }
  std::size_t dim() const { return descriptors.cols(); }
  bool is_seen(ClassId id) const { return id >= 1 && id <= seen_count; }
  bool is_unseen(ClassId id) const { return id > seen_count && id <= class_count(); }

  Mat seen() const { return slice_rows(descriptors, 0, seen_count); }
  Mat unseen() const { return slice_rows(descriptors, seen_count, unseen_count); }
  // One descriptor row per id.
  Mat rows_for(std::span<const ClassId> ids) const;

  void validate() const;

  friend bool operator==(const SemanticTable&, const SemanticTable&) = default;
};

struct FeatureDataset {
  Mat train_x;
  std::vector<ClassId> train_y;
  Mat test_seen_x;
  std::vector<ClassId> test_seen_y;
  Mat test_unseen_x;
  std::vector<ClassId> test_unseen_y;
  SemanticTable semantic;

  std::size_t feature_dim() const { return train_x.cols(); }
  std::size_t seen_count() const { return semantic.seen_count; }
  std::size_t unseen_count() const { return semantic.unseen_count; }

  // Throws ShapeError / SplitViolation / DomainError on any breach.
  void validate() const;

  friend bool operator==(const FeatureDataset&, const FeatureDataset&) = default;
};

enum class DatasetFormat { gzb, csv_bundle };

// A directory is a csv-bundle; anything else is read as gzb.
DatasetFormat detect_format(const std::string& path);

FeatureDataset load_dataset(const std::string& path, DatasetFormat format);
FeatureDataset load_dataset(const std::string& path);
void save_dataset(const FeatureDataset& ds, const std::string& path, DatasetFormat format);

std::vector<std::uint8_t> encode_gzb(const FeatureDataset& ds);
FeatureDataset decode_gzb(std::span<const std::uint8_t> bytes);

struct SyntheticWorldSpec {
  std::size_t seen = 7;
  std::size_t unseen = 3;
  std::size_t feature_dim = 32;
  std::size_t attr_dim = 8;
  std::size_t n_per_class = 100;
  double noise_sigma = 0.5;
  // Descriptor-to-mean map: mean = a W + b with W ~ N(0, map_scale^2) and
  // b ~ map_offset + N(0, 1). Used unless an explicit map is supplied.
  double map_scale = 1.0;
  double map_offset = 4.0;
  Mat map_weight;  // optional explicit d_a x d_x
  Mat map_bias;    // optional explicit 1 x d_x
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticWorld {
  FeatureDataset dataset;
  Mat map_weight;
  Mat map_bias;
  Mat class_means;  // (S+U) x d_x
  // Per-class top-1 of a nearest-true-mean classifier over all S+U classes.
  double oracle_seen_acc = 0.0;
  double oracle_unseen_acc = 0.0;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec);

// Mean over `class_set` of within-class accuracy. Classes with no instance in
// `truth` are left out of the mean. Throws DomainError for an empty class set.
double per_class_top1(std::span<const ClassId> pred, std::span<const ClassId> truth,
                      std::span<const ClassId> class_set);

// Per-class accuracy for every class of `class_set` present in `truth`.
std::vector<std::pair<ClassId, double>> per_class_accuracy(std::span<const ClassId> pred,
                                                           std::span<const ClassId> truth,
                                                           std::span<const ClassId> class_set);

std::vector<ClassId> seen_ids(const SemanticTable& t);
std::vector<ClassId> unseen_ids(const SemanticTable& t);
std::vector<ClassId> all_ids(const SemanticTable& t);

}  // namespace cegzsl
