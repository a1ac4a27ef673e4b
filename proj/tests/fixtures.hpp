#pragma once

#include <filesystem>
#include <string>

#include "cegzsl/trainer.hpp"

namespace fixture {

using namespace cegzsl;

struct Dims {
  std::size_t d_x = 6, d_a = 4, seen = 4, rows = 8, noise = 3, hidden = 8, d_h = 5, d_z = 4;
  double slope = 0.2;
};

inline void jitter_biases(Mlp<float>& net, Rng& rng, double scale = 0.1) {
  for (std::size_t i = 1; i < net.params().size(); i += 2) {
    for (auto& v : net.params()[i].value.values()) v = static_cast<float>(scale * rng.normal());
  }
}

// Every network, randomly initialized, biases nonzero.
inline Nets<float> random_nets(const Dims& d, Rng& rng) {
  Nets<float> n;
  n.g = make_generator(d.d_a, d.noise, d.hidden, d.d_x, d.slope, rng);
  n.d = make_discriminator(d.d_x, d.d_a, d.hidden, d.slope, rng);
  n.e = make_embed_net(d.d_x, d.d_h, d.slope, rng);
  n.h = make_projection_head(d.d_h, d.d_z, d.slope, rng);
  n.f = make_comparator(d.d_h, d.d_a, d.hidden, d.slope, rng);
  for (Mlp<float>* m : {&n.g.net, &n.d.net, &n.e, &n.h, &n.f.net}) jitter_biases(*m, rng);
  return n;
}

// Embedding width must equal d_a when the mode scores by dot product.
inline Nets<float> random_nets_for(Mode m, Dims d, Rng& rng) {
  if (traits(m).semantic_space) d.d_h = d.d_a;
  return random_nets(d, rng);
}

inline Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double lo = -1, double hi = 1) {
  Mat m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

inline StepBatch<float> random_batch(const Dims& d, Rng& rng) {
  StepBatch<float> b;
  b.seen_a = random_mat(d.seen, d.d_a, rng);
  b.real_x = random_mat(d.rows, d.d_x, rng, 0, 2);
  b.labels.resize(d.rows);
  for (std::size_t i = 0; i < d.rows; ++i) b.labels[i] = i < 2 ? 0 : rng.below(d.seen);
  b.labels[2] = 1;
  b.real_a = gather_rows(b.seen_a, std::span<const std::size_t>(b.labels));
  b.noise = draw_noise(d.rows, d.noise, rng);
  for (std::size_t i = 0; i < d.rows; ++i) {
    b.neg_real.push_back((b.labels[i] + 1 + rng.below(d.seen - 1)) % d.seen);
    b.neg_fake.push_back((b.labels[i] + 1 + rng.below(d.seen - 1)) % d.seen);
  }
  std::vector<ClassId> both;
  for (int k = 0; k < 2; ++k) {
    for (auto l : b.labels) both.push_back(static_cast<ClassId>(l + 1));
  }
  b.tasks = derive_instance_tasks(both, rng);
  return b;
}

inline std::vector<float> all_values(const Mlp<float>& m) {
  std::vector<float> out;
  for (const auto& p : m.params()) out.insert(out.end(), p.value.values().begin(), p.value.values().end());
  return out;
}

// The synthetic world used by the desk-scale trend checks.
inline SyntheticWorld world(std::uint64_t seed, std::size_t n = 100) {
  SyntheticWorldSpec s;
  s.seen = 7;
  s.unseen = 3;
  s.feature_dim = 32;
  s.attr_dim = 8;
  s.n_per_class = n;
  s.seed = seed;
  return make_synthetic_world(s);
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cegzsl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture
