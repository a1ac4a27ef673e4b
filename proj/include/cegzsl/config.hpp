#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "cegzsl/embedding.hpp"
#include "cegzsl/generation.hpp"
#include "cegzsl/objective.hpp"

namespace cegzsl {

enum class SamplerKind { random_batch, pk };

std::string to_string(SamplerKind s);
SamplerKind sampler_from_string(const std::string& s);
std::string to_string(GeneratorLoss g);
GeneratorLoss generator_loss_from_string(const std::string& s);

// Every knob of a training run. Defaults are sized for the desk-scale
// synthetic benchmarks; paper_preset() returns the full-size architecture.
struct TrainConfig {
  Mode mode = Mode::ce_full;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::size_t embed_dim = 64;   // d_h
  std::size_t proj_dim = 32;    // d_z
  std::size_t noise_dim = 0;    // 0 means "same as d_a"
  std::size_t hidden = 128;     // hidden width of G, D and F
  double tau_e = 0.1;
  double tau_s = 0.1;
  double margin_delta = 1.0;
  std::size_t n_syn_per_unseen = 200;
  std::size_t d_steps_per_g_step = 1;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double leaky_slope = 0.2;
  // Rescale every feature column to [0, 1] using train_x's range.
  bool minmax_features = true;
  GeneratorLoss generator_loss = GeneratorLoss::minimax;
  SamplerKind sampler = SamplerKind::random_batch;
  std::size_t pk_positives = 1;   // P
  std::size_t pk_negatives = 50;  // K
  // Final softmax classifier.
  std::size_t classifier_epochs = 50;
  std::size_t classifier_batch = 256;
  double classifier_lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  LossParams loss_params() const { return {tau_e, tau_s, margin_delta}; }
  AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
  std::size_t resolved_noise_dim(std::size_t attr_dim) const {
    return noise_dim == 0 ? attr_dim : noise_dim;
  }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Stable serialization used for hashing and provenance.
std::string config_json(const TrainConfig& c);
std::uint64_t config_hash(const TrainConfig& c);

// Full-size architecture (d_h = 2048, d_z = 512, 4096-unit hidden layers) and
// the per-dataset batch size, synthesis count and best temperatures. Known names: AWA1, AWA2,
// CUB, FLO, SUN.
TrainConfig paper_preset(const std::string& dataset);

// Defaults retuned so the small synthetic worlds train in under a minute:
// larger learning rate, several discriminator steps, non-saturating
// generator loss, smaller batches, a faster final classifier and
// temperatures of 1.
TrainConfig desk_preset();

}  // namespace cegzsl
