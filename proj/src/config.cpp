#include "cegzsl/config.hpp"

#include "cegzsl/binary_io.hpp"

namespace cegzsl {

std::string to_string(SamplerKind s) {
  return s == SamplerKind::random_batch ? "random" : "pk";
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "random" || s == "random_batch") return SamplerKind::random_batch;
  if (s == "pk" || s == "pk_sampler") return SamplerKind::pk;
  throw ConfigError("unknown sampler '" + s + "' (expected random or pk)");
}

std::string to_string(GeneratorLoss g) {
  return g == GeneratorLoss::minimax ? "minimax" : "non_saturating";
}

GeneratorLoss generator_loss_from_string(const std::string& s) {
  if (s == "minimax") return GeneratorLoss::minimax;
  if (s == "non_saturating") return GeneratorLoss::non_saturating;
  throw ConfigError("unknown generator loss '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (sampler == SamplerKind::pk && (pk_positives < 1 || pk_negatives < 1)) {
    throw ConfigError("pk sampler needs P >= 1 and K >= 1");
  }
  if (embed_dim == 0 || proj_dim == 0 || hidden == 0) throw ConfigError("network widths must be positive");
  if (d_steps_per_g_step < 1) throw ConfigError("d_steps_per_g_step must be at least 1");
  if (!(lr >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer settings out of range");
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (classifier_batch < 1) throw ConfigError("classifier_batch must be positive");
  try {
    loss_params().validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"mode", to_string(c.mode)},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"embed_dim", c.embed_dim},
                     {"proj_dim", c.proj_dim},
                     {"noise_dim", c.noise_dim},
                     {"hidden", c.hidden},
                     {"tau_e", c.tau_e},
                     {"tau_s", c.tau_s},
                     {"margin_delta", c.margin_delta},
                     {"n_syn_per_unseen", c.n_syn_per_unseen},
                     {"d_steps_per_g_step", c.d_steps_per_g_step},
                     {"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"leaky_slope", c.leaky_slope},
                     {"minmax_features", c.minmax_features},
                     {"generator_loss", to_string(c.generator_loss)},
                     {"sampler", to_string(c.sampler)},
                     {"pk_positives", c.pk_positives},
                     {"pk_negatives", c.pk_negatives},
                     {"classifier_epochs", c.classifier_epochs},
                     {"classifier_batch", c.classifier_batch},
                     {"classifier_lr", c.classifier_lr},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "mode") c.mode = mode_from_string(value.get<std::string>());
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
      else if (key == "proj_dim") c.proj_dim = value.get<std::size_t>();
      else if (key == "noise_dim") c.noise_dim = value.get<std::size_t>();
      else if (key == "hidden") c.hidden = value.get<std::size_t>();
      else if (key == "tau_e") c.tau_e = value.get<double>();
      else if (key == "tau_s") c.tau_s = value.get<double>();
      else if (key == "margin_delta") c.margin_delta = value.get<double>();
      else if (key == "n_syn_per_unseen") c.n_syn_per_unseen = value.get<std::size_t>();
      else if (key == "d_steps_per_g_step") c.d_steps_per_g_step = value.get<std::size_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "leaky_slope") c.leaky_slope = value.get<double>();
      else if (key == "minmax_features") c.minmax_features = value.get<bool>();
      else if (key == "generator_loss") c.generator_loss = generator_loss_from_string(value.get<std::string>());
      else if (key == "sampler") c.sampler = sampler_from_string(value.get<std::string>());
      else if (key == "pk_positives") c.pk_positives = value.get<std::size_t>();
      else if (key == "pk_negatives") c.pk_negatives = value.get<std::size_t>();
      else if (key == "classifier_epochs") c.classifier_epochs = value.get<std::size_t>();
      else if (key == "classifier_batch") c.classifier_batch = value.get<std::size_t>();
      else if (key == "classifier_lr") c.classifier_lr = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

std::string config_json(const TrainConfig& c) {
  return nlohmann::json(c).dump();
}

std::uint64_t config_hash(const TrainConfig& c) {
  return binary::fnv1a(config_json(c));
}

TrainConfig paper_preset(const std::string& dataset) {
  TrainConfig c;
  c.embed_dim = 2048;
  c.proj_dim = 512;
  c.hidden = 4096;
  if (dataset == "AWA1") {
    c.batch_size = 4096;
    c.n_syn_per_unseen = 1800;
  } else if (dataset == "AWA2") {
    c.batch_size = 4096;
    c.n_syn_per_unseen = 2400;
    c.tau_e = 10.0;
    c.tau_s = 1.0;
  } else if (dataset == "CUB") {
    c.batch_size = 2048;
    c.n_syn_per_unseen = 300;
  } else if (dataset == "FLO") {
    c.batch_size = 3072;
    c.n_syn_per_unseen = 600;
    c.tau_s = 1.0;
  } else if (dataset == "SUN") {
    c.batch_size = 1024;
    c.n_syn_per_unseen = 100;
  } else {
    throw ConfigError("no preset for dataset '" + dataset + "'");
  }
  return c;
}

TrainConfig desk_preset() {
  TrainConfig c;
  c.lr = 1e-3;
  c.epochs = 200;
  c.batch_size = 64;
  c.d_steps_per_g_step = 5;
  c.generator_loss = GeneratorLoss::non_saturating;
  c.classifier_lr = 1e-2;
  c.tau_e = 1.0;
  c.tau_s = 1.0;
  return c;
}

}  // namespace cegzsl
