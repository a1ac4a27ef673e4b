#pragma once

#include <string>
#include <vector>

#include "cegzsl/embedding.hpp"
#include "cegzsl/generation.hpp"

namespace cegzsl {

// Training objectives, named by the ablation rows they reproduce.
//   gen_only     adversarial term only; classify in feature space
//   se_only      ranking loss on real features only; no generator
//   se_basic     adversarial + ranking losses, embedding = descriptor space
//   se_embed     adversarial + ranking losses scored by F in a new space
//   ce_ins_only  adversarial + instance-level contrastive
//   ce_cls_only  adversarial + class-level contrastive
//   ce_full      adversarial + both contrastive losses
enum class Mode { gen_only, se_only, se_basic, se_embed, ce_ins_only, ce_cls_only, ce_full };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
const std::vector<Mode>& all_modes();

struct ModeTraits {
  bool generator = false;   // G and D are trained
  bool embedding = false;   // E is trained
  bool ranking = false;     // ranking losses on real and synthetic rows
  bool ranking_by_comparator = false;
  bool instance = false;    // H is trained
  bool classwise = false;   // class-level contrastive through F
  bool comparator() const { return classwise || ranking_by_comparator; }
  // Embedding output is the descriptor space.
  bool semantic_space = false;
};

ModeTraits traits(Mode m);

// The five networks. Unused members for a mode stay default-constructed.
template <class T>
struct Nets {
  GeneratorNet<T> g;
  DiscriminatorNet<T> d;
  Mlp<T> e;
  Mlp<T> h;
  Comparator<T> f;

  template <class U>
  Nets<U> cast() const {
    return {g.template cast<U>(), d.template cast<U>(), e.template cast<U>(), h.template cast<U>(),
            f.template cast<U>()};
  }
};

// Everything one optimization step consumes, with all randomness already
// drawn so the objective is a deterministic function of the parameters.
template <class T>
struct StepBatch {
  Matrix<T> real_x;                      // B x d_x
  std::vector<std::size_t> labels;       // 0-based seen index per real row
  Matrix<T> real_a;                      // descriptors of `labels`
  Matrix<T> noise;                       // B x d_noise; synthetic rows copy `labels`
  std::vector<std::size_t> neg_real;     // ranking negatives (0-based seen)
  std::vector<std::size_t> neg_fake;
  std::vector<InstanceTask> tasks;       // rows index [real ; synthetic]
  Matrix<T> seen_a;                      // S x d_a

  template <class U>
  StepBatch<U> cast() const {
    return {real_x.template cast<U>(), labels, real_a.template cast<U>(), noise.template cast<U>(),
            neg_real, neg_fake, tasks, seen_a.template cast<U>()};
  }
};

struct ObjectiveOptions {
  Mode mode = Mode::ce_full;
  LossParams loss;
  GeneratorLoss generator_loss = GeneratorLoss::minimax;
};

struct ObjectiveTerms {
  double V = 0.0;      // adversarial value on this batch
  double adv_g = 0.0;  // generator-side adversarial term (V for minimax)
  double L_se_real = 0.0;
  double L_se_sync = 0.0;
  double L_ins = 0.0;
  double L_cls = 0.0;

  double total() const { return adv_g + L_se_real + L_se_sync + L_ins + L_cls; }
};

// Generator-side objective of the mode (minimised over G, E, H, F). With
// `backprop`, gradients accumulate into the trainable networks of the mode;
// D's gradients are left zeroed.
template <class T>
ObjectiveTerms generator_side_objective(Nets<T>& nets, const StepBatch<T>& batch,
                                        const ObjectiveOptions& opt, bool backprop);

// Adversarial value V with the generator frozen. With `backprop`, D's
// gradients receive d(-V)/d(theta_D).
template <class T>
double discriminator_objective(Nets<T>& nets, const StepBatch<T>& batch, bool backprop);

// V + ranking(real) + ranking(synthetic) in descriptor space.
template <class T>
double total_loss_basic(Nets<T>& nets, const StepBatch<T>& batch, const LossParams& loss);

// V + instance + class contrastive terms; `mode` selects ce_full or one of
// the single-term ablations.
template <class T>
double total_loss_ce(Nets<T>& nets, const StepBatch<T>& batch, const LossParams& loss,
                     Mode mode = Mode::ce_full);

}  // namespace cegzsl
