#pragma once

#include <utility>
#include <vector>

#include "cegzsl/dataset.hpp"
#include "cegzsl/mlp.hpp"

namespace cegzsl {

// Conditional feature generator: [noise | descriptor] -> hidden -> features,
// with a final non-negativity clamp.
template <class T>
struct GeneratorNet {
  Mlp<T> net;
  std::size_t noise_dim = 0;
  std::size_t attr_dim = 0;

  std::size_t feature_dim() const { return net.out_dim(); }

  template <class U>
  GeneratorNet<U> cast() const {
    return {net.template cast<U>(), noise_dim, attr_dim};
  }
};

// Pair discriminator: [features | descriptor] -> hidden -> 1 -> sigmoid.
template <class T>
struct DiscriminatorNet {
  Mlp<T> net;
  std::size_t feature_dim = 0;
  std::size_t attr_dim = 0;

  template <class U>
  DiscriminatorNet<U> cast() const {
    return {net.template cast<U>(), feature_dim, attr_dim};
  }
};

GeneratorNet<float> make_generator(std::size_t attr_dim, std::size_t noise_dim,
                                   std::size_t hidden, std::size_t feature_dim, double slope,
                                   Rng& rng);
DiscriminatorNet<float> make_discriminator(std::size_t feature_dim, std::size_t attr_dim,
                                           std::size_t hidden, double slope, Rng& rng);

// rows x dim standard-normal matrix.
Mat draw_noise(std::size_t rows, std::size_t dim, Rng& rng);

// Deterministic generator map for an explicit noise matrix; no tape retained.
template <class T>
Matrix<T> generate_with_noise(const GeneratorNet<T>& g, const Matrix<T>& a, const Matrix<T>& noise);

// One synthetic feature row per descriptor row; noise is drawn per row.
Mat generate(const GeneratorNet<float>& g, const Mat& a, Rng& rng);

// Floor applied inside both logarithms of the adversarial value.
inline constexpr double kLogClamp = 1e-12;

enum class GeneratorLoss { minimax, non_saturating };

template <class T>
struct AdversarialValue {
  T value{};
  Matrix<T> grad_real;  // dV/dp for each real-pair probability
  Matrix<T> grad_fake;  // dV/dp for each synthetic-pair probability
};

// V = mean log D(real) + mean log(1 - D(fake)) from discriminator outputs.
template <class T>
AdversarialValue<T> adversarial_from_probs(const Matrix<T>& p_real, const Matrix<T>& p_fake);

// The generator-side adversarial term and its gradient w.r.t. the fake
// probabilities: mean log(1 - D) for minimax, -mean log D for the
// non-saturating variant.
template <class T>
T generator_adversarial_from_probs(const Matrix<T>& p_fake, GeneratorLoss kind, Matrix<T>* grad);

template <class T>
T adversarial_value(const DiscriminatorNet<T>& d, const Matrix<T>& real_x, const Matrix<T>& real_a,
                    const Matrix<T>& fake_x, const Matrix<T>& fake_a);

// One ascent step on V for the discriminator. Returns V before the step.
float discriminator_step(DiscriminatorNet<float>& d, const Mat& real_x, const Mat& real_a,
                         const Mat& fake_x, const Mat& fake_a, const AdamConfig& opt);

// One descent step on the generator-side adversarial term with D frozen.
// Returns the term before the step.
float generator_step(GeneratorNet<float>& g, DiscriminatorNet<float>& d, const Mat& a, Rng& rng,
                     GeneratorLoss kind, const AdamConfig& opt);

// E(G(a_u, noise)) rows for every unseen class, n_per_class each, with their
// class ids. A null `embed` means the identity map.
std::pair<Mat, std::vector<ClassId>> synthesize_unseen_embeddings(const GeneratorNet<float>& g,
                                                                  const Mlp<float>* embed,
                                                                  const SemanticTable& semantic,
                                                                  std::size_t n_per_class,
                                                                  Rng& rng);

}  // namespace cegzsl
