#include "cegzsl/generation.hpp"

#include <cmath>

namespace cegzsl {

GeneratorNet<float> make_generator(std::size_t attr_dim, std::size_t noise_dim,
                                   std::size_t hidden, std::size_t feature_dim, double slope,
                                   Rng& rng) {
  if (noise_dim == 0) throw DomainError("generator noise_dim must be positive");
  GeneratorNet<float> g{Mlp<float>({LayerSpec::affine(noise_dim + attr_dim, hidden),
                                    LayerSpec::leaky_relu(hidden, slope),
                                    LayerSpec::affine(hidden, feature_dim),
                                    LayerSpec::relu(feature_dim)}),
                        noise_dim, attr_dim};
  g.net.init(rng);
  return g;
}

DiscriminatorNet<float> make_discriminator(std::size_t feature_dim, std::size_t attr_dim,
                                           std::size_t hidden, double slope, Rng& rng) {
  DiscriminatorNet<float> d{Mlp<float>({LayerSpec::affine(feature_dim + attr_dim, hidden),
                                        LayerSpec::leaky_relu(hidden, slope),
                                        LayerSpec::affine(hidden, 1), LayerSpec::sigmoid(1)}),
                            feature_dim, attr_dim};
  d.net.init(rng);
  return d;
}

Mat draw_noise(std::size_t rows, std::size_t dim, Rng& rng) {
  Mat n(rows, dim);
  for (auto& v : n.values()) v = static_cast<float>(rng.normal());
  return n;
}

template <class T>
Matrix<T> generate_with_noise(const GeneratorNet<T>& g, const Matrix<T>& a, const Matrix<T>& noise) {
  if (a.cols() != g.attr_dim) {
    throw ShapeError("generator expects descriptors of width " + std::to_string(g.attr_dim) +
                     ", got " + std::to_string(a.cols()));
  }
  if (noise.cols() != g.noise_dim || noise.rows() != a.rows()) {
    throw ShapeError("noise " + shape_str(noise) + " does not match descriptors " + shape_str(a));
  }
  return g.net.predict(concat_cols(noise, a));
}

Mat generate(const GeneratorNet<float>& g, const Mat& a, Rng& rng) {
  if (a.cols() != g.attr_dim) {
    throw ShapeError("generator expects descriptors of width " + std::to_string(g.attr_dim) +
                     ", got " + std::to_string(a.cols()));
  }
  return generate_with_noise(g, a, draw_noise(a.rows(), g.noise_dim, rng));
}

template <class T>
AdversarialValue<T> adversarial_from_probs(const Matrix<T>& p_real, const Matrix<T>& p_fake) {
  if (p_real.rows() == 0 || p_fake.rows() == 0) {
    throw DomainError("adversarial value needs real and synthetic pairs");
  }
  const T clamp = static_cast<T>(kLogClamp);
  AdversarialValue<T> out;
  out.grad_real = Matrix<T>(p_real.rows(), p_real.cols());
  out.grad_fake = Matrix<T>(p_fake.rows(), p_fake.cols());
  const T inv_r = T{1} / static_cast<T>(p_real.size());
  const T inv_f = T{1} / static_cast<T>(p_fake.size());
  T real_term{0}, fake_term{0};
  for (std::size_t i = 0; i < p_real.size(); ++i) {
    const T p = p_real[i];
    real_term += std::log(std::max(p, clamp));
    out.grad_real[i] = p > clamp ? inv_r / p : T{0};
  }
  for (std::size_t i = 0; i < p_fake.size(); ++i) {
    const T q = T{1} - p_fake[i];
    fake_term += std::log(std::max(q, clamp));
    out.grad_fake[i] = q > clamp ? -inv_f / q : T{0};
  }
  out.value = real_term * inv_r + fake_term * inv_f;
  if (!std::isfinite(out.value)) throw NumericsError("adversarial value is not finite");
  return out;
}

template <class T>
T generator_adversarial_from_probs(const Matrix<T>& p_fake, GeneratorLoss kind, Matrix<T>* grad) {
  if (p_fake.rows() == 0) throw DomainError("generator term needs synthetic pairs");
  const T clamp = static_cast<T>(kLogClamp);
  const T inv = T{1} / static_cast<T>(p_fake.size());
  if (grad) *grad = Matrix<T>(p_fake.rows(), p_fake.cols());
  T value{0};
  for (std::size_t i = 0; i < p_fake.size(); ++i) {
    const T p = p_fake[i];
    if (kind == GeneratorLoss::minimax) {
      const T q = T{1} - p;
      value += std::log(std::max(q, clamp));
      if (grad) (*grad)[i] = q > clamp ? -inv / q : T{0};
    } else {
      value -= std::log(std::max(p, clamp));
      if (grad) (*grad)[i] = p > clamp ? -inv / p : T{0};
    }
  }
  value *= inv;
  if (!std::isfinite(value)) throw NumericsError("generator adversarial term is not finite");
  return value;
}

template <class T>
T adversarial_value(const DiscriminatorNet<T>& d, const Matrix<T>& real_x, const Matrix<T>& real_a,
                    const Matrix<T>& fake_x, const Matrix<T>& fake_a) {
  const Matrix<T> p_real = d.net.predict(concat_cols(real_x, real_a));
  const Matrix<T> p_fake = d.net.predict(concat_cols(fake_x, fake_a));
  return adversarial_from_probs(p_real, p_fake).value;
}

float discriminator_step(DiscriminatorNet<float>& d, const Mat& real_x, const Mat& real_a,
                         const Mat& fake_x, const Mat& fake_a, const AdamConfig& opt) {
  const Mat input = concat_rows(concat_cols(real_x, real_a), concat_cols(fake_x, fake_a));
  const Mat p = d.net.forward(input);
  const auto adv = adversarial_from_probs(slice_rows(p, 0, real_x.rows()),
                                          slice_rows(p, real_x.rows(), fake_x.rows()));
  // Ascent on V is descent on -V.
  Mat g = concat_rows(adv.grad_real, adv.grad_fake);
  for (auto& v : g.values()) v = -v;
  d.net.zero_grad();
  d.net.backward(g);
  adam_step(std::span(d.net.params()), opt);
  return adv.value;
}

float generator_step(GeneratorNet<float>& g, DiscriminatorNet<float>& d, const Mat& a, Rng& rng,
                     GeneratorLoss kind, const AdamConfig& opt) {
  const Mat noise = draw_noise(a.rows(), g.noise_dim, rng);
  const Mat fake = g.net.forward(concat_cols(noise, a));
  const Mat p = d.net.forward(concat_cols(fake, a));
  Mat gp;
  const float value = generator_adversarial_from_probs(p, kind, &gp);
  const Mat g_in = d.net.backward(gp);
  d.net.zero_grad();
  g.net.zero_grad();
  g.net.backward(slice_cols(g_in, 0, fake.cols()));
  adam_step(std::span(g.net.params()), opt);
  return value;
}

std::pair<Mat, std::vector<ClassId>> synthesize_unseen_embeddings(const GeneratorNet<float>& g,
                                                                  const Mlp<float>* embed,
                                                                  const SemanticTable& semantic,
                                                                  std::size_t n_per_class,
                                                                  Rng& rng) {
  if (n_per_class < 1) throw DomainError("n_per_class must be at least 1");
  std::vector<ClassId> ids;
  ids.reserve(semantic.unseen_count * n_per_class);
  for (ClassId u : unseen_ids(semantic)) ids.insert(ids.end(), n_per_class, u);
  const Mat a = semantic.rows_for(ids);
  Mat x = generate(g, a, rng);
  if (embed) x = embed->predict(x);
  return {std::move(x), std::move(ids)};
}

template Matrix<float> generate_with_noise(const GeneratorNet<float>&, const Matrix<float>&,
                                           const Matrix<float>&);
template Matrix<double> generate_with_noise(const GeneratorNet<double>&, const Matrix<double>&,
                                            const Matrix<double>&);
template AdversarialValue<float> adversarial_from_probs(const Matrix<float>&, const Matrix<float>&);
template AdversarialValue<double> adversarial_from_probs(const Matrix<double>&,
                                                         const Matrix<double>&);
template float generator_adversarial_from_probs(const Matrix<float>&, GeneratorLoss, Matrix<float>*);
template double generator_adversarial_from_probs(const Matrix<double>&, GeneratorLoss,
                                                 Matrix<double>*);
template float adversarial_value(const DiscriminatorNet<float>&, const Matrix<float>&,
                                 const Matrix<float>&, const Matrix<float>&, const Matrix<float>&);
template double adversarial_value(const DiscriminatorNet<double>&, const Matrix<double>&,
                                  const Matrix<double>&, const Matrix<double>&,
                                  const Matrix<double>&);

}  // namespace cegzsl
