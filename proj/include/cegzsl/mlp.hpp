#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cegzsl/matrix.hpp"
#include "cegzsl/rng.hpp"

namespace cegzsl {

enum class LayerKind { affine, leaky_relu, relu, sigmoid, l2_normalize_rows };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::affine;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  double slope = 0.0;  // leaky_relu only

  static LayerSpec affine(std::size_t in, std::size_t out) {
    return {LayerKind::affine, in, out, 0.0};
  }
  static LayerSpec leaky_relu(std::size_t dim, double slope) {
    return {LayerKind::leaky_relu, dim, dim, slope};
  }
  static LayerSpec relu(std::size_t dim) { return {LayerKind::relu, dim, dim, 0.0}; }
  static LayerSpec sigmoid(std::size_t dim) { return {LayerKind::sigmoid, dim, dim, 0.0}; }
  static LayerSpec l2_normalize_rows(std::size_t dim) {
    return {LayerKind::l2_normalize_rows, dim, dim, 0.0};
  }

  void validate() const;
};

template <class T>
struct Param {
  Matrix<T> value;
  Matrix<T> grad;
  Matrix<T> moment1;
  Matrix<T> moment2;
  std::uint64_t step_count = 0;

  Param() = default;
  Param(std::size_t rows, std::size_t cols)
      : value(rows, cols), grad(rows, cols), moment1(rows, cols), moment2(rows, cols) {}

  void zero_grad() { grad.fill(T{0}); }

  template <class U>
  Param<U> cast() const {
    Param<U> p;
    p.value = value.template cast<U>();
    p.grad = grad.template cast<U>();
    p.moment1 = moment1.template cast<U>();
    p.moment2 = moment2.template cast<U>();
    p.step_count = step_count;
    return p;
  }
};

// Records the sign pattern of every pre-activation that enters a
// piecewise-linear layer. The gradient oracle compares patterns to detect
// finite-difference probes that straddle a kink.
struct KinkProbe {
  std::vector<std::int8_t> signs;
};

// Records the argument of a hinge-like kink outside the layer stack.
void record_kink_sign(double pre);

// Activates `probe` for forward passes on the current thread while alive.
class ScopedKinkProbe {
 public:
  explicit ScopedKinkProbe(KinkProbe& probe);
  ~ScopedKinkProbe();
  ScopedKinkProbe(const ScopedKinkProbe&) = delete;
  ScopedKinkProbe& operator=(const ScopedKinkProbe&) = delete;

 private:
  KinkProbe* previous_;
};

// Sequential stack of layers. Each affine layer owns a weight (in x out) and a
// bias (1 x out); the forward map for a row vector x is x W + b.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<LayerSpec> layers);

  // Glorot-normal weights, zero biases.
  void init(Rng& rng);

  // Forward pass that retains a tape for backward().
  Matrix<T> forward(const Matrix<T>& input);
  // Forward pass without a tape. Safe to call concurrently.
  Matrix<T> predict(const Matrix<T>& input) const;
  // Accumulates parameter gradients and returns d(loss)/d(input).
  // Consumes the tape; a second call needs a fresh forward().
  Matrix<T> backward(const Matrix<T>& upstream);

  bool has_tape() const { return tape_.has_value(); }
  void clear_tape() { tape_.reset(); }

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad();

  template <class U>
  Mlp<U> cast() const {
    Mlp<U> out(layers_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params()[i] = params_[i].template cast<U>();
    }
    return out;
  }

 private:
  Matrix<T> run(const Matrix<T>& input, std::vector<Matrix<T>>* activations) const;

  std::vector<LayerSpec> layers_;
  std::vector<Param<T>> params_;
  // activations[i] is the input of layer i; the last entry is the output.
  std::optional<std::vector<Matrix<T>>> tape_;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

// Row-wise softmax with max subtraction.
template <class T>
Matrix<T> row_softmax(const Matrix<T>& logits);

// Row-wise log-softmax with max subtraction.
template <class T>
Matrix<T> row_log_softmax(const Matrix<T>& logits);

// Mean cross-entropy of `logits` against 0-based class `targets`, with the
// gradient with respect to the logits.
template <class T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const std::size_t> targets,
                        Matrix<T>* grad);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected adaptive-moment step over every parameter; zeroes the
// gradients afterwards. Throws NumericsError before touching anything if a
// gradient is not finite.
template <class T>
void adam_step(std::span<Param<T>> params, const AdamConfig& cfg);

}  // namespace cegzsl
