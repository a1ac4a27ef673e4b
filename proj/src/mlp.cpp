#include "cegzsl/mlp.hpp"

#include <cmath>
#include <limits>

namespace cegzsl {

namespace {

thread_local KinkProbe* active_probe = nullptr;

template <class T>
void record_kinks(const Matrix<T>& pre) {
  if (active_probe == nullptr) return;
  auto& s = active_probe->signs;
  s.reserve(s.size() + pre.size());
  for (T v : pre.values()) s.push_back(v > T{0} ? 1 : (v < T{0} ? -1 : 0));
}

constexpr double kNormFloor = 1e-12;

}  // namespace

void record_kink_sign(double pre) {
  if (active_probe == nullptr) return;
  active_probe->signs.push_back(pre > 0.0 ? 1 : (pre < 0.0 ? -1 : 0));
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::affine: return "affine";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::l2_normalize_rows: return "l2_normalize_rows";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  if (in_dim == 0 || out_dim == 0) {
    throw ShapeError(to_string(kind) + " layer needs positive dims");
  }
  if (kind != LayerKind::affine && in_dim != out_dim) {
    throw ShapeError(to_string(kind) + " layer must preserve its width");
  }
  if (kind == LayerKind::leaky_relu && !(slope > 0.0 && slope < 1.0)) {
    throw DomainError("leaky_relu slope must lie in (0, 1)");
  }
}

ScopedKinkProbe::ScopedKinkProbe(KinkProbe& probe) : previous_(active_probe) {
  active_probe = &probe;
}

ScopedKinkProbe::~ScopedKinkProbe() { active_probe = previous_; }

template <class T>
Mlp<T>::Mlp(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("an Mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].validate();
    if (i > 0 && layers_[i - 1].out_dim != layers_[i].in_dim) {
      throw ShapeError("layer " + std::to_string(i) + " expects width " +
                       std::to_string(layers_[i].in_dim) + " but receives " +
                       std::to_string(layers_[i - 1].out_dim));
    }
    if (layers_[i].kind == LayerKind::affine) {
      params_.emplace_back(layers_[i].in_dim, layers_[i].out_dim);
      params_.emplace_back(1, layers_[i].out_dim);
    }
  }
}

template <class T>
void Mlp<T>::init(Rng& rng) {
  std::size_t p = 0;
  for (const auto& layer : layers_) {
    if (layer.kind != LayerKind::affine) continue;
    const double sd = std::sqrt(2.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    for (auto& w : params_[p].value.values()) w = static_cast<T>(sd * rng.normal());
    params_[p + 1].value.fill(T{0});
    p += 2;
  }
}

template <class T>
std::size_t Mlp<T>::in_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim;
}

template <class T>
std::size_t Mlp<T>::out_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim;
}

template <class T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
void Mlp<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <class T>
Matrix<T> Mlp<T>::run(const Matrix<T>& input, std::vector<Matrix<T>>* activations) const {
  if (input.cols() != in_dim()) {
    throw ShapeError("Mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(in_dim()));
  }
  Matrix<T> x = input;
  std::size_t p = 0;
  for (const auto& layer : layers_) {
    if (activations) activations->push_back(x);
    switch (layer.kind) {
      case LayerKind::affine: {
        Matrix<T> y = matmul(x, params_[p].value);
        const auto& b = params_[p + 1].value;
        for (std::size_t i = 0; i < y.rows(); ++i) {
          auto r = y.row(i);
          for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
        }
        x = std::move(y);
        p += 2;
        break;
      }
      case LayerKind::leaky_relu: {
        record_kinks(x);
        const T slope = static_cast<T>(layer.slope);
        for (auto& v : x.values()) v = v >= T{0} ? v : slope * v;
        break;
      }
      case LayerKind::relu: {
        record_kinks(x);
        for (auto& v : x.values()) v = v >= T{0} ? v : T{0};
        break;
      }
      case LayerKind::sigmoid: {
        for (auto& v : x.values()) {
          v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
        }
        break;
      }
      case LayerKind::l2_normalize_rows: {
        for (std::size_t i = 0; i < x.rows(); ++i) {
          auto r = x.row(i);
          T ss{0};
          for (T v : r) ss += v * v;
          const T norm = std::max(std::sqrt(ss), static_cast<T>(kNormFloor));
          for (auto& v : r) v /= norm;
        }
        break;
      }
    }
  }
  if (activations) activations->push_back(x);
  return x;
}

template <class T>
Matrix<T> Mlp<T>::forward(const Matrix<T>& input) {
  std::vector<Matrix<T>> acts;
  acts.reserve(layers_.size() + 1);
  Matrix<T> out = run(input, &acts);
  tape_ = std::move(acts);
  return out;
}

template <class T>
Matrix<T> Mlp<T>::predict(const Matrix<T>& input) const {
  return run(input, nullptr);
}

template <class T>
Matrix<T> Mlp<T>::backward(const Matrix<T>& upstream) {
  if (!tape_) throw StateError("backward called without a retained forward tape");
  const auto& acts = *tape_;
  if (!upstream.same_shape(acts.back())) {
    throw ShapeError("upstream gradient " + shape_str(upstream) + " does not match output " +
                     shape_str(acts.back()));
  }
  Matrix<T> g = upstream;
  std::size_t p = params_.size();
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const Matrix<T>& in = acts[li];
    const Matrix<T>& out = acts[li + 1];
    switch (layer.kind) {
      case LayerKind::affine: {
        p -= 2;
        add_inplace(params_[p].grad, matmul_tn(in, g));
        auto& bg = params_[p + 1].grad;
        for (std::size_t i = 0; i < g.rows(); ++i) {
          auto r = g.row(i);
          for (std::size_t j = 0; j < r.size(); ++j) bg[j] += r[j];
        }
        g = matmul_nt(g, params_[p].value);
        break;
      }
      case LayerKind::leaky_relu: {
        // Subgradient at exactly zero is the positive-side slope.
        const T slope = static_cast<T>(layer.slope);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in[i] < T{0}) g[i] *= slope;
        }
        break;
      }
      case LayerKind::relu: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in[i] < T{0}) g[i] = T{0};
        }
        break;
      }
      case LayerKind::sigmoid: {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= out[i] * (T{1} - out[i]);
        break;
      }
      case LayerKind::l2_normalize_rows: {
        for (std::size_t i = 0; i < g.rows(); ++i) {
          auto x = in.row(i);
          auto y = out.row(i);
          auto gr = g.row(i);
          T ss{0}, dot{0};
          for (std::size_t j = 0; j < x.size(); ++j) {
            ss += x[j] * x[j];
            dot += y[j] * gr[j];
          }
          const T norm = std::sqrt(ss);
          if (norm < static_cast<T>(kNormFloor)) {
            for (auto& v : gr) v /= static_cast<T>(kNormFloor);
            continue;
          }
          for (std::size_t j = 0; j < x.size(); ++j) gr[j] = (gr[j] - y[j] * dot) / norm;
        }
        break;
      }
    }
  }
  tape_.reset();
  return g;
}

template class Mlp<float>;
template class Mlp<double>;

template <class T>
Matrix<T> row_log_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    auto o = out.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (T v : r) mx = std::max(mx, v);
    T s{0};
    for (T v : r) s += std::exp(v - mx);
    const T lse = mx + std::log(s);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] = r[j] - lse;
  }
  return out;
}

template <class T>
Matrix<T> row_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    auto o = out.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (T v : r) mx = std::max(mx, v);
    T s{0};
    for (std::size_t j = 0; j < r.size(); ++j) {
      o[j] = std::exp(r[j] - mx);
      s += o[j];
    }
    for (auto& v : o) v /= s;
  }
  return out;
}

template <class T>
T softmax_cross_entropy(const Matrix<T>& logits, std::span<const std::size_t> targets,
                        Matrix<T>* grad) {
  if (targets.size() != logits.rows()) throw ShapeError("one target per logit row required");
  if (logits.rows() == 0) throw DomainError("cross-entropy of an empty batch");
  const Matrix<T> logp = row_log_softmax(logits);
  const T inv_n = T{1} / static_cast<T>(logits.rows());
  T loss{0};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (targets[i] >= logits.cols()) throw DomainError("target class out of range");
    loss -= logp(i, targets[i]);
  }
  if (grad) {
    *grad = Matrix<T>(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      for (std::size_t j = 0; j < logits.cols(); ++j) {
        (*grad)(i, j) = std::exp(logp(i, j)) * inv_n;
      }
      (*grad)(i, targets[i]) -= inv_n;
    }
  }
  return loss * inv_n;
}

template <class T>
void adam_step(std::span<Param<T>> params, const AdamConfig& cfg) {
  for (const auto& p : params) {
    if (!all_finite(p.grad)) throw NumericsError("non-finite gradient reached the optimizer");
  }
  for (auto& p : params) {
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
    const T lr = static_cast<T>(cfg.lr);
    const T eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      p.moment1[i] = b1 * p.moment1[i] + (T{1} - b1) * g;
      p.moment2[i] = b2 * p.moment2[i] + (T{1} - b2) * g * g;
      const T mhat = p.moment1[i] / c1;
      const T vhat = p.moment2[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    p.zero_grad();
  }
}

template Matrix<float> row_softmax(const Matrix<float>&);
template Matrix<double> row_softmax(const Matrix<double>&);
template Matrix<float> row_log_softmax(const Matrix<float>&);
template Matrix<double> row_log_softmax(const Matrix<double>&);
template float softmax_cross_entropy(const Matrix<float>&, std::span<const std::size_t>,
                                     Matrix<float>*);
template double softmax_cross_entropy(const Matrix<double>&, std::span<const std::size_t>,
                                      Matrix<double>*);
template void adam_step(std::span<Param<float>>, const AdamConfig&);
template void adam_step(std::span<Param<double>>, const AdamConfig&);

}  // namespace cegzsl
