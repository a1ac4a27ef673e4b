#include "cegzsl/embedding.hpp"

#include <cmath>
#include <limits>

namespace cegzsl {

void LossParams::validate() const {
  if (!(tau_e > 0.0) || !std::isfinite(tau_e)) throw DomainError("tau_e must be positive");
  if (!(tau_s > 0.0) || !std::isfinite(tau_s)) throw DomainError("tau_s must be positive");
  if (!(margin_delta >= 0.0) || !std::isfinite(margin_delta)) {
    throw DomainError("margin_delta must be non-negative");
  }
}

Mlp<float> make_embed_net(std::size_t feature_dim, std::size_t embed_dim, double slope, Rng& rng) {
  if (embed_dim == 0) throw DomainError("embedding dim must be positive");
  Mlp<float> e({LayerSpec::affine(feature_dim, embed_dim), LayerSpec::leaky_relu(embed_dim, slope)});
  e.init(rng);
  return e;
}

Mlp<float> make_projection_head(std::size_t embed_dim, std::size_t proj_dim, double slope, Rng& rng) {
  Mlp<float> h({LayerSpec::affine(embed_dim, proj_dim), LayerSpec::leaky_relu(proj_dim, slope),
                LayerSpec::affine(proj_dim, proj_dim), LayerSpec::l2_normalize_rows(proj_dim)});
  h.init(rng);
  return h;
}

Comparator<float> make_comparator(std::size_t embed_dim, std::size_t attr_dim, std::size_t hidden,
                                  double slope, Rng& rng) {
  Comparator<float> f{Mlp<float>({LayerSpec::affine(embed_dim + attr_dim, hidden),
                                  LayerSpec::leaky_relu(hidden, slope),
                                  LayerSpec::affine(hidden, 1)}),
                      embed_dim, attr_dim};
  f.net.init(rng);
  return f;
}

namespace {

template <class T>
Matrix<T> all_pairs(const Matrix<T>& h, const Matrix<T>& a) {
  Matrix<T> in(h.rows() * a.rows(), h.cols() + a.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t s = 0; s < a.rows(); ++s) {
      auto dst = in.row(i * a.rows() + s);
      std::copy(h.row(i).begin(), h.row(i).end(), dst.begin());
      std::copy(a.row(s).begin(), a.row(s).end(), dst.begin() + h.cols());
    }
  }
  return in;
}

// log(sum exp(l_k)) with max subtraction.
template <class T>
T log_sum_exp(std::span<const T> l) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : l) mx = std::max(mx, v);
  T s{0};
  for (T v : l) s += std::exp(v - mx);
  return mx + std::log(s);
}

// -log softmax(l)_k. Summing (max - l_k) separately keeps large logits from
// swallowing the log term.
template <class T>
T neg_log_softmax_at(std::span<const T> l, std::size_t k) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : l) mx = std::max(mx, v);
  T s{0};
  for (T v : l) s += std::exp(v - mx);
  return (mx - l[k]) + std::log(s);
}

}  // namespace

template <class T>
Matrix<T> Comparator<T>::score_all(const Matrix<T>& h, const Matrix<T>& a) {
  if (h.cols() != embed_dim || a.cols() != attr_dim) {
    throw ShapeError("comparator expects h of width " + std::to_string(embed_dim) +
                     " and descriptors of width " + std::to_string(attr_dim));
  }
  taped_rows = h.rows();
  taped_descriptors = a.rows();
  const Matrix<T> s = net.forward(all_pairs(h, a));
  return Matrix<T>(h.rows(), a.rows(), std::vector<T>(s.values().begin(), s.values().end()));
}

template <class T>
Matrix<T> Comparator<T>::backward_all(const Matrix<T>& grad_scores) {
  if (grad_scores.rows() != taped_rows || grad_scores.cols() != taped_descriptors) {
    throw ShapeError("comparator score gradient does not match the taped pairs");
  }
  const Matrix<T> gin = net.backward(Matrix<T>(
      grad_scores.size(), 1, std::vector<T>(grad_scores.values().begin(), grad_scores.values().end())));
  Matrix<T> gh(taped_rows, embed_dim);
  for (std::size_t i = 0; i < taped_rows; ++i) {
    auto dst = gh.row(i);
    for (std::size_t s = 0; s < taped_descriptors; ++s) {
      auto src = gin.row(i * taped_descriptors + s);
      for (std::size_t j = 0; j < embed_dim; ++j) dst[j] += src[j];
    }
  }
  return gh;
}

template <class T>
Matrix<T> Comparator<T>::score_paired(const Matrix<T>& h, const Matrix<T>& a) {
  if (h.cols() != embed_dim || a.cols() != attr_dim || h.rows() != a.rows()) {
    throw ShapeError("comparator pairs " + shape_str(h) + " with " + shape_str(a));
  }
  taped_rows = h.rows();
  taped_descriptors = 1;
  return net.forward(concat_cols(h, a));
}

template <class T>
Matrix<T> Comparator<T>::backward_paired(const Matrix<T>& grad_scores) {
  return slice_cols(net.backward(grad_scores), 0, embed_dim);
}

template <class T>
Matrix<T> Comparator<T>::predict_all(const Matrix<T>& h, const Matrix<T>& a) const {
  if (h.cols() != embed_dim || a.cols() != attr_dim) throw ShapeError("comparator input widths");
  const Matrix<T> s = net.predict(all_pairs(h, a));
  return Matrix<T>(h.rows(), a.rows(), std::vector<T>(s.values().begin(), s.values().end()));
}

template struct Comparator<float>;
template struct Comparator<double>;

template <class T>
T ranking_hinge(std::span<const T> pos, std::span<const T> neg, T delta, std::vector<T>* grad_pos,
                std::vector<T>* grad_neg) {
  if (pos.size() != neg.size()) throw ShapeError("ranking loss needs one negative per positive");
  if (pos.empty()) throw DomainError("ranking loss over an empty batch");
  const T inv = T{1} / static_cast<T>(pos.size());
  if (grad_pos) grad_pos->assign(pos.size(), T{0});
  if (grad_neg) grad_neg->assign(pos.size(), T{0});
  T loss{0};
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const T m = delta - pos[i] + neg[i];
    record_kink_sign(static_cast<double>(m));
    if (m > T{0}) {
      loss += m;
      if (grad_pos) (*grad_pos)[i] = -inv;
      if (grad_neg) (*grad_neg)[i] = inv;
    }
  }
  return loss * inv;
}

template <class T>
LossGrad<T> ranking_loss_dot(const Matrix<T>& emb, const Matrix<T>& a_pos, const Matrix<T>& a_neg,
                             T delta) {
  if (!emb.same_shape(a_pos) || !emb.same_shape(a_neg)) {
    throw ShapeError("ranking loss: embedding " + shape_str(emb) + " vs descriptors " +
                     shape_str(a_pos) + " / " + shape_str(a_neg));
  }
  std::vector<T> pos(emb.rows()), neg(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    T sp{0}, sn{0};
    for (std::size_t j = 0; j < emb.cols(); ++j) {
      sp += a_pos(i, j) * emb(i, j);
      sn += a_neg(i, j) * emb(i, j);
    }
    pos[i] = sp;
    neg[i] = sn;
  }
  std::vector<T> gp, gn;
  LossGrad<T> out;
  out.value = ranking_hinge<T>(pos, neg, delta, &gp, &gn);
  out.grad = Matrix<T>(emb.rows(), emb.cols());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    for (std::size_t j = 0; j < emb.cols(); ++j) {
      out.grad(i, j) = gp[i] * a_pos(i, j) + gn[i] * a_neg(i, j);
    }
  }
  return out;
}

float ranking_loss_real(const Mlp<float>& e, const Mat& x, const Mat& a_pos, const Mat& a_neg,
                        float delta) {
  return ranking_loss_dot(e.predict(x), a_pos, a_neg, delta).value;
}

float ranking_loss_sync(const GeneratorNet<float>& g, const Mlp<float>& e,
                        const SemanticTable& semantic, std::span<const ClassId> pos_ids,
                        std::span<const ClassId> neg_ids, float delta, Rng& rng) {
  for (auto ids : {pos_ids, neg_ids}) {
    for (ClassId id : ids) {
      if (!semantic.is_seen(id)) {
        throw SplitViolation("synthetic ranking loss only takes seen-class descriptors; got class " +
                             std::to_string(id));
      }
    }
  }
  const Mat a_pos = semantic.rows_for(pos_ids);
  const Mat a_neg = semantic.rows_for(neg_ids);
  return ranking_loss_dot(e.predict(generate(g, a_pos, rng)), a_pos, a_neg, delta).value;
}

template <class T>
T instance_contrastive_loss(std::span<const T> z_i, std::span<const T> z_pos, const Matrix<T>& z_negs,
                            T tau) {
  if (z_negs.rows() == 0) throw DomainError("instance contrastive loss needs K >= 1 negatives");
  if (z_i.size() != z_pos.size() || z_negs.cols() != z_i.size()) {
    throw ShapeError("instance contrastive rows differ in width");
  }
  if (!(tau > T{0})) throw DomainError("temperature must be positive");
  auto dot = [](std::span<const T> a, std::span<const T> b) {
    T s{0};
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
  };
  std::vector<T> logits;
  logits.reserve(z_negs.rows() + 1);
  logits.push_back(dot(z_i, z_pos) / tau);
  for (std::size_t k = 0; k < z_negs.rows(); ++k) logits.push_back(dot(z_i, z_negs.row(k)) / tau);
  return neg_log_softmax_at<T>(logits, 0);
}

template <class T>
LossGrad<T> instance_contrastive_batch(const Matrix<T>& z, std::span<const InstanceTask> tasks, T tau) {
  if (!(tau > T{0})) throw DomainError("temperature must be positive");
  LossGrad<T> out;
  out.grad = Matrix<T>(z.rows(), z.cols());
  std::size_t pairs = 0;
  for (const auto& t : tasks) pairs += t.positives.size();
  if (pairs == 0) return out;
  const Matrix<T> sim = matmul_nt(z, z);
  const T inv = T{1} / static_cast<T>(pairs);
  std::vector<T> logits;
  for (const auto& t : tasks) {
    if (t.negatives.empty()) throw DomainError("instance task without negatives");
    const std::size_t i = t.anchor;
    for (std::size_t p : t.positives) {
      logits.clear();
      logits.push_back(sim(i, p) / tau);
      for (std::size_t n : t.negatives) logits.push_back(sim(i, n) / tau);
      const T lse = log_sum_exp<T>(logits);
      out.value += neg_log_softmax_at<T>(logits, 0) * inv;
      // d/dlogit_k = softmax_k - [k == positive]; each logit is z_i . z_k / tau.
      for (std::size_t k = 0; k < logits.size(); ++k) {
        const std::size_t other = k == 0 ? p : t.negatives[k - 1];
        const T w = (std::exp(logits[k] - lse) - (k == 0 ? T{1} : T{0})) * inv / tau;
        if (w == T{0}) continue;
        auto gi = out.grad.row(i);
        auto go = out.grad.row(other);
        auto zi = z.row(i);
        auto zo = z.row(other);
        for (std::size_t j = 0; j < z.cols(); ++j) {
          gi[j] += w * zo[j];
          go[j] += w * zi[j];
        }
      }
    }
  }
  if (!std::isfinite(out.value)) throw NumericsError("instance contrastive loss is not finite");
  return out;
}

template <class T>
LossGrad<T> class_contrastive_from_scores(const Matrix<T>& scores, std::span<const std::size_t> pos,
                                          T tau) {
  if (!(tau > T{0})) throw DomainError("temperature must be positive");
  if (pos.size() != scores.rows()) throw ShapeError("one positive column per score row required");
  if (scores.rows() == 0) throw DomainError("class contrastive loss over an empty batch");
  LossGrad<T> out;
  out.grad = Matrix<T>(scores.rows(), scores.cols());
  const T inv = T{1} / static_cast<T>(scores.rows());
  std::vector<T> logits(scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (pos[i] >= scores.cols()) throw DomainError("positive class index out of range");
    for (std::size_t s = 0; s < scores.cols(); ++s) logits[s] = scores(i, s) / tau;
    const T lse = log_sum_exp<T>(logits);
    out.value += neg_log_softmax_at<T>(logits, pos[i]) * inv;
    for (std::size_t s = 0; s < scores.cols(); ++s) {
      out.grad(i, s) = (std::exp(logits[s] - lse) - (s == pos[i] ? T{1} : T{0})) * inv / tau;
    }
  }
  if (!std::isfinite(out.value)) throw NumericsError("class contrastive loss is not finite");
  return out;
}

float class_contrastive_loss(const Comparator<float>& f, std::span<const float> h_i,
                             const Mat& a_all_seen, ClassId pos_id, float tau) {
  if (pos_id < 1 || pos_id > a_all_seen.rows()) {
    throw DomainError("positive class " + std::to_string(pos_id) + " is not among the " +
                      std::to_string(a_all_seen.rows()) + " seen classes");
  }
  const Mat h(1, h_i.size(), std::vector<float>(h_i.begin(), h_i.end()));
  const Mat scores = f.predict_all(h, a_all_seen);
  const std::size_t pos = pos_id - 1;
  return class_contrastive_from_scores(scores, std::span(&pos, 1), tau).value;
}

#define CEGZSL_INSTANTIATE(T)                                                                    \
  template T ranking_hinge(std::span<const T>, std::span<const T>, T, std::vector<T>*,           \
                           std::vector<T>*);                                                     \
  template LossGrad<T> ranking_loss_dot(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, T); \
  template T instance_contrastive_loss(std::span<const T>, std::span<const T>, const Matrix<T>&, \
                                       T);                                                       \
  template LossGrad<T> instance_contrastive_batch(const Matrix<T>&,                              \
                                                  std::span<const InstanceTask>, T);             \
  template LossGrad<T> class_contrastive_from_scores(const Matrix<T>&,                           \
                                                     std::span<const std::size_t>, T);

CEGZSL_INSTANTIATE(float)
CEGZSL_INSTANTIATE(double)
#undef CEGZSL_INSTANTIATE

}  // namespace cegzsl
