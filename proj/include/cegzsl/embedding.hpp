#pragma once

#include <span>
#include <vector>

#include "cegzsl/dataset.hpp"
#include "cegzsl/generation.hpp"
#include "cegzsl/mlp.hpp"

namespace cegzsl {

struct LossParams {
  double tau_e = 0.1;         // instance-level temperature
  double tau_s = 0.1;         // class-level temperature
  double margin_delta = 1.0;  // ranking-loss margin

  void validate() const;
};

template <class T>
struct LossGrad {
  T value{};
  Matrix<T> grad;
};

// E: d_x -> d_h with a LeakyReLU.
Mlp<float> make_embed_net(std::size_t feature_dim, std::size_t embed_dim, double slope, Rng& rng);
// H: d_h -> d_z -> LeakyReLU -> d_z -> unit rows.
Mlp<float> make_projection_head(std::size_t embed_dim, std::size_t proj_dim, double slope, Rng& rng);

// F scores the relevance of an embedding to a descriptor from their
// concatenation: (d_h + d_a) -> hidden -> 1.
template <class T>
struct Comparator {
  Mlp<T> net;
  std::size_t embed_dim = 0;
  std::size_t attr_dim = 0;

  // scores(i, s) = F(h_i, a_s) for every pair; retains a tape.
  Matrix<T> score_all(const Matrix<T>& h, const Matrix<T>& a);
  // Gradient w.r.t. h for an upstream d(loss)/d(scores) of score_all.
  Matrix<T> backward_all(const Matrix<T>& grad_scores);

  // scores(i) = F(h_i, a_i) row by row; retains a tape.
  Matrix<T> score_paired(const Matrix<T>& h, const Matrix<T>& a);
  Matrix<T> backward_paired(const Matrix<T>& grad_scores);

  Matrix<T> predict_all(const Matrix<T>& h, const Matrix<T>& a) const;

  template <class U>
  Comparator<U> cast() const {
    return {net.template cast<U>(), embed_dim, attr_dim};
  }

  // Shape of the last score_all call, needed to fold pair gradients back.
  std::size_t taped_rows = 0;
  std::size_t taped_descriptors = 0;
};

Comparator<float> make_comparator(std::size_t embed_dim, std::size_t attr_dim, std::size_t hidden,
                                  double slope, Rng& rng);

// Mean over rows of max(0, delta - pos_i + neg_i); fills d/dpos and d/dneg.
template <class T>
T ranking_hinge(std::span<const T> pos, std::span<const T> neg, T delta, std::vector<T>* grad_pos,
                std::vector<T>* grad_neg);

// Ranking loss with dot-product compatibility a^T emb; gradient w.r.t. emb.
template <class T>
LossGrad<T> ranking_loss_dot(const Matrix<T>& emb, const Matrix<T>& a_pos, const Matrix<T>& a_neg,
                             T delta);

// Ranking loss on real features: E(x) scored against a positive and a
// negative descriptor per row.
float ranking_loss_real(const Mlp<float>& e, const Mat& x, const Mat& a_pos, const Mat& a_neg,
                        float delta);

// Ranking loss on E(G(a, noise)). Descriptors are given by class id and must
// all be seen classes; unseen ids raise SplitViolation.
float ranking_loss_sync(const GeneratorNet<float>& g, const Mlp<float>& e,
                        const SemanticTable& semantic, std::span<const ClassId> pos_ids,
                        std::span<const ClassId> neg_ids, float delta, Rng& rng);

// Single-anchor (K+1)-way contrastive loss over unit rows.
template <class T>
T instance_contrastive_loss(std::span<const T> z_i, std::span<const T> z_pos, const Matrix<T>& z_negs,
                            T tau);

// One anchor row with its positives and negatives (row indices into z).
struct InstanceTask {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

// Mean over every (anchor, positive) pair of the (K+1)-way loss, with the
// gradient w.r.t. z. An empty task list yields zero.
template <class T>
LossGrad<T> instance_contrastive_batch(const Matrix<T>& z, std::span<const InstanceTask> tasks, T tau);

// Mean over rows of the S-way loss on comparator scores (rows x S) against
// 0-based positive columns; gradient w.r.t. the scores.
template <class T>
LossGrad<T> class_contrastive_from_scores(const Matrix<T>& scores, std::span<const std::size_t> pos,
                                          T tau);

// Single-anchor S-way loss; pos_id is a 1-based seen class id.
float class_contrastive_loss(const Comparator<float>& f, std::span<const float> h_i,
                             const Mat& a_all_seen, ClassId pos_id, float tau);

}  // namespace cegzsl
