#pragma once

// Straight-line scalar recomputations used as independent references. They
// read parameter values and layer specs only, never the library's matrix
// kernels or loss code, and accumulate in long double.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cegzsl/objective.hpp"

namespace oracle {

using Vec = std::vector<long double>;
using Rows = std::vector<Vec>;

template <class T>
Rows rows_of(const cegzsl::Matrix<T>& m) {
  Rows out(m.rows(), Vec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline long double dot(const Vec& a, const Vec& b) {
  long double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// Forward pass of one row through the layer list.
template <class T>
Vec mlp_row(const cegzsl::Mlp<T>& net, Vec x) {
  using cegzsl::LayerKind;
  std::size_t p = 0;
  for (const auto& layer : net.layers()) {
    switch (layer.kind) {
      case LayerKind::affine: {
        const auto& w = net.params()[p].value;
        const auto& b = net.params()[p + 1].value;
        p += 2;
        Vec y(layer.out_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
          long double s = b(0, o);
          for (std::size_t i = 0; i < layer.in_dim; ++i) s += x[i] * static_cast<long double>(w(i, o));
          y[o] = s;
        }
        x = y;
        break;
      }
      case LayerKind::leaky_relu:
        for (auto& v : x) v = v > 0 ? v : v * static_cast<long double>(layer.slope);
        break;
      case LayerKind::relu:
        for (auto& v : x) v = v > 0 ? v : 0;
        break;
      case LayerKind::sigmoid:
        for (auto& v : x) v = 1 / (1 + std::exp(-v));
        break;
      case LayerKind::l2_normalize_rows: {
        long double n = std::sqrt(dot(x, x));
        n = std::max(n, 1e-12L);
        for (auto& v : x) v /= n;
        break;
      }
    }
  }
  return x;
}

template <class T>
Rows mlp(const cegzsl::Mlp<T>& net, const Rows& x) {
  Rows out;
  for (const auto& r : x) out.push_back(mlp_row(net, r));
  return out;
}

inline long double clamped_log(long double p) { return std::log(std::max(p, 1e-12L)); }

// mean log p_real + mean log(1 - p_fake), probabilities one per row.
inline long double adversarial(const Rows& p_real, const Rows& p_fake) {
  long double r = 0, f = 0;
  for (const auto& p : p_real) r += clamped_log(p[0]);
  for (const auto& p : p_fake) f += clamped_log(1 - p[0]);
  return r / p_real.size() + f / p_fake.size();
}

inline long double generator_adversarial(const Rows& p_fake, cegzsl::GeneratorLoss kind) {
  long double s = 0;
  for (const auto& p : p_fake) {
    s += kind == cegzsl::GeneratorLoss::minimax ? clamped_log(1 - p[0]) : -clamped_log(p[0]);
  }
  return s / p_fake.size();
}

inline long double hinge(long double delta, long double pos, long double neg) {
  return std::max(0.0L, delta - pos + neg);
}

// Mean hinge with dot-product compatibility.
inline long double ranking_dot(const Rows& emb, const Rows& a_pos, const Rows& a_neg, long double delta) {
  long double s = 0;
  for (std::size_t i = 0; i < emb.size(); ++i) s += hinge(delta, dot(emb[i], a_pos[i]), dot(emb[i], a_neg[i]));
  return s / emb.size();
}

// -log softmax of logit 0, by direct exponentials.
inline long double neg_log_first(const Vec& logits) {
  long double den = 0;
  for (long double l : logits) den += std::exp(l);
  return -std::log(std::exp(logits[0]) / den);
}

inline long double instance_single(const Vec& zi, const Vec& zpos, const Rows& znegs, long double tau) {
  Vec logits = {dot(zi, zpos) / tau};
  for (const auto& n : znegs) logits.push_back(dot(zi, n) / tau);
  return neg_log_first(logits);
}

inline long double instance_batch(const Rows& z, const std::vector<cegzsl::InstanceTask>& tasks,
                                  long double tau) {
  long double s = 0;
  std::size_t pairs = 0;
  for (const auto& t : tasks) {
    Rows negs;
    for (auto n : t.negatives) negs.push_back(z[n]);
    for (auto p : t.positives) {
      s += instance_single(z[t.anchor], z[p], negs, tau);
      ++pairs;
    }
  }
  return pairs == 0 ? 0 : s / pairs;
}

inline long double class_single(const Vec& scores, std::size_t pos, long double tau) {
  Vec logits = {scores[pos] / tau};
  for (std::size_t s = 0; s < scores.size(); ++s) {
    if (s != pos) logits.push_back(scores[s] / tau);
  }
  return neg_log_first(logits);
}

inline long double class_batch(const Rows& scores, const std::vector<std::size_t>& pos, long double tau) {
  long double s = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) s += class_single(scores[i], pos[i], tau);
  return s / scores.size();
}

template <class T>
long double comparator(const cegzsl::Comparator<T>& f, const Vec& h, const Vec& a) {
  return mlp_row(f.net, concat(h, a))[0];
}

struct Terms {
  long double V = 0, adv_g = 0, se_real = 0, se_sync = 0, ins = 0, cls = 0;
};

// Every term of the generator-side objective for one batch.
template <class T>
Terms objective(const cegzsl::Nets<T>& nets, const cegzsl::StepBatch<T>& b, cegzsl::Mode mode,
                const cegzsl::LossParams& loss, cegzsl::GeneratorLoss gl) {
  const cegzsl::ModeTraits tr = cegzsl::traits(mode);
  const Rows x = rows_of(b.real_x), a = rows_of(b.real_a), noise = rows_of(b.noise), seen = rows_of(b.seen_a);
  const std::size_t B = x.size();
  Terms t;
  Rows fake;
  if (tr.generator) {
    Rows real_in, fake_in;
    for (std::size_t i = 0; i < B; ++i) fake.push_back(mlp_row(nets.g.net, concat(noise[i], a[i])));
    for (std::size_t i = 0; i < B; ++i) {
      real_in.push_back(concat(x[i], a[i]));
      fake_in.push_back(concat(fake[i], a[i]));
    }
    const Rows pr = mlp(nets.d.net, real_in), pf = mlp(nets.d.net, fake_in);
    t.V = adversarial(pr, pf);
    t.adv_g = generator_adversarial(pf, gl);
  }
  if (!tr.embedding) return t;
  Rows in = x;
  in.insert(in.end(), fake.begin(), fake.end());
  const Rows h = mlp(nets.e, in);
  std::vector<std::size_t> labels = b.labels;
  if (tr.generator) labels.insert(labels.end(), b.labels.begin(), b.labels.end());

  if (tr.ranking) {
    auto block = [&](std::size_t offset, const std::vector<std::size_t>& neg) {
      long double s = 0;
      for (std::size_t i = 0; i < B; ++i) {
        const Vec& hi = h[offset + i];
        const Vec& ap = seen[b.labels[i]];
        const Vec& an = seen[neg[i]];
        if (tr.ranking_by_comparator) {
          s += hinge(loss.margin_delta, comparator(nets.f, hi, ap), comparator(nets.f, hi, an));
        } else {
          s += hinge(loss.margin_delta, dot(hi, ap), dot(hi, an));
        }
      }
      return s / B;
    };
    t.se_real = block(0, b.neg_real);
    if (tr.generator) t.se_sync = block(B, b.neg_fake);
  }
  if (tr.instance) t.ins = instance_batch(mlp(nets.h, h), b.tasks, loss.tau_e);
  if (tr.classwise) {
    Rows scores;
    for (const auto& hi : h) {
      Vec s;
      for (const auto& as : seen) s.push_back(comparator(nets.f, hi, as));
      scores.push_back(s);
    }
    t.cls = class_batch(scores, labels, loss.tau_s);
  }
  return t;
}

// H = 2SU / (S + U), zero when both are zero.
inline long double harmonic(long double s, long double u) { return s + u == 0 ? 0 : 2 * s * u / (s + u); }

}  // namespace oracle
