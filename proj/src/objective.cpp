#include "cegzsl/objective.hpp"

namespace cegzsl {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::gen_only: return "gen_only";
    case Mode::se_only: return "se_only";
    case Mode::se_basic: return "se_basic";
    case Mode::se_embed: return "se_embed";
    case Mode::ce_ins_only: return "ce_ins_only";
    case Mode::ce_cls_only: return "ce_cls_only";
    case Mode::ce_full: return "ce_full";
  }
  return "unknown";
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes = {Mode::gen_only,    Mode::se_only,     Mode::se_basic,
                                          Mode::se_embed,    Mode::ce_ins_only, Mode::ce_cls_only,
                                          Mode::ce_full};
  return modes;
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : all_modes()) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

ModeTraits traits(Mode m) {
  ModeTraits t;
  switch (m) {
    case Mode::gen_only:
      t.generator = true;
      break;
    case Mode::se_only:
      t.embedding = t.ranking = t.semantic_space = true;
      break;
    case Mode::se_basic:
      t.generator = t.embedding = t.ranking = t.semantic_space = true;
      break;
    case Mode::se_embed:
      t.generator = t.embedding = t.ranking = t.ranking_by_comparator = true;
      break;
    case Mode::ce_ins_only:
      t.generator = t.embedding = t.instance = true;
      break;
    case Mode::ce_cls_only:
      t.generator = t.embedding = t.classwise = true;
      break;
    case Mode::ce_full:
      t.generator = t.embedding = t.instance = t.classwise = true;
      break;
  }
  return t;
}

namespace {

template <class T>
Matrix<T> rows_of(const Matrix<T>& table, const std::vector<std::size_t>& idx) {
  return gather_rows(table, std::span<const std::size_t>(idx));
}

// Ranking loss for one block of embedded rows. Returns the value and adds
// d(loss)/d(h_block) into grad_h rows [offset, offset + n).
template <class T>
T ranking_block(Nets<T>& nets, const Matrix<T>& h_all, std::size_t offset, std::size_t n,
                const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg,
                const Matrix<T>& seen_a, T delta, bool by_comparator, Matrix<T>* grad_h) {
  const Matrix<T> h = slice_rows(h_all, offset, n);
  const Matrix<T> a_pos = rows_of(seen_a, pos);
  const Matrix<T> a_neg = rows_of(seen_a, neg);
  Matrix<T> gh;
  T value;
  if (!by_comparator) {
    auto lg = ranking_loss_dot(h, a_pos, a_neg, delta);
    value = lg.value;
    gh = std::move(lg.grad);
  } else {
    // Positive and negative pairs scored in one pass through F.
    const Matrix<T> s = nets.f.score_paired(concat_rows(h, h), concat_rows(a_pos, a_neg));
    const Matrix<T> sp = slice_rows(s, 0, n);
    const Matrix<T> sn = slice_rows(s, n, n);
    std::vector<T> gp, gn;
    value = ranking_hinge<T>(sp.values(), sn.values(), delta, grad_h ? &gp : nullptr,
                             grad_h ? &gn : nullptr);
    if (grad_h) {
      std::vector<T> gs(gp);
      gs.insert(gs.end(), gn.begin(), gn.end());
      const Matrix<T> ghh = nets.f.backward_paired(Matrix<T>(2 * n, 1, std::move(gs)));
      gh = slice_rows(ghh, 0, n);
      add_inplace(gh, slice_rows(ghh, n, n));
    }
  }
  if (grad_h) {
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = grad_h->row(offset + i);
      auto src = gh.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  return value;
}

}  // namespace

template <class T>
ObjectiveTerms generator_side_objective(Nets<T>& nets, const StepBatch<T>& batch,
                                        const ObjectiveOptions& opt, bool backprop) {
  const ModeTraits tr = traits(opt.mode);
  const std::size_t B = batch.real_x.rows();
  if (B == 0) throw DomainError("objective over an empty batch");
  ObjectiveTerms terms;

  Matrix<T> fake_x;
  Matrix<T> grad_fake;
  if (tr.generator) {
    fake_x = nets.g.net.forward(concat_cols(batch.noise, batch.real_a));
    const Matrix<T> p_real = nets.d.net.predict(concat_cols(batch.real_x, batch.real_a));
    const Matrix<T> p_fake = nets.d.net.forward(concat_cols(fake_x, batch.real_a));
    terms.V = adversarial_from_probs(p_real, p_fake).value;
    Matrix<T> gp;
    terms.adv_g = generator_adversarial_from_probs(p_fake, opt.generator_loss, backprop ? &gp : nullptr);
    if (backprop) {
      grad_fake = slice_cols(nets.d.net.backward(gp), 0, fake_x.cols());
      nets.d.net.zero_grad();
    } else {
      nets.d.net.clear_tape();
    }
  }

  if (tr.embedding) {
    const Matrix<T> x = tr.generator ? concat_rows(batch.real_x, fake_x) : batch.real_x;
    const std::size_t rows = x.rows();
    const Matrix<T> h = nets.e.forward(x);
    Matrix<T> grad_h(h.rows(), h.cols());
    Matrix<T>* gh = backprop ? &grad_h : nullptr;
    const T delta = static_cast<T>(opt.loss.margin_delta);

    if (tr.ranking) {
      terms.L_se_real = ranking_block(nets, h, 0, B, batch.labels, batch.neg_real, batch.seen_a, delta,
                                      tr.ranking_by_comparator, gh);
      if (tr.generator) {
        terms.L_se_sync = ranking_block(nets, h, B, B, batch.labels, batch.neg_fake, batch.seen_a,
                                        delta, tr.ranking_by_comparator, gh);
      }
    }
    if (tr.instance) {
      const Matrix<T> z = nets.h.forward(h);
      auto lg = instance_contrastive_batch(z, std::span<const InstanceTask>(batch.tasks),
                                           static_cast<T>(opt.loss.tau_e));
      terms.L_ins = lg.value;
      if (backprop) {
        add_inplace(grad_h, nets.h.backward(lg.grad));
      } else {
        nets.h.clear_tape();
      }
    }
    if (tr.classwise) {
      const Matrix<T> scores = nets.f.score_all(h, batch.seen_a);
      std::vector<std::size_t> pos(batch.labels);
      if (tr.generator) pos.insert(pos.end(), batch.labels.begin(), batch.labels.end());
      auto lg = class_contrastive_from_scores(scores, std::span<const std::size_t>(pos),
                                              static_cast<T>(opt.loss.tau_s));
      terms.L_cls = lg.value;
      if (backprop) add_inplace(grad_h, nets.f.backward_all(lg.grad));
    }
    if (!backprop) nets.f.net.clear_tape();

    if (backprop) {
      const Matrix<T> gx = nets.e.backward(grad_h);
      if (tr.generator) add_inplace(grad_fake, slice_rows(gx, B, rows - B));
    } else {
      nets.e.clear_tape();
    }
  }

  if (tr.generator) {
    if (backprop) {
      nets.g.net.backward(grad_fake);
    } else {
      nets.g.net.clear_tape();
    }
  }
  return terms;
}

template <class T>
double discriminator_objective(Nets<T>& nets, const StepBatch<T>& batch, bool backprop) {
  const std::size_t B = batch.real_x.rows();
  const Matrix<T> fake_x = generate_with_noise(nets.g, batch.real_a, batch.noise);
  const Matrix<T> input = concat_rows(concat_cols(batch.real_x, batch.real_a),
                                      concat_cols(fake_x, batch.real_a));
  const Matrix<T> p = backprop ? nets.d.net.forward(input) : nets.d.net.predict(input);
  const auto adv = adversarial_from_probs(slice_rows(p, 0, B), slice_rows(p, B, B));
  if (backprop) {
    Matrix<T> g = concat_rows(adv.grad_real, adv.grad_fake);
    for (auto& v : g.values()) v = -v;
    nets.d.net.backward(g);
  }
  return static_cast<double>(adv.value);
}

template <class T>
double total_loss_basic(Nets<T>& nets, const StepBatch<T>& batch, const LossParams& loss) {
  const auto t = generator_side_objective(nets, batch, {Mode::se_basic, loss, GeneratorLoss::minimax},
                                          false);
  return t.V + t.L_se_real + t.L_se_sync;
}

template <class T>
double total_loss_ce(Nets<T>& nets, const StepBatch<T>& batch, const LossParams& loss, Mode mode) {
  if (mode != Mode::ce_full && mode != Mode::ce_ins_only && mode != Mode::ce_cls_only) {
    throw ConfigError("total_loss_ce takes a contrastive mode, got " + to_string(mode));
  }
  const auto t = generator_side_objective(nets, batch, {mode, loss, GeneratorLoss::minimax}, false);
  return t.V + t.L_ins + t.L_cls;
}

#define CEGZSL_INSTANTIATE(T)                                                                  \
  template ObjectiveTerms generator_side_objective(Nets<T>&, const StepBatch<T>&,              \
                                                   const ObjectiveOptions&, bool);             \
  template double discriminator_objective(Nets<T>&, const StepBatch<T>&, bool);                \
  template double total_loss_basic(Nets<T>&, const StepBatch<T>&, const LossParams&);          \
  template double total_loss_ce(Nets<T>&, const StepBatch<T>&, const LossParams&, Mode);

CEGZSL_INSTANTIATE(float)
CEGZSL_INSTANTIATE(double)
#undef CEGZSL_INSTANTIATE

}  // namespace cegzsl
