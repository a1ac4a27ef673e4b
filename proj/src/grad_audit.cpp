#include "cegzsl/grad_audit.hpp"

#include <algorithm>
#include <memory>

#include <functional>

namespace cegzsl {

namespace {

constexpr std::size_t kFeatureDim = 6;
constexpr std::size_t kAttrDim = 4;
constexpr std::size_t kSeen = 4;
constexpr std::size_t kRows = 6;
constexpr std::size_t kNoiseDim = 3;
constexpr std::size_t kHidden = 8;
constexpr std::size_t kEmbedDim = 5;
constexpr std::size_t kProjDim = 4;
constexpr double kSlope = 0.2;

const std::vector<std::string> kPrimitiveFamilies = {
    "ranking_real",          "ranking_sync",          "adversarial_discriminator",
    "adversarial_generator", "adversarial_generator_ns", "instance_contrastive",
    "class_contrastive"};

// Glorot weights plus small random biases so no unit sits at an exact kink.
template <class Net>
void jitter_biases(Net& net, Rng& rng) {
  for (std::size_t i = 1; i < net.params().size(); i += 2) {
    for (auto& v : net.params()[i].value.values()) v = static_cast<float>(0.1 * rng.normal());
  }
}

struct Instance {
  Nets<double> nets;
  Mlp<double> e_sem;  // embedding into descriptor space
  StepBatch<double> batch;
  std::vector<InstanceTask> real_tasks;
};

Instance make_instance(Rng& rng) {
  GeneratorNet<float> g = make_generator(kAttrDim, kNoiseDim, kHidden, kFeatureDim, kSlope, rng);
  DiscriminatorNet<float> d = make_discriminator(kFeatureDim, kAttrDim, kHidden, kSlope, rng);
  Mlp<float> e = make_embed_net(kFeatureDim, kEmbedDim, kSlope, rng);
  Mlp<float> e_sem = make_embed_net(kFeatureDim, kAttrDim, kSlope, rng);
  Mlp<float> h = make_projection_head(kEmbedDim, kProjDim, kSlope, rng);
  Comparator<float> f = make_comparator(kEmbedDim, kAttrDim, kHidden, kSlope, rng);
  jitter_biases(g.net, rng);
  jitter_biases(d.net, rng);
  jitter_biases(e, rng);
  jitter_biases(e_sem, rng);
  jitter_biases(h, rng);
  jitter_biases(f.net, rng);

  Instance in;
  in.nets = Nets<float>{g, d, e, h, f}.cast<double>();
  in.e_sem = e_sem.cast<double>();

  StepBatch<float> b;
  b.seen_a = Mat(kSeen, kAttrDim);
  for (auto& v : b.seen_a.values()) v = static_cast<float>(rng.uniform());
  b.real_x = Mat(kRows, kFeatureDim);
  for (auto& v : b.real_x.values()) v = static_cast<float>(rng.uniform(0.0, 2.0));
  b.labels.resize(kRows);
  for (std::size_t i = 0; i < kRows; ++i) {
    // The first two rows share a class and the third differs, so every
    // instance has positives and negatives.
    b.labels[i] = i < 2 ? 0 : (i == 2 ? 1 : rng.below(kSeen));
  }
  b.real_a = gather_rows(b.seen_a, std::span<const std::size_t>(b.labels));
  b.noise = draw_noise(kRows, kNoiseDim, rng);
  auto draw_neg = [&](std::vector<std::size_t>& out) {
    out.resize(kRows);
    for (std::size_t i = 0; i < kRows; ++i) {
      const std::size_t k = rng.below(kSeen - 1);
      out[i] = k >= b.labels[i] ? k + 1 : k;
    }
  };
  draw_neg(b.neg_real);
  draw_neg(b.neg_fake);
  std::vector<ClassId> ids(b.labels.begin(), b.labels.end());
  in.real_tasks = derive_instance_tasks(ids, rng);
  std::vector<ClassId> both(ids);
  both.insert(both.end(), ids.begin(), ids.end());
  b.tasks = derive_instance_tasks(both, rng);
  in.batch = b.cast<double>();
  return in;
}

void add_blocks(std::vector<GradBlock>& out, const std::string& prefix, Mlp<double>& net) {
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    out.push_back({prefix + "[" + std::to_string(i) + "]", &net.params()[i]});
  }
}

void zero_all(Instance& in) {
  in.nets.g.net.zero_grad();
  in.nets.d.net.zero_grad();
  in.nets.e.zero_grad();
  in.nets.h.zero_grad();
  in.nets.f.net.zero_grad();
  in.e_sem.zero_grad();
}

struct FamilyCase {
  std::vector<GradBlock> blocks;
  std::function<void()> analytic;  // fills the blocks' grads
  std::function<double()> value;
};

MatD generator_input(const StepBatch<double>& b) { return concat_cols(b.noise, b.real_a); }

double adversarial_generator_value(Instance& in, GeneratorLoss kind) {
  const auto& b = in.batch;
  const MatD fake = generate_with_noise(in.nets.g, b.real_a, b.noise);
  return generator_adversarial_from_probs(in.nets.d.net.predict(concat_cols(fake, b.real_a)), kind,
                                          static_cast<MatD*>(nullptr));
}

void adversarial_generator_grad(Instance& in, GeneratorLoss kind) {
  const auto& b = in.batch;
  const MatD fake = in.nets.g.net.forward(generator_input(b));
  const MatD p = in.nets.d.net.forward(concat_cols(fake, b.real_a));
  MatD gp;
  generator_adversarial_from_probs(p, kind, &gp);
  const MatD gx = slice_cols(in.nets.d.net.backward(gp), 0, fake.cols());
  in.nets.g.net.backward(gx);
}

FamilyCase composite_case(Instance& in, Mode mode, const LossParams& loss) {
  const ModeTraits tr = traits(mode);
  FamilyCase fc;
  auto nets = std::make_shared<Nets<double>>(in.nets);
  if (tr.semantic_space) nets->e = in.e_sem;
  if (tr.generator) add_blocks(fc.blocks, "G", nets->g.net);
  if (tr.embedding) add_blocks(fc.blocks, "E", nets->e);
  if (tr.instance) add_blocks(fc.blocks, "H", nets->h);
  if (tr.comparator()) add_blocks(fc.blocks, "F", nets->f.net);
  const ObjectiveOptions opt{mode, loss, GeneratorLoss::minimax};
  const StepBatch<double>* batch = &in.batch;
  fc.analytic = [nets, batch, opt] {
    nets->g.net.zero_grad();
    nets->e.zero_grad();
    nets->h.zero_grad();
    nets->f.net.zero_grad();
    generator_side_objective(*nets, *batch, opt, true);
  };
  fc.value = [nets, batch, opt] { return generator_side_objective(*nets, *batch, opt, false).total(); };
  return fc;
}

FamilyCase family_case(const std::string& family, Instance& in, const AuditOptions& o) {
  const LossParams loss{o.tau_e, o.tau_s, o.margin_delta};
  auto& n = in.nets;
  const auto& b = in.batch;
  const MatD a_pos = gather_rows(b.seen_a, std::span<const std::size_t>(b.labels));
  const MatD a_neg_real = gather_rows(b.seen_a, std::span<const std::size_t>(b.neg_real));
  const MatD a_neg_fake = gather_rows(b.seen_a, std::span<const std::size_t>(b.neg_fake));
  const double delta = o.margin_delta;
  FamilyCase fc;

  if (family == "ranking_real") {
    add_blocks(fc.blocks, "E", in.e_sem);
    fc.analytic = [&in, a_pos, a_neg_real, delta] {
      const MatD h = in.e_sem.forward(in.batch.real_x);
      in.e_sem.backward(ranking_loss_dot(h, a_pos, a_neg_real, delta).grad);
    };
    fc.value = [&in, a_pos, a_neg_real, delta] {
      return ranking_loss_dot(in.e_sem.predict(in.batch.real_x), a_pos, a_neg_real, delta).value;
    };
  } else if (family == "ranking_sync") {
    add_blocks(fc.blocks, "G", n.g.net);
    add_blocks(fc.blocks, "E", in.e_sem);
    fc.analytic = [&in, a_pos, a_neg_fake, delta] {
      const MatD fake = in.nets.g.net.forward(generator_input(in.batch));
      const MatD h = in.e_sem.forward(fake);
      in.nets.g.net.backward(in.e_sem.backward(ranking_loss_dot(h, a_pos, a_neg_fake, delta).grad));
    };
    fc.value = [&in, a_pos, a_neg_fake, delta] {
      const MatD fake = generate_with_noise(in.nets.g, in.batch.real_a, in.batch.noise);
      return ranking_loss_dot(in.e_sem.predict(fake), a_pos, a_neg_fake, delta).value;
    };
  } else if (family == "adversarial_discriminator") {
    add_blocks(fc.blocks, "D", n.d.net);
    fc.analytic = [&in] { discriminator_objective(in.nets, in.batch, true); };
    fc.value = [&in] { return -discriminator_objective(in.nets, in.batch, false); };
  } else if (family == "adversarial_generator" || family == "adversarial_generator_ns") {
    const GeneratorLoss kind =
        family == "adversarial_generator" ? GeneratorLoss::minimax : GeneratorLoss::non_saturating;
    add_blocks(fc.blocks, "G", n.g.net);
    fc.analytic = [&in, kind] { adversarial_generator_grad(in, kind); };
    fc.value = [&in, kind] { return adversarial_generator_value(in, kind); };
  } else if (family == "instance_contrastive") {
    add_blocks(fc.blocks, "E", n.e);
    add_blocks(fc.blocks, "H", n.h);
    const double tau = o.tau_e;
    fc.analytic = [&in, tau] {
      const MatD z = in.nets.h.forward(in.nets.e.forward(in.batch.real_x));
      const auto lg = instance_contrastive_batch(z, std::span<const InstanceTask>(in.real_tasks), tau);
      in.nets.e.backward(in.nets.h.backward(lg.grad));
    };
    fc.value = [&in, tau] {
      const MatD z = in.nets.h.predict(in.nets.e.predict(in.batch.real_x));
      return instance_contrastive_batch(z, std::span<const InstanceTask>(in.real_tasks), tau).value;
    };
  } else if (family == "class_contrastive") {
    add_blocks(fc.blocks, "E", n.e);
    add_blocks(fc.blocks, "F", n.f.net);
    const double tau = o.tau_s;
    fc.analytic = [&in, tau] {
      const MatD h = in.nets.e.forward(in.batch.real_x);
      const MatD s = in.nets.f.score_all(h, in.batch.seen_a);
      const auto lg = class_contrastive_from_scores(s, std::span<const std::size_t>(in.batch.labels), tau);
      in.nets.e.backward(in.nets.f.backward_all(lg.grad));
    };
    fc.value = [&in, tau] {
      const MatD s = in.nets.f.predict_all(in.nets.e.predict(in.batch.real_x), in.batch.seen_a);
      return class_contrastive_from_scores(s, std::span<const std::size_t>(in.batch.labels), tau).value;
    };
  } else if (family.starts_with("composite_")) {
    return composite_case(in, mode_from_string(family.substr(10)), loss);
  } else {
    throw ConfigError("unknown gradient-audit family '" + family + "'");
  }
  return fc;
}

}  // namespace

std::vector<std::string> audit_families() {
  std::vector<std::string> out = kPrimitiveFamilies;
  for (Mode m : all_modes()) out.push_back("composite_" + to_string(m));
  return out;
}

bool AuditResult::passed() const {
  for (const auto& e : entries) {
    if (!e.report.passed(tol)) return false;
  }
  return true;
}

std::vector<AuditEntry> AuditResult::failures() const {
  std::vector<AuditEntry> out;
  for (const auto& e : entries) {
    if (!e.report.passed(tol)) out.push_back(e);
  }
  return out;
}

std::vector<AuditEntry> AuditResult::worst_by_family() const {
  std::vector<AuditEntry> out;
  for (const auto& e : entries) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AuditEntry& w) { return w.family == e.family; });
    if (it == out.end()) {
      out.push_back(e);
    } else if (e.report.max_rel_error > it->report.max_rel_error) {
      *it = e;
    }
  }
  return out;
}

AuditResult run_grad_audit(const AuditOptions& opt) {
  const auto families = audit_families();
  if (opt.flip_family &&
      std::find(families.begin(), families.end(), *opt.flip_family) == families.end()) {
    throw ConfigError("unknown gradient-audit family '" + *opt.flip_family + "'");
  }
  AuditResult result;
  result.tol = opt.tol;
  const Rng root(opt.seed);
  for (std::size_t i = 0; i < opt.instances; ++i) {
    Rng rng = root.fork(i + 1);
    Instance in = make_instance(rng);
    for (const auto& family : families) {
      FamilyCase fc = family_case(family, in, opt);
      zero_all(in);
      fc.analytic();
      if (opt.flip_family && *opt.flip_family == family) {
        for (auto& blk : fc.blocks) {
          for (auto& v : blk.param->grad.values()) v = -v;
        }
      }
      AuditEntry entry{family, i, grad_check(fc.blocks, fc.value, opt.check)};
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

}  // namespace cegzsl
