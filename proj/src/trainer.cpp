#include "cegzsl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>

namespace cegzsl {

namespace {

constexpr int kSamplerAttempts = 10;

std::vector<std::vector<std::size_t>> rows_by_class(const FeatureDataset& ds) {
  std::vector<std::vector<std::size_t>> by(ds.seen_count() + 1);
  for (std::size_t i = 0; i < ds.train_y.size(); ++i) by[ds.train_y[i]].push_back(i);
  return by;
}

std::size_t distinct_count(std::span<const ClassId> labels) {
  return std::set<ClassId>(labels.begin(), labels.end()).size();
}

Batch draw_random(const FeatureDataset& ds, std::size_t batch_size, Rng& rng) {
  const std::size_t n = ds.train_x.rows();
  Batch b;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  const std::size_t take = std::min(batch_size, n);
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(perm[i], perm[i + rng.below(n - i)]);
    b.rows.push_back(perm[i]);
  }
  while (b.rows.size() < batch_size) b.rows.push_back(rng.below(n));
  for (std::size_t r : b.rows) b.labels.push_back(ds.train_y[r]);
  return b;
}

std::optional<Batch> draw_pk(const FeatureDataset& ds, const TrainConfig& cfg,
                             const std::vector<std::vector<std::size_t>>& by_class, Rng& rng) {
  const std::size_t n = ds.train_x.rows();
  const std::size_t group = 1 + cfg.pk_positives + cfg.pk_negatives;
  const std::size_t anchors = std::max<std::size_t>(1, cfg.batch_size / group);
  Batch b;
  for (std::size_t a = 0; a < anchors; ++a) {
    const std::size_t anchor_row = rng.below(n);
    const ClassId c = ds.train_y[anchor_row];
    const auto& same = by_class[c];
    const std::size_t others = n - same.size();
    if (same.size() < 2 || others == 0) return std::nullopt;
    InstanceTask task;
    task.anchor = b.rows.size();
    b.rows.push_back(anchor_row);
    for (std::size_t p = 0; p < cfg.pk_positives; ++p) {
      std::size_t r;
      do {
        r = same[rng.below(same.size())];
      } while (r == anchor_row);
      task.positives.push_back(b.rows.size());
      b.rows.push_back(r);
    }
    for (std::size_t k = 0; k < cfg.pk_negatives; ++k) {
      std::size_t r;
      do {
        r = rng.below(n);
      } while (ds.train_y[r] == c);
      task.negatives.push_back(b.rows.size());
      b.rows.push_back(r);
    }
    b.tasks.push_back(std::move(task));
  }
  for (std::size_t r : b.rows) b.labels.push_back(ds.train_y[r]);
  return b;
}

}  // namespace

std::vector<InstanceTask> derive_instance_tasks(std::span<const ClassId> labels, Rng& rng) {
  std::vector<InstanceTask> tasks;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    InstanceTask t;
    t.anchor = i;
    std::vector<std::size_t> same;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? same : t.negatives).push_back(j);
    }
    if (same.empty() || t.negatives.empty()) continue;
    t.positives.push_back(same[rng.below(same.size())]);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

Batch sample_batch(const FeatureDataset& ds, const TrainConfig& cfg, Rng& rng) {
  if (ds.train_x.rows() == 0) throw SamplerError("cannot sample from an empty training set");
  const auto by_class = rows_by_class(ds);
  for (int attempt = 0; attempt < kSamplerAttempts; ++attempt) {
    if (cfg.sampler == SamplerKind::random_batch) {
      Batch b = draw_random(ds, cfg.batch_size, rng);
      if (distinct_count(b.labels) < 2) continue;
      b.tasks = derive_instance_tasks(b.labels, rng);
      return b;
    }
    if (auto b = draw_pk(ds, cfg, by_class, rng)) return std::move(*b);
  }
  throw SamplerError("could not draw a batch with two or more classes in " +
                     std::to_string(kSamplerAttempts) + " attempts");
}

Mat NetBundle::prepare(const Mat& x) const {
  if (feature_lo.empty()) return x;
  if (x.cols() != feature_lo.size()) {
    throw ShapeError("features have " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(feature_lo.size()));
  }
  Mat out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - feature_lo[j]) * feature_inv_range[j];
  }
  return out;
}

NetBundle init_bundle(const FeatureDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  const ModeTraits tr = traits(cfg.mode);
  NetBundle b;
  b.mode = cfg.mode;
  b.feature_dim = ds.feature_dim();
  b.attr_dim = ds.semantic.dim();
  b.seen = ds.seen_count();
  b.unseen = ds.unseen_count();
  if (cfg.minmax_features) {
    const Mat& x = ds.train_x;
    b.feature_lo.assign(b.feature_dim, 0.0f);
    b.feature_inv_range.assign(b.feature_dim, 1.0f);
    for (std::size_t j = 0; j < b.feature_dim; ++j) {
      float lo = x(0, j), hi = x(0, j);
      for (std::size_t i = 1; i < x.rows(); ++i) {
        lo = std::min(lo, x(i, j));
        hi = std::max(hi, x(i, j));
      }
      b.feature_lo[j] = lo;
      // A constant column maps to zero.
      if (hi > lo) b.feature_inv_range[j] = 1.0f / (hi - lo);
    }
  }
  const Rng root(cfg.seed);
  const std::size_t embed_dim = tr.semantic_space ? b.attr_dim : cfg.embed_dim;
  if (tr.generator) {
    Rng rg = root.fork(11), rd = root.fork(12);
    b.nets.g = make_generator(b.attr_dim, cfg.resolved_noise_dim(b.attr_dim), cfg.hidden,
                              b.feature_dim, cfg.leaky_slope, rg);
    b.nets.d = make_discriminator(b.feature_dim, b.attr_dim, cfg.hidden, cfg.leaky_slope, rd);
  }
  if (tr.embedding) {
    Rng re = root.fork(13);
    b.nets.e = make_embed_net(b.feature_dim, embed_dim, cfg.leaky_slope, re);
  }
  if (tr.instance) {
    Rng rh = root.fork(14);
    b.nets.h = make_projection_head(embed_dim, cfg.proj_dim, cfg.leaky_slope, rh);
  }
  if (tr.comparator()) {
    Rng rf = root.fork(15);
    b.nets.f = make_comparator(embed_dim, b.attr_dim, cfg.hidden, cfg.leaky_slope, rf);
  }
  return b;
}

Trainer::Trainer(const FeatureDataset& ds, TrainConfig cfg)
    : Trainer(ds, cfg, init_bundle(ds, cfg), TrainerState{}) {}

Trainer::Trainer(const FeatureDataset& ds, TrainConfig cfg, NetBundle bundle, TrainerState state)
    : ds_(ds), cfg_(std::move(cfg)), bundle_(std::move(bundle)), rng_(Rng(cfg_.seed).fork(2)),
      step_(state.step) {
  cfg_.validate();
  if (bundle_.feature_dim != ds.feature_dim() || bundle_.attr_dim != ds.semantic.dim() ||
      bundle_.seen != ds.seen_count() || bundle_.unseen != ds.unseen_count()) {
    throw ShapeError("networks were built for a dataset of different dimensions");
  }
  if (bundle_.mode != cfg_.mode) throw ConfigError("bundle mode differs from the config mode");
  rng_.set_counter(state.rng_counter);
  seen_a_ = ds.semantic.seen();
  train_x_ = bundle_.prepare(ds.train_x);
}

std::size_t Trainer::steps_per_epoch() const {
  return (ds_.train_x.rows() + cfg_.batch_size - 1) / cfg_.batch_size;
}

StepBatch<float> Trainer::make_step_batch(Rng& rng) {
  const ModeTraits tr = traits(cfg_.mode);
  Batch b = sample_batch(ds_, cfg_, rng);
  StepBatch<float> sb;
  const std::size_t B = b.rows.size();
  sb.real_x = gather_rows(train_x_, std::span<const std::size_t>(b.rows));
  sb.labels.resize(B);
  for (std::size_t i = 0; i < B; ++i) sb.labels[i] = b.labels[i] - 1;
  sb.real_a = gather_rows(seen_a_, std::span<const std::size_t>(sb.labels));
  sb.seen_a = seen_a_;
  if (tr.generator) sb.noise = draw_noise(B, bundle_.nets.g.noise_dim, rng);
  if (tr.ranking) {
    const std::size_t S = ds_.seen_count();
    auto draw_neg = [&](std::vector<std::size_t>& out) {
      out.resize(B);
      for (std::size_t i = 0; i < B; ++i) {
        // Uniform over the other S - 1 seen classes.
        std::size_t k = rng.below(S - 1);
        out[i] = k >= sb.labels[i] ? k + 1 : k;
      }
    };
    draw_neg(sb.neg_real);
    if (tr.generator) draw_neg(sb.neg_fake);
  }
  if (tr.instance) {
    if (cfg_.sampler == SamplerKind::random_batch) {
      std::vector<ClassId> combined(b.labels);
      combined.insert(combined.end(), b.labels.begin(), b.labels.end());
      sb.tasks = derive_instance_tasks(combined, rng);
    } else {
      // Synthetic anchors reuse their real counterpart's positives and negatives.
      sb.tasks = b.tasks;
      for (const auto& t : b.tasks) {
        InstanceTask m = t;
        m.anchor = t.anchor + B;
        sb.tasks.push_back(std::move(m));
      }
    }
  }
  return sb;
}

StepLog Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModeTraits tr = traits(cfg_.mode);
  const AdamConfig adam = cfg_.adam();
  auto& nets = bundle_.nets;

  if (tr.generator) {
    for (std::size_t k = 0; k < cfg_.d_steps_per_g_step; ++k) {
      StepBatch<float> sb = make_step_batch(rng_);
      nets.d.net.zero_grad();
      discriminator_objective(nets, sb, true);
      adam_step(std::span(nets.d.net.params()), adam);
    }
  }

  StepBatch<float> sb = make_step_batch(rng_);
  nets.g.net.zero_grad();
  nets.e.zero_grad();
  nets.h.zero_grad();
  nets.f.net.zero_grad();
  const ObjectiveOptions opt{cfg_.mode, cfg_.loss_params(), cfg_.generator_loss};
  StepLog log;
  log.terms = generator_side_objective(nets, sb, opt, true);
  if (!std::isfinite(log.terms.total()) || !std::isfinite(log.terms.V)) {
    throw NumericsError("non-finite objective at step " + std::to_string(step_));
  }
  if (tr.generator) adam_step(std::span(nets.g.net.params()), adam);
  if (tr.embedding) adam_step(std::span(nets.e.params()), adam);
  if (tr.instance) adam_step(std::span(nets.h.params()), adam);
  if (tr.comparator()) adam_step(std::span(nets.f.net.params()), adam);

  log.step = step_++;
  log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

void Trainer::run(const std::function<void(const StepLog&)>& on_step) {
  const std::size_t total = cfg_.epochs * steps_per_epoch();
  for (std::size_t i = 0; i < total; ++i) {
    const StepLog s = step();
    if (on_step) on_step(s);
  }
}

TrainResult train(const FeatureDataset& ds, const TrainConfig& cfg) {
  Trainer t(ds, cfg);
  TrainResult r;
  t.run([&](const StepLog& s) { r.log.push_back(s); });
  r.state = t.state();
  r.bundle = std::move(t.bundle());
  return r;
}

std::string step_log_json(const StepLog& s) {
  nlohmann::json j = {{"step", s.step},
                      {"V", s.terms.V},
                      {"L_ins", s.terms.L_ins},
                      {"L_cls", s.terms.L_cls},
                      {"L_se_real", s.terms.L_se_real},
                      {"L_se_sync", s.terms.L_se_sync},
                      {"wall_ms", s.wall_ms}};
  return j.dump();
}

}  // namespace cegzsl
