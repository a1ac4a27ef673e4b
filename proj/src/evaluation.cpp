#include <algorithm>
#include <numeric>

#include "cegzsl/trainer.hpp"

namespace cegzsl {

std::string to_string(ClassifierSpace s) {
  return s == ClassifierSpace::feature ? "feature" : "embedding";
}

Mat SoftmaxClassifier::logits(const NetBundle& bundle, const Mat& x) const {
  const Mat px = bundle.prepare(x);
  if (space == ClassifierSpace::feature) return linear.predict(px);
  return linear.predict(bundle.nets.e.predict(px));
}

namespace {

// Fixed compatibility logits E(x) a_c^T over every class.
SoftmaxClassifier compatibility_classifier(const FeatureDataset& ds) {
  const Mat& a = ds.semantic.descriptors;
  Mlp<float> lin({LayerSpec::affine(a.cols(), a.rows())});
  Mat& w = lin.params()[0].value;
  for (std::size_t c = 0; c < a.rows(); ++c) {
    for (std::size_t k = 0; k < a.cols(); ++k) w(k, c) = a(c, k);
  }
  return {std::move(lin), ClassifierSpace::embedding};
}

}  // namespace

SoftmaxClassifier fit_final_classifier(const NetBundle& bundle, const FeatureDataset& ds,
                                       const TrainConfig& cfg, Rng& rng) {
  const ModeTraits tr = traits(bundle.mode);
  if (!tr.generator) return compatibility_classifier(ds);

  const ClassifierSpace space = tr.embedding ? ClassifierSpace::embedding : ClassifierSpace::feature;
  const Mlp<float>* embed = space == ClassifierSpace::embedding ? &bundle.nets.e : nullptr;
  const Mat real = bundle.prepare(ds.train_x);
  Mat x = embed ? embed->predict(real) : real;
  std::vector<std::size_t> y(ds.train_y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ds.train_y[i] - 1;
  if (cfg.n_syn_per_unseen > 0) {
    auto [xs, ids] = synthesize_unseen_embeddings(bundle.nets.g, embed, ds.semantic,
                                                  cfg.n_syn_per_unseen, rng);
    x = concat_rows(x, xs);
    for (ClassId c : ids) y.push_back(c - 1);
  }

  const std::size_t classes = ds.semantic.class_count();
  Mlp<float> lin({LayerSpec::affine(x.cols(), classes)});
  lin.init(rng);
  const AdamConfig adam{cfg.classifier_lr, cfg.beta1, cfg.beta2, 1e-8};
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.classifier_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += cfg.classifier_batch) {
      const std::size_t len = std::min(cfg.classifier_batch, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<std::size_t> targets(len);
      for (std::size_t i = 0; i < len; ++i) targets[i] = y[idx[i]];
      lin.zero_grad();
      const Mat logits = lin.forward(gather_rows(x, idx));
      Mat grad;
      softmax_cross_entropy(logits, std::span<const std::size_t>(targets), &grad);
      lin.backward(grad);
      adam_step(std::span(lin.params()), adam);
    }
  }
  return {std::move(lin), space};
}

std::vector<ClassId> predict_labels(const Mat& logits, std::span<const ClassId> label_space) {
  if (label_space.empty()) throw DomainError("empty label space");
  std::vector<ClassId> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    ClassId best = label_space[0];
    float best_v = logits(r, best - 1);
    for (ClassId c : label_space) {
      if (c < 1 || c > logits.cols()) throw DomainError("label outside the logit columns");
      if (logits(r, c - 1) > best_v) {
        best_v = logits(r, c - 1);
        best = c;
      }
    }
    out[r] = best;
  }
  return out;
}

double harmonic_mean(double seen_acc, double unseen_acc) {
  const double s = seen_acc + unseen_acc;
  return s == 0.0 ? 0.0 : 2.0 * seen_acc * unseen_acc / s;
}

EvalReport evaluate(const SoftmaxClassifier& clf, const NetBundle& bundle, const FeatureDataset& ds,
                    bool czsl_only) {
  EvalReport r;
  r.mode = bundle.mode;
  r.czsl_only = czsl_only;
  if (ds.test_unseen_x.rows() == 0) throw DomainError("test_unseen partition is empty");
  if (!czsl_only && ds.test_seen_x.rows() == 0) throw DomainError("test_seen partition is empty");
  const auto all = all_ids(ds.semantic);
  const auto unseen = unseen_ids(ds.semantic);
  const auto seen = seen_ids(ds.semantic);

  const Mat lu = clf.logits(bundle, ds.test_unseen_x);
  const auto czsl_pred = predict_labels(lu, unseen);
  r.czsl_top1 = per_class_top1(czsl_pred, ds.test_unseen_y, unseen);
  if (czsl_only) {
    for (auto [c, acc] : per_class_accuracy(czsl_pred, ds.test_unseen_y, unseen)) r.per_class_acc[c] = acc;
    return r;
  }

  const auto pu = predict_labels(lu, all);
  r.U = per_class_top1(pu, ds.test_unseen_y, unseen);
  for (auto [c, acc] : per_class_accuracy(pu, ds.test_unseen_y, unseen)) r.per_class_acc[c] = acc;
  const auto ps = predict_labels(clf.logits(bundle, ds.test_seen_x), all);
  r.S = per_class_top1(ps, ds.test_seen_y, seen);
  for (auto [c, acc] : per_class_accuracy(ps, ds.test_seen_y, seen)) r.per_class_acc[c] = acc;
  r.H = harmonic_mean(r.S, r.U);
  return r;
}

nlohmann::json report_json(const EvalReport& r, const TrainConfig& cfg) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, acc] : r.per_class_acc) per_class[std::to_string(c)] = acc;
  nlohmann::json j = {{"mode", to_string(r.mode)},
                      {"seed", r.seed},
                      {"U", r.U},
                      {"czsl_top1", r.czsl_top1},
                      {"per_class_acc", per_class},
                      {"config", cfg}};
  if (r.czsl_only) {
    j.erase("U");
  } else {
    j["S"] = r.S;
    j["H"] = r.H;
  }
  return j;
}

Rng classifier_rng(std::uint64_t seed) { return Rng(seed).fork(3); }

RunOutcome run_experiment(const FeatureDataset& ds, const TrainConfig& cfg, bool czsl_only) {
  RunOutcome out;
  out.train = train(ds, cfg);
  Rng rng = classifier_rng(cfg.seed);
  out.classifier = fit_final_classifier(out.train.bundle, ds, cfg, rng);
  out.report = evaluate(out.classifier, out.train.bundle, ds, czsl_only);
  out.report.seed = cfg.seed;
  return out;
}

std::vector<EvalReport> n_syn_sweep(const FeatureDataset& ds, const TrainConfig& cfg,
                                    std::span<const std::size_t> counts) {
  const TrainResult trained = train(ds, cfg);
  std::vector<EvalReport> out;
  for (std::size_t n : counts) {
    TrainConfig c = cfg;
    c.n_syn_per_unseen = n;
    Rng rng = classifier_rng(cfg.seed);
    EvalReport r = evaluate(fit_final_classifier(trained.bundle, ds, c, rng), trained.bundle, ds);
    r.seed = cfg.seed;
    out.push_back(r);
  }
  return out;
}

}  // namespace cegzsl
