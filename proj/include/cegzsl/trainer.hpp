#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cegzsl/config.hpp"
#include "cegzsl/dataset.hpp"
#include "cegzsl/objective.hpp"

namespace cegzsl {

// ---- batches ---------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> rows;     // indices into train_x
  std::vector<ClassId> labels;       // class id per row
  std::vector<InstanceTask> tasks;   // instance-level anchors over `rows`
};

// random_batch: batch_size rows drawn uniformly (without replacement while
// the training set allows), tasks derived from labels. pk: anchors each get
// P same-class and K other-class rows appended to the batch; the number of
// anchors is batch_size / (1 + P + K), at least one.
// A batch with fewer than two distinct classes is redrawn up to 10 times
// before SamplerError.
Batch sample_batch(const FeatureDataset& ds, const TrainConfig& cfg, Rng& rng);

// For every row with at least one same-class and one other-class row: one
// randomly selected positive and every other-class row as negatives. Rows
// without both are skipped.
std::vector<InstanceTask> derive_instance_tasks(std::span<const ClassId> labels, Rng& rng);

// ---- networks --------------------------------------------------------------

struct NetBundle {
  Nets<float> nets;
  Mode mode = Mode::ce_full;
  std::size_t feature_dim = 0;
  std::size_t attr_dim = 0;
  std::size_t seen = 0;
  std::size_t unseen = 0;
  // Per-column x -> (x - feature_lo) * feature_inv_range, fitted on train_x.
  // Both are empty when features are used as given.
  std::vector<float> feature_lo;
  std::vector<float> feature_inv_range;

  // Features as the networks see them.
  Mat prepare(const Mat& x) const;
};

// Fresh networks for the configured mode, seeded from cfg.seed. Networks the
// mode does not use stay empty.
NetBundle init_bundle(const FeatureDataset& ds, const TrainConfig& cfg);

// ---- training --------------------------------------------------------------

struct StepLog {
  std::uint64_t step = 0;
  ObjectiveTerms terms;
  double wall_ms = 0.0;
};

struct TrainerState {
  std::uint64_t step = 0;
  std::uint64_t rng_counter = 0;
};

class Trainer {
 public:
  Trainer(const FeatureDataset& ds, TrainConfig cfg);
  // Resumes from a checkpointed bundle and state.
  Trainer(const FeatureDataset& ds, TrainConfig cfg, NetBundle bundle, TrainerState state);

  // d_steps_per_g_step discriminator ascent steps followed by one joint
  // descent step on the mode's generator-side objective.
  StepLog step();
  std::size_t steps_per_epoch() const;
  // Runs cfg.epochs epochs, invoking `on_step` after every step.
  void run(const std::function<void(const StepLog&)>& on_step = {});

  const NetBundle& bundle() const { return bundle_; }
  NetBundle& bundle() { return bundle_; }
  const TrainConfig& config() const { return cfg_; }
  TrainerState state() const { return {step_, rng_.counter()}; }

 private:
  StepBatch<float> make_step_batch(Rng& rng);

  const FeatureDataset& ds_;
  TrainConfig cfg_;
  NetBundle bundle_;
  Rng rng_;
  std::uint64_t step_ = 0;
  Mat seen_a_;
  Mat train_x_;  // prepared
};

struct TrainResult {
  NetBundle bundle;
  std::vector<StepLog> log;
  TrainerState state;
};

TrainResult train(const FeatureDataset& ds, const TrainConfig& cfg);

// One JSON object per line: {step, V, L_ins, L_cls, L_se_real, L_se_sync, wall_ms}.
std::string step_log_json(const StepLog& s);

// ---- final classifier and evaluation ------------------------------------

enum class ClassifierSpace { feature, embedding };

std::string to_string(ClassifierSpace s);

// Linear softmax over all S+U classes, applied to raw features or to E(x).
struct SoftmaxClassifier {
  Mlp<float> linear;
  ClassifierSpace space = ClassifierSpace::embedding;

  Mat logits(const NetBundle& bundle, const Mat& x) const;
};

// Trains on E(train_x) with seen labels plus synthesized unseen embeddings
// (raw features in gen_only). se_only has no generator and uses the fixed
// descriptor compatibility E(x)^T a as its logits.
SoftmaxClassifier fit_final_classifier(const NetBundle& bundle, const FeatureDataset& ds,
                                       const TrainConfig& cfg, Rng& rng);

// Argmax of the logits restricted to `label_space`.
std::vector<ClassId> predict_labels(const Mat& logits, std::span<const ClassId> label_space);

double harmonic_mean(double seen_acc, double unseen_acc);

struct EvalReport {
  std::map<ClassId, double> per_class_acc;
  double U = 0.0;
  double S = 0.0;
  double H = 0.0;
  double czsl_top1 = 0.0;
  bool czsl_only = false;
  Mode mode = Mode::ce_full;
  std::uint64_t seed = 0;
};

// U and S are per-class top-1 over the full S+U label space on test_unseen
// and test_seen; czsl_top1 restricts the label space to unseen classes.
// With `czsl_only`, the seen partition is not required and S/H are omitted.
EvalReport evaluate(const SoftmaxClassifier& clf, const NetBundle& bundle, const FeatureDataset& ds,
                    bool czsl_only = false);

nlohmann::json report_json(const EvalReport& r, const TrainConfig& cfg);

// ---- experiments -----------------------------------------------------------

// Stream of the final classifier's randomness for a run seeded with `seed`.
Rng classifier_rng(std::uint64_t seed);

struct RunOutcome {
  TrainResult train;
  SoftmaxClassifier classifier;
  EvalReport report;
};

// train, fit_final_classifier, evaluate.
RunOutcome run_experiment(const FeatureDataset& ds, const TrainConfig& cfg, bool czsl_only = false);

// One training run, then a fresh final classifier per synthesis count.
std::vector<EvalReport> n_syn_sweep(const FeatureDataset& ds, const TrainConfig& cfg,
                                    std::span<const std::size_t> counts);

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  TrainConfig config;
  NetBundle bundle;
  TrainerState state;
  std::optional<SoftmaxClassifier> classifier;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
// Throws MagicMismatch for foreign files and HashMismatch when the payload or
// embedded config does not match its recorded hash.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void checkpoint_save(const Checkpoint& ck, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);
// Also rejects a checkpoint whose config hash differs from `expected`.
Checkpoint checkpoint_load(const std::string& path, const TrainConfig& expected);

}  // namespace cegzsl
