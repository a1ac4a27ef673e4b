#include "cegzsl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cegzsl/binary_io.hpp"
#include "cegzsl/grad_audit.hpp"
#include "cegzsl/svg.hpp"
#include "cegzsl/trainer.hpp"

namespace cegzsl::cli {

namespace fs = std::filesystem;

namespace {

// ---- config resolution --------------------------------------------------

struct TrainFlags {
  std::string config_path;
  std::string preset;
  std::vector<std::function<void(TrainConfig&)>> overrides;
  CLI::Option* seed_opt = nullptr;
};

template <class T, class Set>
CLI::Option* add_override(CLI::App* app, TrainFlags& f, const std::string& name, const std::string& help,
                          Set set) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *value, help);
  f.overrides.push_back([value, opt, set](TrainConfig& c) {
    if (opt->count() > 0) set(c, *value);
  });
  return opt;
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--config", f.config_path, "JSON config file (flags override it)");
  app->add_option("--preset", f.preset, "Base config: desk, AWA1, AWA2, CUB, FLO or SUN");
  add_override<std::string>(app, f, "--mode", "Objective mode",
                            [](TrainConfig& c, const std::string& v) { c.mode = mode_from_string(v); });
  f.seed_opt = add_override<std::uint64_t>(app, f, "--seed", "Random seed",
                                           [](TrainConfig& c, std::uint64_t v) { c.seed = v; });
  add_override<std::size_t>(app, f, "--epochs", "Training epochs",
                            [](TrainConfig& c, std::size_t v) { c.epochs = v; });
  add_override<std::size_t>(app, f, "--batch", "Mini-batch size",
                            [](TrainConfig& c, std::size_t v) { c.batch_size = v; });
  add_override<double>(app, f, "--tau-e", "Instance-level temperature",
                       [](TrainConfig& c, double v) { c.tau_e = v; });
  add_override<double>(app, f, "--tau-s", "Class-level temperature",
                       [](TrainConfig& c, double v) { c.tau_s = v; });
  add_override<double>(app, f, "--delta", "Ranking margin",
                       [](TrainConfig& c, double v) { c.margin_delta = v; });
  add_override<std::size_t>(app, f, "--n-syn", "Synthetic samples per unseen class",
                            [](TrainConfig& c, std::size_t v) { c.n_syn_per_unseen = v; });
  add_override<std::size_t>(app, f, "--dh", "Embedding width",
                            [](TrainConfig& c, std::size_t v) { c.embed_dim = v; });
  add_override<std::size_t>(app, f, "--dz", "Projection width",
                            [](TrainConfig& c, std::size_t v) { c.proj_dim = v; });
  add_override<std::size_t>(app, f, "--hidden", "Hidden width of G, D and F",
                            [](TrainConfig& c, std::size_t v) { c.hidden = v; });
  add_override<std::size_t>(app, f, "--noise-dim", "Generator noise width (0: same as d_a)",
                            [](TrainConfig& c, std::size_t v) { c.noise_dim = v; });
  add_override<std::string>(app, f, "--sampler", "Batch sampler: random or pk",
                            [](TrainConfig& c, const std::string& v) { c.sampler = sampler_from_string(v); });
  add_override<std::size_t>(app, f, "--P", "Positives per anchor (pk sampler)",
                            [](TrainConfig& c, std::size_t v) { c.pk_positives = v; });
  add_override<std::size_t>(app, f, "--K", "Negatives per anchor (pk sampler)",
                            [](TrainConfig& c, std::size_t v) { c.pk_negatives = v; });
  add_override<bool>(app, f, "--minmax-features", "Rescale features to [0, 1] by the training range (true/false)",
                    [](TrainConfig& c, bool v) { c.minmax_features = v; });
  add_override<double>(app, f, "--lr", "Adam learning rate", [](TrainConfig& c, double v) { c.lr = v; });
  add_override<std::size_t>(app, f, "--d-steps", "Discriminator steps per generator step",
                            [](TrainConfig& c, std::size_t v) { c.d_steps_per_g_step = v; });
  add_override<std::string>(app, f, "--generator-loss", "minimax or non_saturating",
                            [](TrainConfig& c, const std::string& v) {
                              c.generator_loss = generator_loss_from_string(v);
                            });
  add_override<std::size_t>(app, f, "--classifier-epochs", "Final classifier epochs",
                            [](TrainConfig& c, std::size_t v) { c.classifier_epochs = v; });
  add_override<double>(app, f, "--classifier-lr", "Final classifier learning rate",
                       [](TrainConfig& c, double v) { c.classifier_lr = v; });
}

TrainConfig preset_config(const std::string& name) {
  if (name.empty()) return TrainConfig{};
  if (name == "desk") return desk_preset();
  return paper_preset(name);
}

TrainConfig resolve_config(const TrainFlags& f, std::ostream& err) {
  TrainConfig cfg = preset_config(f.preset);
  bool seed_given = f.seed_opt && f.seed_opt->count() > 0;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw IoError("cannot open config file " + f.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + f.config_path + ": " + e.what());
    }
    from_json(j, cfg);
    seed_given = seed_given || (j.is_object() && j.contains("seed"));
  }
  for (const auto& apply : f.overrides) apply(cfg);
  if (!seed_given) err << "note: no --seed given; using seed " << cfg.seed << "\n";
  cfg.validate();
  return cfg;
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  binary::write_text_atomic(path, j.dump(2) + "\n");
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::size_t> parse_counts(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("expected a comma-separated list of counts, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty count list");
  return out;
}

// ---- synth-data ---------------------------------------------------------

struct SynthArgs {
  SyntheticWorldSpec spec;
  std::string out;
  std::string format;
  CLI::Option* seed_opt = nullptr;
};

int cmd_synth_data(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  if (a.seed_opt->count() == 0) err << "note: no --seed given; using seed 0\n";
  if (a.spec.noise_sigma == 0.0) {
    err << "warning: sigma 0 makes every instance equal its class mean (degenerate world)\n";
  }
  const SyntheticWorld w = make_synthetic_world(a.spec);
  DatasetFormat format = DatasetFormat::gzb;
  if (a.format == "csv" || (a.format.empty() && fs::path(a.out).extension() != ".gzb")) {
    format = DatasetFormat::csv_bundle;
  } else if (!a.format.empty() && a.format != "gzb") {
    throw ConfigError("unknown dataset format '" + a.format + "'");
  }
  save_dataset(w.dataset, a.out, format);
  out << "wrote " << a.out << " (S=" << a.spec.seen << " U=" << a.spec.unseen << " d_x=" << a.spec.feature_dim
      << " d_a=" << a.spec.attr_dim << " n=" << a.spec.n_per_class << " seed=" << a.spec.seed << ")\n"
      << "oracle nearest-mean accuracy: seen " << fmt(w.oracle_seen_acc) << ", unseen "
      << fmt(w.oracle_unseen_acc) << "\n";
  return kOk;
}

// ---- train / eval -------------------------------------------------------

struct TrainArgs {
  TrainFlags flags;
  std::string dataset;
  std::string out;
  bool czsl_only = false;
};

void print_report(std::ostream& out, const EvalReport& r) {
  out << to_string(r.mode) << " seed " << r.seed << ": ";
  if (!r.czsl_only) out << "U " << fmt(r.U) << "  S " << fmt(r.S) << "  H " << fmt(r.H) << "  ";
  out << "czsl " << fmt(r.czsl_top1) << "\n";
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = resolve_config(a.flags, err);
  const FeatureDataset ds = load_dataset(a.dataset);
  fs::create_directories(a.out);

  Trainer trainer(ds, cfg);
  std::string log;
  Checkpoint last_good{cfg, trainer.bundle(), trainer.state(), std::nullopt};
  const std::size_t per_epoch = trainer.steps_per_epoch();
  try {
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      for (std::size_t s = 0; s < per_epoch; ++s) log += step_log_json(trainer.step()) + "\n";
      last_good.bundle = trainer.bundle();
      last_good.state = trainer.state();
    }
  } catch (const NumericsError& e) {
    binary::write_text_atomic(out_path(a.out, "log.jsonl"), log);
    checkpoint_save(last_good, out_path(a.out, "checkpoint.cegz"));
    err << "error: " << e.what() << "; last good checkpoint (step " << last_good.state.step
        << ") written to " << out_path(a.out, "checkpoint.cegz") << "\n";
    return kRuntime;
  }

  Rng rng = classifier_rng(cfg.seed);
  SoftmaxClassifier clf = fit_final_classifier(trainer.bundle(), ds, cfg, rng);
  EvalReport report = evaluate(clf, trainer.bundle(), ds, a.czsl_only);
  report.seed = cfg.seed;

  binary::write_text_atomic(out_path(a.out, "log.jsonl"), log);
  checkpoint_save({cfg, trainer.bundle(), trainer.state(), std::move(clf)},
                  out_path(a.out, "checkpoint.cegz"));
  write_json(out_path(a.out, "report.json"), report_json(report, cfg));
  print_report(out, report);
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  bool czsl_only = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  Checkpoint ck = checkpoint_load(a.checkpoint);
  const FeatureDataset ds = load_dataset(a.dataset);
  const NetBundle& b = ck.bundle;
  if (b.feature_dim != ds.feature_dim() || b.attr_dim != ds.semantic.dim() || b.seen != ds.seen_count() ||
      b.unseen != ds.unseen_count()) {
    throw ShapeError("checkpoint expects d_x=" + std::to_string(b.feature_dim) + " d_a=" +
                     std::to_string(b.attr_dim) + " S=" + std::to_string(b.seen) + " U=" +
                     std::to_string(b.unseen) + " but the dataset has d_x=" +
                     std::to_string(ds.feature_dim()) + " d_a=" + std::to_string(ds.semantic.dim()) +
                     " S=" + std::to_string(ds.seen_count()) + " U=" + std::to_string(ds.unseen_count()));
  }
  if (!ck.classifier) {
    Rng rng = classifier_rng(ck.config.seed);
    ck.classifier = fit_final_classifier(b, ds, ck.config, rng);
  }
  EvalReport report = evaluate(*ck.classifier, b, ds, a.czsl_only);
  report.seed = ck.config.seed;
  const nlohmann::json j = report_json(report, ck.config);
  if (a.out.empty()) {
    out << j.dump(2) << "\n";
  } else {
    fs::create_directories(a.out);
    write_json(out_path(a.out, "report.json"), j);
    print_report(out, report);
  }
  return kOk;
}

// ---- ablate -------------------------------------------------------------

struct AblateArgs {
  TrainFlags flags;
  std::string dataset;
  std::string out;
  std::vector<std::string> modes;
  std::string seeds;
  std::string n_syn_sweep;
  std::string sweep_mode = "ce_full";
  bool tau_grid = false;
  std::size_t jobs = 1;
};

struct Cell {
  std::string kind;  // "mode", "sweep" or "tau"
  TrainConfig cfg;
  std::vector<EvalReport> reports;  // one, or one per sweep count
  std::string error;
};

void run_cells(std::vector<Cell>& cells, const FeatureDataset& ds, std::span<const std::size_t> counts,
               std::size_t jobs) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        if (c.kind == "sweep") {
          c.reports = n_syn_sweep(ds, c.cfg, counts);
        } else {
          c.reports = {run_experiment(ds, c.cfg).report};
        }
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(jobs, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

struct Mean {
  double U = 0, S = 0, H = 0;
  std::size_t ok = 0, failed = 0;

  void add(const EvalReport& r) {
    U += r.U;
    S += r.S;
    H += r.H;
    ++ok;
  }
  double u() const { return ok ? U / ok : NAN; }
  double s() const { return ok ? S / ok : NAN; }
  double h() const { return ok ? H / ok : NAN; }
};

nlohmann::json cell_json(const Cell& c) {
  nlohmann::json j = {{"kind", c.kind},
                      {"mode", to_string(c.cfg.mode)},
                      {"seed", c.cfg.seed},
                      {"tau_e", c.cfg.tau_e},
                      {"tau_s", c.cfg.tau_s}};
  if (!c.error.empty()) j["error"] = c.error;
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : c.reports) {
    rs.push_back({{"U", r.U}, {"S", r.S}, {"H", r.H}, {"czsl_top1", r.czsl_top1}});
  }
  j["results"] = rs;
  return j;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const TrainConfig base = resolve_config(a.flags, err);
  const FeatureDataset ds = load_dataset(a.dataset);
  std::vector<Mode> modes;
  for (const auto& m : a.modes) {
    if (!m.empty()) modes.push_back(mode_from_string(m));
  }
  std::vector<std::uint64_t> seeds;
  if (a.seeds.empty()) {
    seeds = {base.seed};
  } else {
    for (std::size_t s : parse_counts(a.seeds)) seeds.push_back(s);
  }
  const std::vector<std::size_t> counts =
      a.n_syn_sweep.empty() ? std::vector<std::size_t>{} : parse_counts(a.n_syn_sweep);
  const Mode sweep_mode = mode_from_string(a.sweep_mode);
  const std::vector<double> taus = {0.01, 0.1, 1.0, 10.0};

  std::vector<Cell> cells;
  for (Mode m : modes) {
    for (auto seed : seeds) {
      TrainConfig c = base;
      c.mode = m;
      c.seed = seed;
      cells.push_back({"mode", c, {}, {}});
    }
  }
  if (!counts.empty()) {
    for (auto seed : seeds) {
      TrainConfig c = base;
      c.mode = sweep_mode;
      c.seed = seed;
      cells.push_back({"sweep", c, {}, {}});
    }
  }
  if (a.tau_grid) {
    for (double te : taus) {
      for (double ts : taus) {
        for (auto seed : seeds) {
          TrainConfig c = base;
          c.mode = sweep_mode;
          c.seed = seed;
          c.tau_e = te;
          c.tau_s = ts;
          cells.push_back({"tau", c, {}, {}});
        }
      }
    }
  }
  run_cells(cells, ds, counts, a.jobs);
  fs::create_directories(a.out);

  nlohmann::json report = {{"config", base}, {"dataset", a.dataset}};
  report["seeds"] = seeds;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& c : cells) {
    if (!c.error.empty()) {
      failures.push_back(cell_json(c));
      err << "cell failed (" << c.kind << ", " << to_string(c.cfg.mode) << ", seed " << c.cfg.seed
          << "): " << c.error << "\n";
    }
  }

  if (!modes.empty()) {
    std::string csv = "mode,U,S,H,runs,failed\n";
    nlohmann::json rows = nlohmann::json::array();
    for (Mode m : modes) {
      Mean mean;
      for (const auto& c : cells) {
        if (c.kind != "mode" || c.cfg.mode != m) continue;
        if (c.error.empty()) {
          mean.add(c.reports.front());
        } else {
          ++mean.failed;
        }
      }
      csv += to_string(m) + "," + fmt(mean.u()) + "," + fmt(mean.s()) + "," + fmt(mean.h()) + "," +
             std::to_string(mean.ok) + "," + std::to_string(mean.failed) + "\n";
      rows.push_back({{"mode", to_string(m)}, {"U", mean.u()}, {"S", mean.s()}, {"H", mean.h()},
                      {"runs", mean.ok}, {"failed", mean.failed}});
      out << to_string(m) << ": U " << fmt(mean.u()) << "  S " << fmt(mean.s()) << "  H " << fmt(mean.h())
          << "\n";
    }
    binary::write_text_atomic(out_path(a.out, "table.csv"), csv);
    report["table"] = rows;
  }

  if (!counts.empty()) {
    std::vector<Mean> means(counts.size());
    for (const auto& c : cells) {
      if (c.kind != "sweep") continue;
      for (std::size_t i = 0; i < counts.size(); ++i) {
        if (c.error.empty()) {
          means[i].add(c.reports[i]);
        } else {
          ++means[i].failed;
        }
      }
    }
    std::string csv = "n_syn,U,S,H,runs,failed\n";
    nlohmann::json rows = nlohmann::json::array();
    svg::Series su{"U", {}}, ss{"S", {}}, sh{"H", {}};
    std::vector<std::string> ticks;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const Mean& m = means[i];
      csv += std::to_string(counts[i]) + "," + fmt(m.u()) + "," + fmt(m.s()) + "," + fmt(m.h()) + "," +
             std::to_string(m.ok) + "," + std::to_string(m.failed) + "\n";
      rows.push_back({{"n_syn", counts[i]}, {"U", m.u()}, {"S", m.s()}, {"H", m.h()}});
      su.ys.push_back(m.u());
      ss.ys.push_back(m.s());
      sh.ys.push_back(m.h());
      ticks.push_back(std::to_string(counts[i]));
      out << "n_syn " << counts[i] << ": U " << fmt(m.u()) << "  S " << fmt(m.s()) << "  H " << fmt(m.h())
          << "\n";
    }
    binary::write_text_atomic(out_path(a.out, "sweep.csv"), csv);
    binary::write_text_atomic(
        out_path(a.out, "plot.svg"),
        svg::line_plot(to_string(sweep_mode) + ": accuracy vs synthetic samples per unseen class",
                       "synthetic samples per unseen class", ticks, {su, ss, sh}));
    report["sweep"] = rows;
  }

  if (a.tau_grid) {
    std::string csv = "tau_e,tau_s,U,S,H,runs,failed\n";
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::vector<double>> grid(taus.size(), std::vector<double>(taus.size(), NAN));
    for (std::size_t i = 0; i < taus.size(); ++i) {
      for (std::size_t k = 0; k < taus.size(); ++k) {
        Mean m;
        for (const auto& c : cells) {
          if (c.kind != "tau" || c.cfg.tau_e != taus[i] || c.cfg.tau_s != taus[k]) continue;
          if (c.error.empty()) {
            m.add(c.reports.front());
          } else {
            ++m.failed;
          }
        }
        grid[i][k] = m.h();
        csv += fmt(taus[i]) + "," + fmt(taus[k]) + "," + fmt(m.u()) + "," + fmt(m.s()) + "," + fmt(m.h()) +
               "," + std::to_string(m.ok) + "," + std::to_string(m.failed) + "\n";
        rows.push_back({{"tau_e", taus[i]}, {"tau_s", taus[k]}, {"U", m.u()}, {"S", m.s()}, {"H", m.h()}});
      }
    }
    std::vector<std::string> ticks = {"0.01", "0.1", "1", "10"};
    binary::write_text_atomic(out_path(a.out, "tau_grid.csv"), csv);
    binary::write_text_atomic(out_path(a.out, "tau_heatmap.svg"),
                              svg::heatmap(to_string(sweep_mode) + ": H over temperatures", "tau_e",
                                           "tau_s", ticks, ticks, grid));
    report["tau_grid"] = rows;
  }

  report["failures"] = failures;
  write_json(out_path(a.out, "report.json"), report);
  return kOk;
}

// ---- gradcheck ----------------------------------------------------------

struct GradArgs {
  AuditOptions audit;
  std::string flip;
  std::string out;
};

int cmd_gradcheck(GradArgs a, std::ostream& out, std::ostream& err) {
  if (!a.flip.empty()) a.audit.flip_family = a.flip;
  const AuditResult r = run_grad_audit(a.audit);
  nlohmann::json families = nlohmann::json::array();
  for (const auto& e : r.worst_by_family()) {
    const bool ok = e.report.passed(r.tol);
    char line[256];
    std::snprintf(line, sizeof line, "%-28s max_rel_error %.3e  checked %4zu  excluded %3zu  %s\n",
                  e.family.c_str(), e.report.max_rel_error, e.report.checked, e.report.flagged,
                  ok ? "PASS" : "FAIL");
    out << line;
    families.push_back({{"family", e.family},
                        {"max_rel_error", e.report.max_rel_error},
                        {"worst_block", e.report.worst_block},
                        {"worst_index", e.report.worst_index},
                        {"checked", e.report.checked},
                        {"excluded_at_kinks", e.report.flagged},
                        {"passed", ok}});
  }
  const auto failures = r.failures();
  for (const auto& f : failures) {
    err << "FAIL " << f.family << " instance " << f.instance << ": block " << f.report.worst_block
        << " entry " << f.report.worst_index << " analytic " << f.report.worst_analytic << " numeric "
        << f.report.worst_numeric << " rel_error " << f.report.max_rel_error << "\n";
  }
  out << (failures.empty() ? "all families within " : "failures above tolerance ") << r.tol << "\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_json(out_path(a.out, "gradcheck.json"),
               {{"tol", r.tol}, {"instances", a.audit.instances}, {"seed", a.audit.seed},
                {"families", families}, {"passed", failures.empty()}});
  }
  return failures.empty() ? kOk : kVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-generating GZSL toolkit with contrastive embedding", "cegzsl"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Write a synthetic world dataset");
  s->add_option("--S", synth.spec.seen, "Seen classes");
  s->add_option("--U", synth.spec.unseen, "Unseen classes");
  s->add_option("--dx", synth.spec.feature_dim, "Feature width");
  s->add_option("--da", synth.spec.attr_dim, "Descriptor width");
  s->add_option("--n", synth.spec.n_per_class, "Instances per class");
  s->add_option("--sigma", synth.spec.noise_sigma, "Feature noise standard deviation");
  s->add_option("--map-scale", synth.spec.map_scale, "Std of the descriptor-to-mean weights");
  s->add_option("--map-offset", synth.spec.map_offset, "Mean of the descriptor-to-mean bias");
  synth.seed_opt = s->add_option("--seed", synth.spec.seed, "Random seed");
  s->add_option("-o,--out", synth.out, "Output path (.gzb file or csv-bundle directory)")->required();
  s->add_option("--format", synth.format, "gzb or csv (default: by extension)");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train, fit the final classifier and evaluate");
  add_train_flags(t, train_args.flags);
  t->add_option("--dataset", train_args.dataset, "Dataset (.gzb or csv-bundle)")->required();
  t->add_option("--out", train_args.out, "Output directory")->required();
  t->add_flag("--czsl-only", train_args.czsl_only, "Report conventional ZSL only");

  EvalArgs eval_args;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.cegz")->required();
  e->add_option("--dataset", eval_args.dataset, "Dataset (.gzb or csv-bundle)")->required();
  e->add_option("--out", eval_args.out, "Output directory (default: print JSON)");
  e->add_flag("--czsl-only", eval_args.czsl_only, "Report conventional ZSL only");

  AblateArgs ab;
  ab.modes = {"gen_only", "se_only", "se_basic", "se_embed", "ce_full"};
  auto* b = app.add_subcommand("ablate", "Mode table, synthesis-count sweep and temperature grid");
  add_train_flags(b, ab.flags);
  b->add_option("--dataset", ab.dataset, "Dataset (.gzb or csv-bundle)")->required();
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--modes", ab.modes, "Modes for the table (empty list skips it)")->delimiter(',');
  b->add_option("--seeds", ab.seeds, "Comma-separated seeds (default: the config seed)");
  b->add_option("--n-syn-sweep", ab.n_syn_sweep, "Comma-separated synthesis counts to sweep");
  b->add_option("--sweep-mode", ab.sweep_mode, "Mode used by the sweep and the temperature grid");
  b->add_flag("--tau-grid", ab.tau_grid, "Run the 4x4 temperature grid");
  b->add_option("--jobs", ab.jobs, "Worker threads for independent cells");

  GradArgs g;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit of every loss gradient");
  gc->add_option("--tol", g.audit.tol, "Maximum relative error");
  gc->add_option("--instances", g.audit.instances, "Random instances per family");
  gc->add_option("--seed", g.audit.seed, "Random seed");
  gc->add_option("--tau-e", g.audit.tau_e, "Instance-level temperature");
  gc->add_option("--tau-s", g.audit.tau_s, "Class-level temperature");
  gc->add_option("--flip", g.flip, "Negate one family's analytic gradient (fault injection)");
  gc->add_option("--out", g.out, "Write gradcheck.json here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth_data(synth, out, err);
    if (t->parsed()) return cmd_train(train_args, out, err);
    if (e->parsed()) return cmd_eval(eval_args, out, err);
    if (b->parsed()) return cmd_ablate(ab, out, err);
    if (gc->parsed()) return cmd_gradcheck(g, out, err);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace cegzsl::cli
