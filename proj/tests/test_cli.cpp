#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "cegzsl/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cegzsl::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// A small world plus flags that keep every training run well under a second.
struct Workspace {
  fs::path dir;
  std::string world;

  explicit Workspace(const std::string& name) : dir(fixture::scratch_dir("cli_" + name)) {
    world = (dir / "world.gzb").string();
    REQUIRE(run({"synth-data", "--S", "4", "--U", "2", "--dx", "8", "--da", "3", "--n", "20", "--seed", "1", "-o",
                 world})
                .code == 0);
  }

  std::vector<std::string> fast(std::vector<std::string> args) const {
    for (const char* a : {"--dataset", "", "--epochs", "1", "--hidden", "16", "--dh", "8", "--dz", "4",
                          "--classifier-epochs", "2", "--n-syn", "10", "--seed", "3"}) {
      args.push_back(*a ? a : world);
    }
    return args;
  }
};

}  // namespace

TEST_CASE("synth-data writes a valid world and reports oracle accuracy") {
  const auto dir = fixture::scratch_dir("cli_synth");
  const auto path = (dir / "w.gzb").string();
  const Result r = run({"synth-data", "--S", "7", "--U", "3", "--dx", "32", "--da", "8", "--n", "100", "--seed", "1",
                        "-o", path});
  CHECK(r.code == 0);
  CHECK(r.out.find("oracle") != std::string::npos);
  const auto ds = cegzsl::load_dataset(path);
  CHECK(ds.seen_count() == 7);
  CHECK(ds.feature_dim() == 32);

  const Result unseeded = run({"synth-data", "-o", (dir / "d.gzb").string()});
  CHECK(unseeded.code == 0);
  CHECK(unseeded.err.find("seed 0") != std::string::npos);
  CHECK(cegzsl::load_dataset((dir / "d.gzb").string()) == fixture::world(0).dataset);

  const Result flat = run({"synth-data", "--sigma", "0", "--seed", "2", "-o", (dir / "flat.gzb").string()});
  CHECK(flat.code == 0);
  CHECK(flat.err.find("warning") != std::string::npos);

  const Result csv = run({"synth-data", "--seed", "2", "--format", "csv", "-o", (dir / "bundle").string()});
  CHECK(csv.code == 0);
  CHECK(fs::exists(dir / "bundle" / "meta.json"));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"synth-data"}).code == 2);  // -o is required
  CHECK(run({"synth-data", "--S", "many", "-o", "x.gzb"}).code == 2);
  const Workspace ws("usage");
  CHECK(run(ws.fast({"train", "--out", (ws.dir / "r").string(), "--mode", "nonsense"})).code == 2);
  CHECK(run(ws.fast({"train", "--out", (ws.dir / "r").string(), "--tau-e", "0"})).code == 2);
  CHECK(run(ws.fast({"train", "--out", (ws.dir / "r").string(), "--preset", "MNIST"})).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train writes a report, a log and a checkpoint, deterministically") {
  const Workspace ws("train");
  const auto a = ws.dir / "a", b = ws.dir / "b";
  const Result ra = run(ws.fast({"train", "--out", a.string(), "--tau-e", "0.1", "--tau-s", "0.1"}));
  REQUIRE(ra.code == 0);
  REQUIRE(run(ws.fast({"train", "--out", b.string(), "--tau-e", "0.1", "--tau-s", "0.1"})).code == 0);
  for (const char* f : {"report.json", "log.jsonl", "checkpoint.cegz"}) CHECK(fs::exists(a / f));
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "checkpoint.cegz") == slurp(b / "checkpoint.cegz"));

  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  CHECK(report.contains("H"));
  CHECK(report["config"]["tau_e"] == 0.1);
  CHECK(report["config"]["tau_s"] == 0.1);
  CHECK(report["config"]["seed"] == 3);

  const std::string log = slurp(a / "log.jsonl");
  CHECK(lines(log) >= 1);
  CHECK(nlohmann::json::parse(log.substr(0, log.find('\n'))).contains("L_ins"));
  // No temporary files are left behind by atomic writes.
  for (const auto& e : fs::directory_iterator(a)) CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const Workspace ws("precedence");
  const auto cfg = ws.dir / "cfg.json";
  std::ofstream(cfg) << R"({"tau_e": 0.5, "tau_s": 2.0, "mode": "ce_ins_only", "seed": 11})";
  const auto out = ws.dir / "r";
  std::vector<std::string> args = {"train", "--config", cfg.string(), "--out", out.string(), "--dataset", ws.world,
                                   "--epochs", "1", "--hidden", "16", "--classifier-epochs", "1", "--tau-e", "0.2"};
  const Result r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("no --seed") == std::string::npos);  // the config file supplied one
  const auto c = nlohmann::json::parse(slurp(out / "report.json"))["config"];
  CHECK(c["tau_e"] == 0.2);
  CHECK(c["tau_s"] == 2.0);
  CHECK(c["mode"] == "ce_ins_only");
  CHECK(c["seed"] == 11);
  CHECK(c["epochs"] == 1);
  CHECK(c["margin_delta"] == 1.0);

  std::ofstream(ws.dir / "bad.json") << R"({"temperature": 1})";
  args[2] = (ws.dir / "bad.json").string();
  CHECK(run(args).code == 2);
}

TEST_CASE("eval reproduces the training report and checks dimensions") {
  const Workspace ws("eval");
  const auto t = ws.dir / "t";
  REQUIRE(run(ws.fast({"train", "--out", t.string()})).code == 0);
  const std::string ck = (t / "checkpoint.cegz").string();
  const auto e = ws.dir / "e";
  REQUIRE(run({"eval", "--checkpoint", ck, "--dataset", ws.world, "--out", e.string()}).code == 0);
  CHECK(slurp(e / "report.json") == slurp(t / "report.json"));

  const Result cz = run({"eval", "--checkpoint", ck, "--dataset", ws.world, "--czsl-only"});
  REQUIRE(cz.code == 0);
  const auto j = nlohmann::json::parse(cz.out);
  CHECK(j.contains("czsl_top1"));
  CHECK_FALSE(j.contains("S"));
  CHECK_FALSE(j.contains("H"));

  const auto other = (ws.dir / "other.gzb").string();
  REQUIRE(run({"synth-data", "--S", "4", "--U", "2", "--dx", "9", "--da", "3", "--n", "20", "-o", other}).code == 0);
  const Result wrong = run({"eval", "--checkpoint", ck, "--dataset", other});
  CHECK(wrong.code == 3);
  CHECK(wrong.err.find("d_x=8") != std::string::npos);

  CHECK(run({"eval", "--checkpoint", (ws.dir / "missing.cegz").string(), "--dataset", ws.world}).code == 3);
  std::ofstream(ws.dir / "junk.cegz") << "not a checkpoint";
  CHECK(run({"eval", "--checkpoint", (ws.dir / "junk.cegz").string(), "--dataset", ws.world}).code == 3);
}

TEST_CASE("a diverging run exits 3 and keeps the last good checkpoint") {
  const Workspace ws("diverge");
  const auto out = ws.dir / "r";
  const Result r = run(ws.fast({"train", "--out", out.string(), "--lr", "1e30"}));
  CHECK(r.code == 3);
  CHECK(fs::exists(out / "checkpoint.cegz"));
  CHECK_FALSE(fs::exists(out / "report.json"));
  CHECK_NOTHROW(cegzsl::checkpoint_load((out / "checkpoint.cegz").string()));
}

TEST_CASE("gradcheck exit codes") {
  const Result ok = run({"gradcheck", "--instances", "1"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("class_contrastive") != std::string::npos);
  const Result flipped = run({"gradcheck", "--instances", "1", "--flip", "ranking_real"});
  CHECK(flipped.code == 1);
  CHECK(flipped.err.find("ranking_real") != std::string::npos);
  CHECK(flipped.err.find("block") != std::string::npos);
  CHECK(run({"gradcheck", "--instances", "1", "--tol", "1e-12"}).code == 1);
}

TEST_CASE("ablate emits the table, sweep and temperature grid") {
  const Workspace ws("ablate");
  const auto one = ws.dir / "one";
  REQUIRE(run(ws.fast({"ablate", "--out", one.string(), "--modes", "ce_full"})).code == 0);
  CHECK(slurp(one / "table.csv").rfind("mode,U,S,H,runs,failed\n", 0) == 0);
  CHECK(lines(slurp(one / "table.csv")) == 2);
  CHECK_FALSE(fs::exists(one / "plot.svg"));
  CHECK_FALSE(fs::exists(one / "tau_heatmap.svg"));

  const auto t5 = ws.dir / "t5";
  REQUIRE(run(ws.fast({"ablate", "--out", t5.string(), "--modes", "ce_ins_only,ce_cls_only,ce_full"})).code == 0);
  const std::string table = slurp(t5 / "table.csv");
  CHECK(lines(table) == 4);
  CHECK(table.find("\nce_cls_only,") != std::string::npos);

  const auto sw = ws.dir / "sweep";
  REQUIRE(run(ws.fast({"ablate", "--out", sw.string(), "--modes", "", "--n-syn-sweep", "0,10,50", "--tau-grid",
                       "--seeds", "1,2", "--jobs", "2"}))
              .code == 0);
  CHECK_FALSE(fs::exists(sw / "table.csv"));
  CHECK(lines(slurp(sw / "sweep.csv")) == 4);
  CHECK(lines(slurp(sw / "tau_grid.csv")) == 17);
  CHECK(slurp(sw / "plot.svg").find("<svg") != std::string::npos);
  CHECK(slurp(sw / "tau_heatmap.svg").find("<svg") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(sw / "report.json"));
  CHECK(report["tau_grid"].size() == 16);
  CHECK(report["seeds"] == nlohmann::json::array({1, 2}));
}

TEST_CASE("ablate records failing cells and keeps going") {
  const Workspace ws("ablate_fail");
  const auto out = ws.dir / "r";
  const Result r = run(ws.fast({"ablate", "--out", out.string(), "--modes", "se_only,ce_full", "--lr", "1e30"}));
  CHECK(r.code == 0);
  const std::string table = slurp(out / "table.csv");
  CHECK(table.find("ce_full,,,,0,1") != std::string::npos);
  CHECK(table.find("se_only,") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(out / "report.json"))["failures"].size() >= 1);
}
