#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nstm/cli.hpp"
#include "nstm/dyck.hpp"
#include "nstm/trainer.hpp"

using namespace nstm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "nstm");
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string machine(const std::string& name) {
  return (fs::path(NSTM_SOURCE_DIR) / "machines" / name).string();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nstm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"bisim", "--spec", machine("flip.json"), "--mode", "fuzzy"}).code == kExitUsage);
  CHECK(run({"validate", "--spec", "/no/such/file.json"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("validate") {
  auto ok = run({"validate", "--spec", machine("increment.json")});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.rfind("valid ", 0) == 0);

  const auto dir = scratch("validate");
  std::ofstream(dir / "holey.json") << R"({"states": ["q1"], "symbols": ["b", "a"], "blank": "b",
    "start": "q1", "rules": [["q1", "a", "q1", "a", 1]]})";
  auto bad = run({"--emit-json", "validate", "--spec", (dir / "holey.json").string()});
  CHECK(bad.code == kExitVerificationFailed);
  CHECK(nlohmann::json::parse(bad.out)["valid"] == false);

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"validate", "--spec", (dir / "broken.json").string()}).code == kExitUsage);
}

TEST_CASE("bisim on the flip machine") {
  auto r = run({"bisim", "--spec", machine("flip.json"), "--input", "010", "--budget", "50"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("verdict equivalent") != std::string::npos);
  // Without an output file the manifest goes to stderr.
  CHECK(r.err.find("manifest {") != std::string::npos);

  auto j = run({"bisim", "--spec", machine("increment.json"), "--input", "111", "--lmax", "8",
                "--mode", "sigmoid", "--emit-json"});
  CHECK(j.code == kExitOk);
  CHECK(nlohmann::json::parse(j.out)["tm_steps"] == 8);

  auto overflow = run({"bisim", "--spec", machine("left_walker.json"), "--input", "a",
                       "--lmax", "4", "--budget", "10"});
  CHECK(overflow.code == kExitUsage);
  CHECK(overflow.err.find("TapeOverflow") != std::string::npos);
}

TEST_CASE("compile, run-nstm and the hash guard") {
  const auto dir = scratch("compile");
  const auto prog = (dir / "flip.prog.json").string();
  auto c = run({"compile", "--spec", machine("flip.json"), "--lmax", "10", "--out", prog});
  CHECK(c.code == kExitOk);
  CHECK(fs::exists(prog));
  CHECK(fs::exists(prog + ".manifest.json"));
  auto manifest = nlohmann::json::parse(slurp(prog + ".manifest.json"));
  CHECK(manifest["subcommand"] == "compile");
  CHECK(manifest["tool_version"] == kToolVersion);

  auto tm = run({"run-tm", "--spec", machine("flip.json"), "--input", "010"});
  auto net = run({"run-nstm", "--program", prog, "--input", "010"});
  CHECK(net.code == kExitOk);
  // Same trace lines up to the stop line.
  CHECK(tm.out.substr(0, tm.out.find("halt:")) == net.out.substr(0, net.out.find("stop:")));

  const auto tensors = (dir / "tensors.json").string();
  CHECK(run({"run-nstm", "--program", prog, "--input", "01", "--emit-tensors", tensors}).code ==
        kExitOk);
  CHECK(nlohmann::json::parse(slurp(tensors)).size() == 4);

  auto guard = run({"bisim", "--spec", machine("increment.json"), "--program", prog, "--input", "1"});
  CHECK(guard.code == kExitUsage);
  CHECK(guard.err.find("HashMismatch") != std::string::npos);
  auto forced = run({"bisim", "--spec", machine("increment.json"), "--program", prog, "--input",
                     "1", "--force"});
  CHECK(forced.code == kExitVerificationFailed);
}

TEST_CASE("fuzz and ff-check") {
  auto f = run({"--emit-json", "fuzz", "--seed", "3", "--trials", "10", "--lmax", "24",
                "--budget", "40"});
  CHECK(f.code == kExitOk);
  auto j = nlohmann::json::parse(f.out);
  CHECK(j["trials"] == 10);
  CHECK(j["diverged"] == 0);
  auto again = run({"--emit-json", "fuzz", "--seed", "3", "--trials", "10", "--lmax", "24",
                    "--budget", "40"});
  CHECK(again.out == f.out);

  auto ff = run({"ff-check", "--trials", "5", "--assoc-trials", "10"});
  CHECK(ff.code == kExitOk);
  CHECK(ff.out.find("feedforward agreement 5/5") != std::string::npos);
}

TEST_CASE("gen-dyck, train and eval") {
  const auto dir = scratch("dyck");
  auto g = run({"gen-dyck", "--k", "2", "--seed", "4", "--out-dir", (dir / "a").string(),
                "--sizes", "40,10,10,4,2"});
  CHECK(g.code == kExitOk);
  CHECK(read_dataset((dir / "a" / "train.tsv").string()).size() == 40);
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  run({"gen-dyck", "--k", "2", "--seed", "4", "--out-dir", (dir / "b").string(), "--sizes",
       "40,10,10,4,2"});
  for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "long500.tsv", "long1000.tsv",
                        "dataset.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(run({"gen-dyck", "--preset", "paper", "--sizes", "1,1,1,1,1", "--out-dir",
             (dir / "c").string()})
            .code == kExitUsage);

  const auto out = dir / "run";
  auto t = run({"train", "--data", (dir / "a").string(), "--out-dir", out.string(), "--epochs",
                "2", "--N", "3", "--seeds", "2"});
  CHECK(t.code == kExitOk);
  for (const char* seed : {"seed-1", "seed-2"}) {
    CHECK(fs::exists(out / seed / "checkpoint.json"));
    CHECK(slurp(out / seed / "metrics.csv").rfind("epoch,train_acc,val_acc,loss,lr\n", 0) == 0);
  }
  auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["runs"].size() == 2);
  CHECK(run({"train", "--out-dir", out.string()}).code == kExitUsage);

  auto e = run({"--emit-json", "eval", "--checkpoint", (out / "seed-1" / "checkpoint.json").string(),
                "--data", (dir / "a" / "test.tsv").string()});
  CHECK(e.code == kExitOk);
  auto ej = nlohmann::json::parse(e.out);
  CHECK(ej.begin().value()["count"] == 10);
}
