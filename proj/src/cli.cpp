#include "nstm/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "nstm/bisim.hpp"
#include "nstm/dyck.hpp"
#include "nstm/errors.hpp"
#include "nstm/feedforward.hpp"
#include "nstm/trainer.hpp"

namespace nstm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto log = std::make_shared<spdlog::logger>("nstm", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("NSTM_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  return log;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw DataFormatError("cannot write " + path);
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataFormatError("cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataFormatError(path + ": " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json config_json(const TmSpec& spec, const Configuration& c) {
  return {{"step", c.step}, {"state", spec.states.at(c.state)}, {"head", c.head},
          {"tape", render_tape(spec, c.tape)}, {"left_growth", c.left_growth}};
}

// Enough of a spec to parse and render tapes of a loaded program.
TmSpec shell_spec(const NstmProgram& prog) {
  TmSpec s;
  s.states = prog.state_names;
  s.symbols = prog.symbol_names;
  return s;
}

struct Manifest {
  std::string subcommand;
  json config = json::object();
  json seeds = json::array();
  json inputs = json::array();
  json outputs = json::array();
  // Where the manifest goes when --manifest is absent; empty means stderr.
  std::string default_path;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool emit_json = false;
  std::shared_ptr<spdlog::logger> log;
  Manifest manifest;
};

// Options of every subcommand; CLI11 binds straight into these.
struct Args {
  std::string spec, program, input, out, out_dir, data_dir, checkpoint, emit_tensors;
  std::vector<std::string> data_files;
  std::string mode = "exact", preset, sizes;
  std::uint64_t budget = 200, seed = 1, seeds = 1, trials = 200, assoc_trials = 500;
  std::size_t lmax = 64, origin = 0, max_states = 5, max_symbols = 4, max_input_len = 16;
  std::size_t tape_cap = 256, epochs = 400, N = 8, halve_after = 10, stop_after = 30;
  double H = 0.0, noise = 0.25, lr = 1e-2, init_scale = 0.5, halt_fraction = 0.25;
  int k = 2;
  bool force = false, strict = false;
  // Subcommands whose defaults differ from the shared ones above.
  std::uint64_t fuzz_seed = 7;
  std::uint64_t ff_trials = 50;
  std::size_t ff_max_states = 4, ff_max_symbols = 3, ff_lmax = 6;
  double train_H = 1.0;
};

RunOptions run_options(const Args& a) {
  RunOptions o;
  o.mode = parse_mode(a.mode);
  o.H = a.H;
  o.noise = a.noise;
  o.seed = a.seed;
  o.origin = a.origin;
  return o;
}

int cmd_validate(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.spec);
  const TmSpec spec = load_spec(a.spec);
  const ValidationReport r = validate_spec(spec);
  if (cx.emit_json) {
    cx.out << json{{"spec_hash", spec_hash(spec)}, {"valid", r.empty()}, {"findings", r}}.dump(2)
           << '\n';
  } else if (r.empty()) {
    cx.out << "valid " << spec_hash(spec) << '\n';
  } else {
    for (const auto& f : r) cx.out << "invalid: " << f << '\n';
  }
  return r.empty() ? kExitOk : kExitVerificationFailed;
}

int cmd_run_tm(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.spec);
  cx.manifest.config = {{"input", a.input}, {"budget", a.budget}, {"tape_cap", a.tape_cap}};
  const TmSpec spec = load_spec(a.spec);
  StepOptions so;
  so.tape_cap = a.tape_cap;
  const TmTrace tr = tm_run(spec, parse_input(spec, a.input), a.budget, so);
  if (cx.emit_json) {
    json cs = json::array();
    for (const auto& c : tr.configs) cs.push_back(config_json(spec, c));
    cx.out << json{{"spec_hash", tr.spec_hash}, {"halt", to_string(tr.halt)},
                   {"steps", tr.steps()}, {"configs", cs}}.dump(2)
           << '\n';
  } else {
    for (const auto& c : tr.configs) cx.out << format_step(spec, c) << '\n';
    cx.out << "halt: " << to_string(tr.halt) << " after " << tr.steps() << " steps\n";
  }
  return kExitOk;
}

int cmd_compile(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.spec);
  cx.manifest.outputs.push_back(a.out);
  cx.manifest.config = {{"lmax", a.lmax}};
  cx.manifest.default_path = a.out + ".manifest.json";
  const TmSpec spec = load_spec(a.spec);
  const NstmProgram prog = compile_tm(spec, a.lmax);
  write_text(a.out, program_to_json(prog).dump() + "\n");
  const ActionCensus cen = census(prog);
  const std::string hash = program_hash(prog);
  if (cx.emit_json) {
    cx.out << json{{"program", a.out}, {"program_hash", hash}, {"spec_hash", prog.spec_hash},
                   {"lmax", a.lmax}, {"action_nnz", prog.action_full.nnz()},
                   {"inactive", cen.inactive}, {"active", cen.active}}.dump(2)
           << '\n';
  } else {
    cx.out << "wrote " << a.out << "\nprogram " << hash << "\naction entries "
           << prog.action_full.nnz() << " (" << cen.inactive << " inactive, " << cen.active
           << " active)\n";
  }
  return kExitOk;
}

int cmd_run_nstm(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.program);
  RunOptions o = run_options(a);
  o.keep_tensors = !a.emit_tensors.empty();
  cx.manifest.config = {{"input", a.input}, {"budget", a.budget}, {"mode", a.mode},
                        {"H", a.H}, {"noise", a.noise}, {"origin", a.origin}};
  cx.manifest.seeds.push_back(a.seed);
  if (o.keep_tensors) {
    cx.manifest.outputs.push_back(a.emit_tensors);
    cx.manifest.default_path = a.emit_tensors + ".manifest.json";
  }
  const NstmProgram prog = load_program(a.program);
  const TmSpec shell = shell_spec(prog);
  const NstmTrace tr = nstm_run(prog, parse_input(shell, a.input), a.budget, o);
  if (o.keep_tensors) write_text(a.emit_tensors, json(tr.tensors).dump() + "\n");
  if (cx.emit_json) {
    json cs = json::array();
    for (const auto& c : tr.configs) cs.push_back(config_json(shell, c));
    json j = {{"program_hash", tr.program_hash}, {"mode", tr.mode}, {"stop", to_string(tr.stop)},
              {"steps", tr.steps()}, {"configs", cs}};
    if (!tr.error.empty()) j["error"] = tr.error;
    cx.out << j.dump(2) << '\n';
  } else {
    for (const auto& c : tr.configs) cx.out << format_step(prog, c) << '\n';
    cx.out << "stop: " << to_string(tr.stop) << " after " << tr.steps() << " steps\n";
    if (!tr.error.empty()) cx.out << "error: " << tr.error << '\n';
  }
  return tr.stop == NstmStop::kIllegalState ? kExitVerificationFailed : kExitOk;
}

int cmd_bisim(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.spec);
  if (!a.program.empty()) cx.manifest.inputs.push_back(a.program);
  cx.manifest.config = {{"input", a.input}, {"budget", a.budget}, {"mode", a.mode},
                        {"lmax", a.lmax}, {"H", a.H}, {"noise", a.noise}, {"force", a.force}};
  cx.manifest.seeds.push_back(a.seed);
  const TmSpec spec = load_spec(a.spec);
  const NstmProgram prog = a.program.empty() ? compile_tm(spec, a.lmax) : load_program(a.program);
  BisimOptions bo;
  bo.run = run_options(a);
  bo.force = a.force;
  const BisimReport r = bisimulate(spec, prog, parse_input(spec, a.input), a.budget, bo);
  if (cx.emit_json) {
    cx.out << r.to_json(spec).dump(2) << '\n';
  } else {
    cx.out << "verdict " << to_string(r.verdict) << "\nsteps tm " << r.tm_steps << " nstm "
           << r.nstm_steps << "\n";
    if (r.divergence) {
      cx.out << "first divergence at step " << r.divergence->step << ": "
             << r.divergence->reason << '\n';
      if (r.divergence->tm) cx.out << "  tm   " << format_step(spec, *r.divergence->tm) << '\n';
      if (r.divergence->nstm)
        cx.out << "  nstm " << format_step(spec, *r.divergence->nstm) << '\n';
    }
  }
  return r.verdict == Verdict::kEquivalent ? kExitOk : kExitVerificationFailed;
}

int cmd_fuzz(Context& cx, const Args& a) {
  FuzzOptions o;
  o.seed = a.fuzz_seed;
  o.trials = a.trials;
  o.max_states = a.max_states;
  o.max_symbols = a.max_symbols;
  o.max_input_len = a.max_input_len;
  o.budget = a.budget;
  o.lmax = a.lmax;
  o.mode = parse_mode(a.mode);
  o.machines.halt_fraction = a.halt_fraction;
  cx.manifest.seeds.push_back(a.fuzz_seed);
  cx.manifest.config = {{"trials", a.trials}, {"max_states", a.max_states},
                        {"max_symbols", a.max_symbols}, {"max_input_len", a.max_input_len},
                        {"budget", a.budget}, {"lmax", a.lmax}, {"mode", a.mode},
                        {"halt_fraction", a.halt_fraction}, {"strict", a.strict}};
  const FuzzSummary s = fuzz_bisim(o);
  if (cx.emit_json) {
    cx.out << s.to_json().dump(2) << '\n';
  } else {
    cx.out << "trials " << s.trials << "\nequivalent " << s.equivalent << "\ndiverged "
           << s.diverged << "\naborted " << s.aborted << "\nrealtime_mismatches "
           << s.realtime_mismatches << '\n';
    for (const auto& f : s.first_failures)
      cx.out << "  trial " << f["trial"] << " " << f["kind"].get<std::string>() << '\n';
  }
  if (s.aborted) cx.log->warn("{} trials aborted: the interpreter outgrew L_max", s.aborted);
  const bool failed = s.diverged || s.realtime_mismatches || (a.strict && s.aborted);
  return failed ? kExitVerificationFailed : kExitOk;
}

int cmd_ff_check(Context& cx, const Args& a) {
  FfCheckOptions o;
  o.seed = a.seed;
  o.trials = a.ff_trials;
  o.max_states = a.ff_max_states;
  o.max_symbols = a.ff_max_symbols;
  o.lmax = a.ff_lmax;
  o.assoc_trials = a.assoc_trials;
  cx.manifest.seeds.push_back(a.seed);
  cx.manifest.config = {{"trials", a.ff_trials}, {"assoc_trials", a.assoc_trials},
                        {"max_states", a.ff_max_states}, {"max_symbols", a.ff_max_symbols},
                        {"lmax", a.ff_lmax}};
  const FfCheckSummary s = ff_check(o);
  if (cx.emit_json) {
    cx.out << s.to_json().dump(2) << '\n';
  } else {
    cx.out << "feedforward agreement " << s.agreed << "/" << s.trials
           << "\nassociativity trials " << s.assoc_trials << "\nworst deviation threshold "
           << s.worst_threshold << "\nworst deviation sigmoid " << s.worst_sigmoid << '\n'
           << (s.passed() ? "passed" : "FAILED") << '\n';
  }
  return s.passed() ? kExitOk : kExitVerificationFailed;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DomainError("--sizes expects comma-separated counts, got '" + text + "'");
    }
  }
  return out;
}

DyckConfig dyck_config(const Args& a) {
  DyckConfig cfg = DyckConfig::standard(a.k, a.seed);
  if (!a.sizes.empty()) {
    const auto sizes = parse_sizes(a.sizes);
    if (sizes.size() != cfg.splits.size())
      throw DomainError("--sizes needs " + std::to_string(cfg.splits.size()) + " counts");
    for (std::size_t i = 0; i < sizes.size(); ++i) cfg.splits[i].size = sizes[i];
  }
  return cfg;
}

std::vector<std::string> generate_dyck(Context& cx, const DyckConfig& cfg, const std::string& dir) {
  cx.log->info("generating D_{} splits into {}", cfg.k, dir);
  const auto splits = build_splits(cfg);
  return write_splits(cfg, splits, dir);
}

int cmd_gen_dyck(Context& cx, const Args& a) {
  if (!a.preset.empty() && !a.sizes.empty())
    throw DomainError("--preset paper fixes the split sizes; drop --sizes");
  const DyckConfig cfg = dyck_config(a);
  cx.manifest.seeds.push_back(a.seed);
  cx.manifest.config = cfg.to_json();
  cx.manifest.config["preset"] = a.preset;
  cx.manifest.default_path = (fs::path(a.out_dir) / "manifest.json").string();
  const auto paths = generate_dyck(cx, cfg, a.out_dir);
  for (const auto& p : paths) cx.manifest.outputs.push_back(p);
  if (cx.emit_json) {
    cx.out << json{{"files", paths}}.dump(2) << '\n';
  } else {
    for (std::size_t i = 0; i < cfg.splits.size(); ++i)
      cx.out << cfg.splits[i].name << ' ' << cfg.splits[i].size << " samples -> " << paths[i]
             << '\n';
    cx.out << "metadata -> " << paths.back() << '\n';
  }
  return kExitOk;
}

std::optional<std::vector<Sample>> maybe_read(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  return read_dataset(p.string());
}

int cmd_train(Context& cx, const Args& a, const CLI::App& sub) {
  const bool paper = a.preset == "paper";
  TrainConfig base;
  base.k = a.k;
  base.N = a.N;
  base.epochs = a.epochs;
  base.lr = a.lr;
  base.halve_after = a.halve_after;
  base.stop_after = a.stop_after;
  base.init_scale = a.init_scale;
  base.H = a.train_H;
  std::uint64_t seeds = a.seeds;
  // The preset fills in whatever was not given explicitly.
  if (paper) {
    if (sub.count("--epochs") == 0) base.epochs = 400;
    if (sub.count("--lr") == 0) base.lr = 1e-2;
    if (sub.count("--N") == 0) base.N = 8;
    if (sub.count("--seeds") == 0) seeds = 3;
  }
  base.validate();
  if (seeds < 1) throw DomainError("--seeds must be at least 1");

  std::string data = a.data_dir;
  if (data.empty()) {
    if (!paper) throw DomainError("--data is required without --preset paper");
    data = (fs::path(a.out_dir) / "data").string();
    DyckConfig dc = DyckConfig::standard(a.k, a.seed);
    for (const auto& p : generate_dyck(cx, dc, data)) cx.manifest.outputs.push_back(p);
  }
  const fs::path dir(data);
  cx.manifest.inputs.push_back(data);
  cx.manifest.default_path = (fs::path(a.out_dir) / "manifest.json").string();
  cx.manifest.config = base.to_json();
  cx.manifest.config["preset"] = a.preset;
  cx.manifest.config["seeds"] = seeds;

  const auto train_set = read_dataset((dir / "train.tsv").string());
  const auto val_set = read_dataset((dir / "val.tsv").string());
  std::vector<std::pair<std::string, std::vector<Sample>>> held_out;
  for (const char* name : {"test", "long500", "long1000"})
    if (auto d = maybe_read(dir / (std::string(name) + ".tsv"))) held_out.emplace_back(name, *d);

  json runs = json::array();
  std::size_t best = 0;
  for (std::uint64_t n = 0; n < seeds; ++n) {
    TrainConfig cfg = base;
    cfg.seed = a.seed + n;
    cx.manifest.seeds.push_back(cfg.seed);
    const std::size_t X = 2 * static_cast<std::size_t>(cfg.k) + 1;
    const TrainableNstm init =
        TrainableNstm::random(cfg.N, 1, X, cfg.seed, cfg.init_scale, cfg.H);
    const auto started = std::chrono::steady_clock::now();
    const TrainResult res = train(cfg, init, train_set, val_set, [&](const EpochMetrics& e) {
      cx.log->info("seed {} epoch {} train_acc {:.4f} val_acc {:.4f} loss {:.5f} lr {:g}",
                   cfg.seed, e.epoch, e.train_acc, e.val_acc, e.loss, e.lr);
    });
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const fs::path sd = fs::path(a.out_dir) / ("seed-" + std::to_string(cfg.seed));
    write_text((sd / "checkpoint.json").string(), checkpoint_json(res.best, cfg).dump(2) + "\n");
    write_text((sd / "metrics.csv").string(), metrics_csv(res.history));
    json ev = json::object();
    for (const auto& [name, set] : held_out) ev[name] = evaluate(res.best, set, cfg.k).to_json();
    write_text((sd / "eval.json").string(), ev.dump(2) + "\n");
    for (const char* f : {"checkpoint.json", "metrics.csv", "eval.json"})
      cx.manifest.outputs.push_back((sd / f).string());
    json run = {{"seed", cfg.seed}, {"best_val", res.best_val}, {"best_epoch", res.best_epoch},
                {"epochs_run", res.history.size()}, {"stopped_early", res.stopped_early},
                {"seconds", secs}};
    for (const auto& [name, set] : held_out) run[name] = ev[name]["accuracy"];
    runs.push_back(run);
    if (res.best_val > runs[best]["best_val"].get<double>()) best = runs.size() - 1;
  }
  const json summary = {{"best_seed", runs[best]["seed"]}, {"runs", runs}};
  write_text((fs::path(a.out_dir) / "summary.json").string(), summary.dump(2) + "\n");
  cx.manifest.outputs.push_back((fs::path(a.out_dir) / "summary.json").string());
  if (cx.emit_json) {
    cx.out << summary.dump(2) << '\n';
  } else {
    for (const auto& r : runs) {
      cx.out << "seed " << r["seed"] << " best_val " << r["best_val"].get<double>()
             << " epoch " << r["best_epoch"];
      for (const auto& [name, set] : held_out) cx.out << ' ' << name << ' ' << r[name].get<double>();
      cx.out << '\n';
    }
    cx.out << "best seed " << runs[best]["seed"] << '\n';
  }
  return kExitOk;
}

int cmd_eval(Context& cx, const Args& a) {
  cx.manifest.inputs.push_back(a.checkpoint);
  TrainConfig cfg;
  const TrainableNstm m = load_checkpoint(read_json(a.checkpoint), &cfg);
  json all = json::object();
  for (const auto& path : a.data_files) {
    cx.manifest.inputs.push_back(path);
    const Evaluation ev = evaluate(m, read_dataset(path), cfg.k);
    all[path] = ev.to_json();
    if (!cx.emit_json) {
      cx.out << path << ": accuracy " << ev.accuracy << " (" << ev.correct << "/" << ev.count
             << ")\n";
      for (const auto& b : ev.by_length)
        if (b.count)
          cx.out << "  length " << b.lo << "-" << b.hi << ": "
                 << static_cast<double>(b.correct) / static_cast<double>(b.count) << " of "
                 << b.count << '\n';
    }
  }
  if (cx.emit_json) cx.out << all.dump(2) << '\n';
  return kExitOk;
}

void emit_manifest(Context& cx, const std::string& override_path, const std::vector<std::string>& argv,
                   const std::string& started, double seconds) {
  json m = {{"subcommand", cx.manifest.subcommand}, {"argv", argv},
            {"config", cx.manifest.config}, {"seeds", cx.manifest.seeds},
            {"inputs", cx.manifest.inputs}, {"outputs", cx.manifest.outputs},
            {"tool_version", kToolVersion}, {"started_at", started}, {"wall_seconds", seconds}};
  const std::string path = !override_path.empty() ? override_path : cx.manifest.default_path;
  if (path.empty()) {
    cx.err << "manifest " << m.dump() << '\n';
  } else {
    write_text(path, m.dump(2) + "\n");
  }
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compile Turing machines into tensor recurrent networks, check them, and train "
               "recurrent models on Dyck languages."};
  app.name(args.empty() ? "nstm" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  bool emit_json = false;
  std::string manifest_path;
  app.add_flag("--emit-json", emit_json, "Print machine-readable JSON reports");
  app.add_option("--manifest", manifest_path, "Write the run manifest here");

  Args a;
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  auto spec_opt = [&](CLI::App* s) {
    s->add_option("--spec", a.spec, "TM spec JSON")->required()->check(CLI::ExistingFile);
  };
  auto mode_opts = [&](CLI::App* s) {
    s->add_option("--mode", a.mode, "exact, threshold or sigmoid")
        ->check(CLI::IsMember({"exact", "threshold", "sigmoid"}));
    s->add_option("--H", a.H, "Sigmoid scale; 0 picks the minimal scale for --noise");
    s->add_option("--noise", a.noise, "Sigmoid mode: per-step noise amplitude");
  };

  auto* validate = sub("validate", "Check a TM spec");
  spec_opt(validate);

  auto* run_tm = sub("run-tm", "Run the reference interpreter");
  spec_opt(run_tm);
  run_tm->add_option("--input", a.input, "Input string");
  run_tm->add_option("--budget", a.budget, "Step budget");
  run_tm->add_option("--tape-cap", a.tape_cap, "Largest tape allowed (L_max)");

  auto* compile = sub("compile", "Compile a TM spec into a network program");
  spec_opt(compile);
  compile->add_option("--lmax", a.lmax, "Tape frame length L_max");
  compile->add_option("--out", a.out, "Program JSON to write")->required();

  auto* run_nstm = sub("run-nstm", "Run a compiled program");
  run_nstm->add_option("--program", a.program, "Program JSON")->required()->check(CLI::ExistingFile);
  run_nstm->add_option("--input", a.input, "Input string");
  run_nstm->add_option("--budget", a.budget, "Step budget");
  run_nstm->add_option("--origin", a.origin, "Cell offset of the input inside the frame");
  run_nstm->add_option("--seed", a.seed, "Noise seed");
  run_nstm->add_option("--emit-tensors", a.emit_tensors, "Write every state tensor to this JSON file");
  mode_opts(run_nstm);

  auto* bisim = sub("bisim", "Compare interpreter and network step by step");
  spec_opt(bisim);
  bisim->add_option("--program", a.program, "Program JSON (compiled from --spec if absent)")
      ->check(CLI::ExistingFile);
  bisim->add_option("--input", a.input, "Input string");
  bisim->add_option("--budget", a.budget, "Step budget");
  bisim->add_option("--lmax", a.lmax, "Frame length when compiling");
  bisim->add_option("--seed", a.seed, "Noise seed");
  bisim->add_flag("--force", a.force, "Skip the spec-hash guard");
  mode_opts(bisim);

  auto* fuzz = sub("fuzz", "Bisimulate random machines");
  fuzz->add_option("--seed", a.fuzz_seed, "Seed");
  fuzz->add_option("--trials", a.trials, "Number of machines");
  fuzz->add_option("--max-states", a.max_states, "Largest user state count");
  fuzz->add_option("--max-symbols", a.max_symbols, "Largest tape alphabet");
  fuzz->add_option("--max-input-len", a.max_input_len, "Longest input");
  fuzz->add_option("--budget", a.budget, "Step budget per trial");
  fuzz->add_option("--lmax", a.lmax, "Tape frame length L_max");
  fuzz->add_option("--halt-fraction", a.halt_fraction, "Chance a generated rule enters q0");
  fuzz->add_flag("--strict", a.strict, "Count aborted trials as failures");
  mode_opts(fuzz);

  auto* ff = sub("ff-check", "Feedforward equivalence and associativity checks");
  ff->add_option("--seed", a.seed, "Seed");
  ff->add_option("--trials", a.ff_trials, "Random (spec, configuration) pairs");
  ff->add_option("--assoc-trials", a.assoc_trials, "Random (s, a, z) triples");
  ff->add_option("--max-states", a.ff_max_states, "Largest user state count");
  ff->add_option("--max-symbols", a.ff_max_symbols, "Largest tape alphabet");
  ff->add_option("--lmax", a.ff_lmax, "Tape frame length");

  auto* gen = sub("gen-dyck", "Write Dyck train/val/test/long splits");
  gen->add_option("--k", a.k, "Bracket pair types (1-4)");
  gen->add_option("--seed", a.seed, "Seed");
  gen->add_option("--out-dir", a.out_dir, "Output directory")->required();
  gen->add_option("--preset", a.preset, "Named configuration")->check(CLI::IsMember({"paper"}));
  gen->add_option("--sizes", a.sizes, "Split sizes train,val,test,long500,long1000");

  auto* tr = sub("train", "Train the recurrent model with RTRL");
  tr->add_option("--data", a.data_dir, "Directory with train.tsv and val.tsv");
  tr->add_option("--out-dir", a.out_dir, "Output directory")->required();
  tr->add_option("--k", a.k, "Bracket pair types");
  tr->add_option("--seed", a.seed, "First seed");
  tr->add_option("--seeds", a.seeds, "Number of consecutive seeds");
  tr->add_option("--epochs", a.epochs, "Epoch limit");
  tr->add_option("--lr", a.lr, "Learning rate");
  tr->add_option("--N", a.N, "State neurons");
  tr->add_option("--halve-after", a.halve_after, "Epochs without improvement before halving lr");
  tr->add_option("--stop-after", a.stop_after, "Epochs without improvement before stopping");
  tr->add_option("--init-scale", a.init_scale, "Initial parameters uniform in [-s, s]");
  tr->add_option("--H", a.train_H, "Logistic scale of every neuron");
  tr->add_option("--preset", a.preset, "Named configuration")->check(CLI::IsMember({"paper"}));

  auto* ev = sub("eval", "Evaluate a checkpoint on dataset files");
  ev->add_option("--checkpoint", a.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", a.data_files, "Dataset files")->required()->check(CLI::ExistingFile);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context cx{out, err, emit_json, make_logger(err), {}};
  CLI::App* chosen = app.get_subcommands().front();
  cx.manifest.subcommand = chosen->get_name();
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitUsage;
  try {
    const std::string& n = cx.manifest.subcommand;
    if (n == "validate") code = cmd_validate(cx, a);
    else if (n == "run-tm") code = cmd_run_tm(cx, a);
    else if (n == "compile") code = cmd_compile(cx, a);
    else if (n == "run-nstm") code = cmd_run_nstm(cx, a);
    else if (n == "bisim") code = cmd_bisim(cx, a);
    else if (n == "fuzz") code = cmd_fuzz(cx, a);
    else if (n == "ff-check") code = cmd_ff_check(cx, a);
    else if (n == "gen-dyck") code = cmd_gen_dyck(cx, a);
    else if (n == "train") code = cmd_train(cx, a, *chosen);
    else if (n == "eval") code = cmd_eval(cx, a);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    code = kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    code = kExitUsage;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    emit_manifest(cx, manifest_path, args, started, secs);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (code == kExitOk) code = kExitUsage;
  }
  return code;
}

int cli_dispatch(int argc, char** argv) {
  return cli_dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace nstm
