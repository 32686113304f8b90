#include "nstm/bisim.hpp"

#include <algorithm>
#include <array>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"
#include "nstm/random.hpp"

namespace nstm {

std::string to_string(Verdict v) {
  return v == Verdict::kEquivalent ? "equivalent" : "diverged";
}

namespace {

nlohmann::json config_json(const TmSpec& spec, const Configuration& c) {
  return {{"step", c.step},
          {"state", spec.states.at(c.state)},
          {"head", c.head},
          {"tape", render_tape(spec, c.tape)},
          {"left_growth", c.left_growth}};
}

StepOptions tm_options(const NstmProgram& prog) {
  StepOptions o;
  o.tape_cap = prog.dims.lmax;
  return o;
}

}  // namespace

nlohmann::json BisimReport::to_json(const TmSpec& spec) const {
  nlohmann::json j = {{"spec_hash", spec_hash},
                      {"program_hash", program_hash},
                      {"input", render_tape(spec, input)},
                      {"mode", mode},
                      {"steps_compared", steps_compared},
                      {"tm_steps", tm_steps},
                      {"nstm_steps", nstm_steps},
                      {"verdict", to_string(verdict)}};
  if (divergence) {
    nlohmann::json d = {{"step", divergence->step}, {"reason", divergence->reason}};
    d["tm"] = divergence->tm ? config_json(spec, *divergence->tm) : nlohmann::json();
    d["nstm"] = divergence->nstm ? config_json(spec, *divergence->nstm) : nlohmann::json();
    j["first_divergence"] = d;
  }
  return j;
}

BisimReport bisimulate(const TmSpec& spec, const NstmProgram& prog,
                       const std::vector<SymbolId>& input, std::uint64_t budget,
                       const BisimOptions& opts) {
  BisimReport report;
  report.spec_hash = spec_hash(spec);
  if (!opts.force && report.spec_hash != prog.spec_hash)
    throw HashMismatch("program was compiled from spec " + prog.spec_hash.substr(0, 12) +
                       ", not " + report.spec_hash.substr(0, 12));
  report.input = input;
  report.mode = to_string(opts.run.mode);

  const TmTrace ref = tm_run(spec, input, budget, tm_options(prog));
  // Leave room on the left for every cell the interpreter will prepend.
  RunOptions run = opts.run;
  run.origin = static_cast<std::size_t>(ref.configs.back().left_growth);
  // The frame is sized so the interpreter's run fits; a network that leaves
  // it has already gone wrong, so overflow is a stop like any other here.
  run.throw_on_overflow = false;
  const NstmTrace net = nstm_run(prog, input, budget, run);
  report.program_hash = net.program_hash;
  report.tm_steps = ref.steps();
  report.nstm_steps = net.steps();

  const std::size_t common = std::min(ref.configs.size(), net.configs.size());
  for (std::size_t t = 0; t < common; ++t) {
    if (ref.configs[t] != net.configs[t]) {
      report.verdict = Verdict::kDiverged;
      report.divergence = Divergence{t, ref.configs[t], net.configs[t],
                                     "decoded configuration differs"};
      return report;
    }
    report.steps_compared = t;
  }
  if (ref.configs.size() != net.configs.size()) {
    report.verdict = Verdict::kDiverged;
    Divergence d;
    d.step = common;
    if (common < ref.configs.size()) d.tm = ref.configs[common];
    if (common < net.configs.size()) d.nstm = net.configs[common];
    d.reason = !net.error.empty()
                   ? net.error
                   : "network stopped (" + to_string(net.stop) +
                         ") while the interpreter did not, or vice versa";
    report.divergence = d;
  }
  return report;
}

FuzzCase fuzz_case(const FuzzOptions& opts, std::uint64_t index) {
  Rng rng(mix_seed(opts.seed ^ mix_seed(index)));
  FuzzCase c;
  c.spec = random_tm(rng.next(), opts.max_states, opts.max_symbols, opts.machines);
  const auto len = rng.between(0, static_cast<std::int64_t>(opts.max_input_len));
  const auto& sigma = c.spec.input_alphabet;
  for (std::int64_t n = 0; n < len && !sigma.empty(); ++n)
    c.input.push_back(sigma[rng.below(sigma.size())]);
  c.noise_seed = rng.next();
  return c;
}

nlohmann::json FuzzSummary::to_json() const {
  return {{"trials", trials},
          {"equivalent", equivalent},
          {"diverged", diverged},
          {"aborted", aborted},
          {"realtime_mismatches", realtime_mismatches},
          {"first_failures", first_failures}};
}

FuzzSummary fuzz_bisim(const FuzzOptions& opts) {
  if (opts.max_states < 1 || opts.max_symbols < 1 || opts.lmax < 1)
    throw DomainError("fuzz bounds must be at least 1");
  FuzzSummary s;
  for (std::uint64_t idx = 0; idx < opts.trials; ++idx) {
    const FuzzCase fc = fuzz_case(opts, idx);
    ++s.trials;
    auto note = [&](const std::string& kind, nlohmann::json detail) {
      if (s.first_failures.size() >= opts.keep_failures) return;
      detail["trial"] = idx;
      detail["kind"] = kind;
      detail["spec"] = spec_to_json(fc.spec);
      detail["input"] = render_tape(fc.spec, fc.input);
      s.first_failures.push_back(std::move(detail));
    };
    try {
      const NstmProgram prog = compile_tm(fc.spec, opts.lmax);
      BisimOptions bo;
      bo.run.mode = opts.mode;
      bo.run.seed = fc.noise_seed;
      const BisimReport r = bisimulate(fc.spec, prog, fc.input, opts.budget, bo);
      if (r.tm_steps != r.nstm_steps) ++s.realtime_mismatches;
      if (r.verdict == Verdict::kEquivalent) {
        ++s.equivalent;
      } else {
        ++s.diverged;
        note("diverged", r.to_json(fc.spec));
      }
    } catch (const TapeOverflow& e) {
      ++s.aborted;
      note("aborted", {{"reason", e.what()}});
    }
  }
  return s;
}

std::vector<Key> exercised_entries(const TmSpec& spec, const NstmProgram& prog,
                                   const std::vector<SymbolId>& input,
                                   std::uint64_t budget) {
  const TmTrace ref = tm_run(spec, input, budget, tm_options(prog));
  const auto origin = ref.configs.back().left_growth;
  const std::size_t lmax = prog.dims.lmax;
  const Layout& full = prog.action_full.layout();
  std::vector<Key> keys;
  // Every configuration but the last is fed through one step.
  for (std::size_t t = 0; t + 1 < ref.configs.size(); ++t) {
    const Configuration& c = ref.configs[t];
    const auto shift = static_cast<std::size_t>(origin - c.left_growth);
    const std::size_t h = shift + c.head - 1;
    for (std::size_t i = 0; i < lmax; ++i) {
      const SymbolId j =
          i >= shift && i < shift + c.tape.size() ? c.tape[i - shift] : kBlank;
      std::array<std::size_t, 8> x{};
      if (i == h) {
        const Rule r = spec.delta(j, c.state);
        x = {h, j, c.state, h, h, r.write, r.next,
             static_cast<std::size_t>(static_cast<std::int64_t>(h) + r.move)};
      } else {
        x = {i, j, kHaltState, h, i, j, kHaltState, h};
      }
      keys.push_back(full.pack(x));
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

NstmProgram knock_out(const NstmProgram& prog, Key entry) {
  NstmProgram out = prog;
  out.action_full.set_key(entry, Rational(0));
  out.refactor();
  return out;
}

}  // namespace nstm
