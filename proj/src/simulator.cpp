#include "nstm/simulator.hpp"

#include <array>
#include <sstream>

#include "nstm/errors.hpp"
#include "nstm/random.hpp"

namespace nstm {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kExact: return "exact";
    case Mode::kThreshold: return "threshold";
    case Mode::kSigmoid: return "sigmoid";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "exact") return Mode::kExact;
  if (name == "threshold") return Mode::kThreshold;
  if (name == "sigmoid") return Mode::kSigmoid;
  throw DataFormatError("unknown mode '" + name + "' (exact|threshold|sigmoid)");
}

std::string to_string(NstmStop s) {
  switch (s) {
    case NstmStop::kReachedFinal: return "reached-final";
    case NstmStop::kEnteredHalt: return "entered-q0";
    case NstmStop::kStepBudget: return "step-budget";
    case NstmStop::kIllegalState: return "illegal-state";
    case NstmStop::kTapeOverflow: return "tape-overflow";
  }
  return "?";
}

namespace {

const AxisPairing kSourceAxes = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};

void check_state_dims(const Shape& s, const ProgramDims& d) {
  if (s != d.state_shape()) throw DimMismatch("state tensor dims do not match program");
}

}  // namespace

template <class Scalar>
SparseTensor<Scalar> type1_preactivation(const SparseTensor<Scalar>& s,
                                         const SparseTensor<Scalar>& local,
                                         const SparseTensor<Scalar>& global) {
  if (s.rank() != 4 || local.rank() != 6 || global.rank() != 6)
    throw DimMismatch("type-1 product expects rank-4 state and rank-6 factors");
  const auto L = contract(s, local, kSourceAxes);   // (i', j')
  const auto G = contract(s, global, kSourceAxes);  // (k', l')
  const Shape& sd = s.dims();
  const Layout out(sd);
  const std::size_t lmax = sd[3];
  std::vector<typename SparseTensor<Scalar>::Entry> e;
  e.reserve(L.nnz() * G.nnz());
  for (const auto& [lk, lv] : L.entries()) {
    const std::size_t i = lk / sd[1], j = lk % sd[1];
    for (const auto& [gk, gv] : G.entries()) {
      const std::size_t k = gk / lmax, l = gk % lmax;
      const std::array<std::size_t, 4> idx{i, j, i == l ? k : kHaltState, l};
      e.emplace_back(out.pack(idx), lv * gv);
    }
  }
  return SparseTensor<Scalar>::from_entries(sd, std::move(e));
}

template ExactTensor type1_preactivation(const ExactTensor&, const ExactTensor&,
                                         const ExactTensor&);
template RealTensor type1_preactivation(const RealTensor&, const RealTensor&,
                                        const RealTensor&);

StateTensor type1_product(const StateTensor& s, const NstmProgram& prog,
                          const ActivationKind& kind) {
  check_state_dims(s.dims(), prog.dims);
  return apply_activation(
      type1_preactivation(s, prog.action_local, prog.action_global), kind);
}

RealTensor type1_product(const RealTensor& s, const NstmProgram& prog,
                         const ActivationKind& kind) {
  check_state_dims(s.dims(), prog.dims);
  return apply_activation(type1_preactivation(s, to_real(prog.action_local),
                                              to_real(prog.action_global)),
                          kind);
}

StateTensor full_contraction_step(const StateTensor& s, const NstmProgram& prog,
                                  const ActivationKind& kind) {
  check_state_dims(s.dims(), prog.dims);
  return apply_activation(contract(s, prog.action_full, kSourceAxes), kind);
}

namespace {

// One of the three stepping regimes, behind a common face.
class Stepper {
 public:
  Stepper(const NstmProgram& prog, const RunOptions& opts)
      : prog_(prog), opts_(opts), rng_(opts.seed) {
    if (opts.mode != Mode::kExact) {
      local_ = to_real(prog.action_local);
      global_ = to_real(prog.action_global);
    }
    if (opts.mode == Mode::kSigmoid) {
      const double H = opts.H > 0 ? opts.H : min_scale_for(opts.noise, opts.eps);
      denoise_ = ActivationKind::denoiser(H);
    }
  }

  void load(const StateTensor& s) {
    exact_ = s;
    if (opts_.mode != Mode::kExact) real_ = to_real(s);
  }

  void step() {
    switch (opts_.mode) {
      case Mode::kExact:
        exact_ = apply_activation(
            type1_preactivation(exact_, prog_.action_local, prog_.action_global),
            ActivationKind::saturated_linear());
        break;
      case Mode::kThreshold:
        real_ = apply_activation(type1_preactivation(real_, local_, global_),
                                 ActivationKind::threshold(0.5));
        break;
      case Mode::kSigmoid: {
        auto raw = type1_preactivation(real_, local_, global_);
        // Every entry of the frame is perturbed, zeros included.
        const std::uint64_t volume = raw.layout().volume();
        std::vector<RealTensor::Entry> noisy;
        noisy.reserve(volume);
        auto it = raw.entries().begin();
        for (Key k = 0; k < volume; ++k) {
          double v = 0;
          if (it != raw.entries().end() && it->first == k) v = (it++)->second;
          noisy.emplace_back(k, v + rng_.uniform(-opts_.noise, opts_.noise));
        }
        real_ = apply_activation(RealTensor::from_entries(raw.dims(), std::move(noisy)),
                                 denoise_);
        break;
      }
    }
  }

  Configuration decode() const {
    switch (opts_.mode) {
      case Mode::kExact: return decode_state(exact_);
      case Mode::kThreshold: return decode_state(real_);
      case Mode::kSigmoid:
        return decode_state(apply_activation(real_, ActivationKind::threshold(0.5)));
    }
    return {};
  }

  nlohmann::json dump() const {
    return opts_.mode == Mode::kExact ? tensor_to_json(exact_) : tensor_to_json(real_);
  }

 private:
  const NstmProgram& prog_;
  RunOptions opts_;
  Rng rng_;
  RealTensor local_, global_;
  ActivationKind denoise_;
  StateTensor exact_;
  RealTensor real_;
};

// True when the head sits on a frame edge and the program has no transition
// for it there, i.e. the machine is about to step off the frame.
bool leaves_frame(const NstmProgram& prog, const Configuration& frame_cfg) {
  const std::size_t h = frame_cfg.head - 1;
  if (h != 0 && h + 1 != prog.dims.lmax) return false;
  const std::array<std::size_t, 4> src{h, frame_cfg.tape[h], frame_cfg.state, h};
  const Layout block(prog.dims.state_shape());
  const Key lo = block.pack(src) * block.volume();
  auto [first, last] = prog.action_full.key_range(lo, lo + block.volume());
  return first == last;
}

}  // namespace

NstmTrace nstm_run(const NstmProgram& prog, const std::vector<SymbolId>& input,
                   std::uint64_t budget, const RunOptions& opts) {
  const std::size_t lmax = prog.dims.lmax;
  NstmTrace trace;
  trace.program_hash = program_hash(prog);
  trace.mode = to_string(opts.mode);

  Configuration start;
  start.tape = input.empty() ? std::vector<SymbolId>{kBlank} : input;
  start.state = prog.start;
  start.head = 1;
  if (opts.origin + start.tape.size() > lmax)
    throw TapeOverflow("input of " + std::to_string(start.tape.size()) +
                       " cells at origin " + std::to_string(opts.origin) +
                       " does not fit L_max " + std::to_string(lmax));

  Stepper stepper(prog, opts);
  stepper.load(encode_framed(prog.dims, start, opts.origin));

  // Extent of cells the run has used, as 0-based frame indices.
  std::size_t lo = opts.origin, hi = opts.origin + start.tape.size() - 1;
  auto crop = [&](const Configuration& f, std::uint64_t t) {
    Configuration c;
    c.tape.assign(f.tape.begin() + static_cast<std::ptrdiff_t>(lo),
                  f.tape.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    c.state = f.state;
    c.head = f.head - lo;
    c.step = t;
    c.left_growth = static_cast<std::int64_t>(opts.origin) -
                    static_cast<std::int64_t>(lo);
    return c;
  };
  auto halted = [&](const Configuration& c) {
    if (c.state == kHaltState) {
      trace.stop = NstmStop::kEnteredHalt;
      return true;
    }
    if (prog.is_final(c.state)) {
      trace.stop = NstmStop::kReachedFinal;
      return true;
    }
    return false;
  };

  Configuration frame = stepper.decode();
  trace.configs.push_back(crop(frame, 0));
  if (opts.keep_tensors) trace.tensors.push_back(stepper.dump());
  if (halted(frame)) return trace;

  for (std::uint64_t t = 1; t <= budget; ++t) {
    const bool edge = leaves_frame(prog, frame);
    stepper.step();
    if (opts.keep_tensors) trace.tensors.push_back(stepper.dump());
    try {
      frame = stepper.decode();
    } catch (const IllegalState& e) {
      if (edge) {
        const std::string msg = "head leaves the " + std::to_string(lmax) +
                                "-cell frame at step " + std::to_string(t);
        if (opts.throw_on_overflow) throw TapeOverflow(msg);
        trace.stop = NstmStop::kTapeOverflow;
        trace.error = msg;
        return trace;
      }
      trace.stop = NstmStop::kIllegalState;
      trace.error = "step " + std::to_string(t) + ": " + e.what();
      return trace;
    }
    if (frame.tape.size() != lmax) {
      trace.stop = NstmStop::kIllegalState;
      trace.error = "step " + std::to_string(t) + ": frame has " +
                    std::to_string(frame.tape.size()) + " of " +
                    std::to_string(lmax) + " cells";
      return trace;
    }
    lo = std::min(lo, frame.head - 1);
    hi = std::max(hi, frame.head - 1);
    for (std::size_t i = 0; i < frame.tape.size(); ++i) {
      if ((i < lo || i > hi) && frame.tape[i] != kBlank) {
        trace.stop = NstmStop::kIllegalState;
        trace.error = "step " + std::to_string(t) + ": cell " +
                      std::to_string(i + 1) + " outside the used extent is not blank";
        return trace;
      }
    }
    trace.configs.push_back(crop(frame, t));
    if (halted(frame)) return trace;
  }
  trace.stop = NstmStop::kStepBudget;
  return trace;
}

namespace {

std::string format_with(const std::vector<std::string>& states,
                        const std::vector<std::string>& symbols,
                        const Configuration& c) {
  const bool single = std::all_of(symbols.begin(), symbols.end(),
                                  [](const std::string& s) { return s.size() == 1; });
  std::ostringstream os;
  os << "t=" << c.step << " state=" << states.at(c.state) << " head=" << c.head
     << " tape=";
  for (std::size_t i = 0; i < c.tape.size(); ++i) {
    if (!single && i > 0) os << ',';
    os << symbols.at(c.tape[i]);
  }
  return os.str();
}

}  // namespace

std::string format_step(const NstmProgram& prog, const Configuration& c) {
  return format_with(prog.state_names, prog.symbol_names, c);
}

std::string format_step(const TmSpec& spec, const Configuration& c) {
  return format_with(spec.states, spec.symbols, c);
}

}  // namespace nstm
