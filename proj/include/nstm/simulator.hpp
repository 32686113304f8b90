#pragma once

// Runs a compiled program one Type-1 product per TM step.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nstm/encoder.hpp"

namespace nstm {

enum class Mode { kExact, kThreshold, kSigmoid };
std::string to_string(Mode m);
Mode parse_mode(const std::string& name);

// Pre-activation of the Type-1 product. The local factor L[i', j'] and the
// global factor G[k', l'] are contracted from s separately; their outer
// product is written to (i', j', k', l') when i' = l' and to
// (i', j', 0, l') otherwise, since cells away from the new head carry the
// halting placeholder.
template <class Scalar>
SparseTensor<Scalar> type1_preactivation(const SparseTensor<Scalar>& s,
                                         const SparseTensor<Scalar>& local,
                                         const SparseTensor<Scalar>& global);

StateTensor type1_product(const StateTensor& s, const NstmProgram& prog,
                          const ActivationKind& kind);
RealTensor type1_product(const RealTensor& s, const NstmProgram& prog,
                         const ActivationKind& kind);

// sigma(sum over (i, j, k, l) of s * action_full). Inactive cells keep the
// old head index, so the result is only decodable one step out from an
// encoded configuration.
StateTensor full_contraction_step(const StateTensor& s, const NstmProgram& prog,
                                  const ActivationKind& kind);

enum class NstmStop {
  kReachedFinal,
  kEnteredHalt,
  kStepBudget,
  kIllegalState,
  kTapeOverflow,  // only when throw_on_overflow is off
};
std::string to_string(NstmStop s);

struct RunOptions {
  Mode mode = Mode::kExact;
  // Sigmoid mode: scale H (0 picks min_scale_for(noise, eps)) and the
  // amplitude of the uniform noise added to every entry before each step.
  double H = 0.0;
  double noise = 0.25;
  double eps = 1e-6;
  std::uint64_t seed = 0;
  // Cell offset of the input inside the L_max frame.
  std::size_t origin = 0;
  bool keep_tensors = false;
  bool throw_on_overflow = true;
};

struct NstmTrace {
  std::string program_hash;
  std::string mode;
  // Decoded configurations, cropped to the cells the run has used so they
  // line up with the reference interpreter.
  std::vector<Configuration> configs;
  NstmStop stop = NstmStop::kStepBudget;
  std::string error;  // diagnostic for kIllegalState and kTapeOverflow
  std::vector<nlohmann::json> tensors;  // only with keep_tensors

  std::size_t steps() const { return configs.empty() ? 0 : configs.size() - 1; }
};

// Throws TapeOverflow when the head would leave the L_max frame, unless
// opts.throw_on_overflow is off.
NstmTrace nstm_run(const NstmProgram& prog, const std::vector<SymbolId>& input,
                   std::uint64_t budget, const RunOptions& opts = {});

// `t=<n> state=<name> head=<l> tape=<symbols>`
std::string format_step(const NstmProgram& prog, const Configuration& c);
std::string format_step(const TmSpec& spec, const Configuration& c);

}  // namespace nstm
