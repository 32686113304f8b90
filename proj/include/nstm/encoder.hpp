#pragma once

// Rule compiler: configurations become rank-4 characteristic tensors over
// (cell i, symbol j, state k, head l) and transition tables become the binary
// rank-8 action tensor with its local/global factors.
//
// All tensor indices are 0-based; cell c and head position c of a
// Configuration live at index c - 1.

#include <cstddef>
#include <string>

#include "nstm/tensor.hpp"
#include "nstm/tm.hpp"

namespace nstm {

// Rank-4 state tensor, dims (L_max, |Gamma|, |Q*|, L_max). Encoded
// configurations carry k = 0 on every cell except the one under the head,
// and every entry repeats the head position in l.
using StateTensor = ExactTensor;

struct ProgramDims {
  std::size_t lmax = 0;
  std::size_t symbols = 0;  // |Gamma|
  std::size_t states = 0;   // |Q*|, q0 included

  Shape state_shape() const { return {lmax, symbols, states, lmax}; }
  Shape full_shape() const {
    return {lmax, symbols, states, lmax, lmax, symbols, states, lmax};
  }
  Shape local_shape() const {
    return {lmax, symbols, states, lmax, lmax, symbols};
  }
  Shape global_shape() const {
    return {lmax, symbols, states, lmax, states, lmax};
  }
  friend bool operator==(const ProgramDims&, const ProgramDims&) = default;
};

struct NstmProgram {
  std::string spec_hash;
  ProgramDims dims;
  // Names carried along so traces can be rendered without the spec file.
  std::vector<std::string> state_names;
  std::vector<std::string> symbol_names;
  std::vector<StateId> finals;
  StateId start = 1;
  // Source axes (i, j, k, l), target axes (i', j', k', l').
  ExactTensor action_full;
  // a^l: source axes then (i', j'); the projection of action_full over (k', l').
  ExactTensor action_local;
  // a^g: source axes then (k', l'); the projection of action_full over
  // (i', j'), kept only for active sources (i = l).
  ExactTensor action_global;
  std::string activation = "saturated-linear";

  bool is_final(StateId q) const;

  // Rebuilds both factors from action_full. Used after editing the full
  // tensor, e.g. by mutation tests.
  void refactor();
};

StateTensor encode_config(const TmSpec& spec, const Configuration& c,
                          std::size_t lmax);

// Same as encode_config but the tape sits at cell offset `origin` inside an
// L_max-cell frame that is otherwise filled with blanks.
StateTensor encode_framed(const TmSpec& spec, const Configuration& c,
                          std::size_t lmax, std::size_t origin);
StateTensor encode_framed(const ProgramDims& dims, const Configuration& c,
                          std::size_t origin);

NstmProgram compile_tm(const TmSpec& spec, std::size_t lmax);

// Reads a configuration back. The carrier entry, the one holding the
// controller state, is the unique k != 0 entry; when the machine sits in q0
// no entry has k != 0 and the carrier is the entry whose cell index equals
// the head index stored on all other entries. Inactive entries must agree
// on that index. The returned step and left_growth are 0.
template <class Scalar>
Configuration decode_state(const SparseTensor<Scalar>& st);

// True when every source pattern has at most one target with value 1.
bool is_functional(const NstmProgram& prog);

// Counts by source family, for checks against the rule table.
struct ActionCensus {
  std::size_t inactive = 0;
  std::size_t active = 0;
};
ActionCensus census(const NstmProgram& prog);

nlohmann::json program_to_json(const NstmProgram& prog);
NstmProgram program_from_json(const nlohmann::json& j);
NstmProgram load_program(const std::string& path);
std::string program_hash(const NstmProgram& prog);

}  // namespace nstm
