#pragma once

// Runs the reference interpreter and the compiled network side by side and
// reports the first step where their configurations disagree.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nstm/simulator.hpp"

namespace nstm {

enum class Verdict { kEquivalent, kDiverged };
std::string to_string(Verdict v);

struct Divergence {
  std::uint64_t step = 0;
  std::optional<Configuration> tm;
  std::optional<Configuration> nstm;  // absent when decoding failed
  std::string reason;
};

struct BisimReport {
  std::string spec_hash;
  std::string program_hash;
  std::vector<SymbolId> input;
  std::string mode;
  std::uint64_t steps_compared = 0;
  std::uint64_t tm_steps = 0;
  std::uint64_t nstm_steps = 0;
  Verdict verdict = Verdict::kEquivalent;
  std::optional<Divergence> divergence;

  nlohmann::json to_json(const TmSpec& spec) const;
};

struct BisimOptions {
  RunOptions run;
  bool force = false;  // skip the spec-hash guard
};

// Throws HashMismatch when prog was not compiled from spec (unless forced)
// and TapeOverflow when the interpreter outgrows L_max.
BisimReport bisimulate(const TmSpec& spec, const NstmProgram& prog,
                       const std::vector<SymbolId>& input, std::uint64_t budget,
                       const BisimOptions& opts = {});

struct FuzzOptions {
  std::uint64_t seed = 7;
  std::uint64_t trials = 200;
  std::size_t max_states = 5;
  std::size_t max_symbols = 4;
  std::size_t max_input_len = 16;
  std::uint64_t budget = 200;
  std::size_t lmax = 64;
  Mode mode = Mode::kExact;
  RandomTmOptions machines;
  std::size_t keep_failures = 5;
};

struct FuzzSummary {
  std::uint64_t trials = 0;
  std::uint64_t equivalent = 0;
  std::uint64_t diverged = 0;
  std::uint64_t aborted = 0;
  // Trials whose network and interpreter traces differ in length.
  std::uint64_t realtime_mismatches = 0;
  nlohmann::json first_failures = nlohmann::json::array();

  nlohmann::json to_json() const;
};

// One fuzz trial's machine and input, derived from (seed, index) alone.
struct FuzzCase {
  TmSpec spec;
  std::vector<SymbolId> input;
  std::uint64_t noise_seed = 0;
};
FuzzCase fuzz_case(const FuzzOptions& opts, std::uint64_t index);

FuzzSummary fuzz_bisim(const FuzzOptions& opts);

// Keys of action_full entries the network reads while running `input`,
// derived from the interpreter's trace in the same frame bisimulate uses.
std::vector<Key> exercised_entries(const TmSpec& spec, const NstmProgram& prog,
                                   const std::vector<SymbolId>& input,
                                   std::uint64_t budget);

// Copy of prog with one action_full entry set to 0 and the factors rebuilt.
// The spec hash is kept, so the copy still passes the hash guard.
NstmProgram knock_out(const NstmProgram& prog, Key entry);

}  // namespace nstm
