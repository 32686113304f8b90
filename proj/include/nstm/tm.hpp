#pragma once

// Reference Turing-machine model: data, validation, interpreter and a
// seeded generator of random machines. Everything the neural side does is
// checked against this interpreter.

#include <cstddef>
#include <cstdint>
#include <map>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nstm {

using StateId = std::uint32_t;
using SymbolId = std::uint32_t;

// Index 0 of every state enumeration is the absorbing halting state q0.
inline constexpr StateId kHaltState = 0;
inline constexpr SymbolId kBlank = 0;
inline constexpr std::string_view kHaltName = "q0";

struct Rule {
  SymbolId write = kBlank;
  StateId next = kHaltState;
  int move = 0;  // -1, 0 or +1

  friend bool operator==(const Rule&, const Rule&) = default;
};

// M = <Q, Gamma, b, Sigma, delta, q_s, F> extended with q0.
struct TmSpec {
  std::vector<std::string> states;   // [0] is q0; user states follow
  std::vector<std::string> symbols;  // [0] is the blank
  std::vector<SymbolId> input_alphabet;
  StateId start = 1;
  std::vector<StateId> finals;  // sorted, unique
  // Explicit rules keyed by (symbol, state). q0 rules are implicit.
  std::map<std::pair<SymbolId, StateId>, Rule> rules;

  std::size_t num_states() const { return states.size(); }  // |Q*|
  std::size_t num_symbols() const { return symbols.size(); }
  bool is_final(StateId q) const;

  // Extended transition function over Gamma x Q*. q0 maps (s, q0) to
  // (s, q0, 0); a final state without an explicit rule is absorbing in the
  // same way. Throws SpecError if the table has a hole elsewhere.
  Rule delta(SymbolId s, StateId q) const;

  std::optional<StateId> find_state(std::string_view name) const;
  std::optional<SymbolId> find_symbol(std::string_view name) const;
};

struct Configuration {
  std::vector<SymbolId> tape;  // cell c lives at tape[c - 1]
  StateId state = 1;
  std::size_t head = 1;  // 1-based
  std::uint64_t step = 0;
  // Cells prepended on the left since the start of the run. Cell indices
  // stay 1-based, so this is what keeps configurations of one run aligned.
  std::int64_t left_growth = 0;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// Equality of the TM instant itself: tape, controller state and head.
bool same_instant(const Configuration& a, const Configuration& b);

enum class HaltReason { kReachedFinal, kEnteredHalt, kStepBudget };
std::string to_string(HaltReason r);

struct TmTrace {
  std::string spec_hash;
  std::vector<Configuration> configs;
  HaltReason halt = HaltReason::kStepBudget;

  std::size_t steps() const { return configs.empty() ? 0 : configs.size() - 1; }
};

struct StepOptions {
  std::size_t tape_cap = 256;  // L_max
  bool grow_left = true;
};

// Violated invariants, one human-readable line each. Empty iff well-formed.
using ValidationReport = std::vector<std::string>;
ValidationReport validate_spec(const TmSpec& spec);

Configuration initial_config(const TmSpec& spec,
                             const std::vector<SymbolId>& input);

Configuration tm_step(const TmSpec& spec, const Configuration& c,
                      const StepOptions& opts = {});

TmTrace tm_run(const TmSpec& spec, const std::vector<SymbolId>& input,
               std::uint64_t max_steps, const StepOptions& opts = {});

struct RandomTmOptions {
  // Probability that a generated rule targets q0.
  double halt_fraction = 0.25;
  // Probability that the last user state is made final.
  double final_probability = 0.5;
};

TmSpec random_tm(std::uint64_t seed, std::size_t max_states,
                 std::size_t max_symbols, const RandomTmOptions& opts = {});

// JSON spec files. Parsing throws SpecError on anything it cannot resolve
// (unknown names, duplicate rules, malformed fields); semantic invariants
// are left to validate_spec.
TmSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const TmSpec& spec);  // canonical
std::string canonical_bytes(const TmSpec& spec);
std::string spec_hash(const TmSpec& spec);
TmSpec load_spec(const std::string& path);

// Input strings: one character per symbol when every symbol name is a single
// character, otherwise whitespace- or comma-separated names.
std::vector<SymbolId> parse_input(const TmSpec& spec, std::string_view text);
std::string render_tape(const TmSpec& spec, const std::vector<SymbolId>& tape);

}  // namespace nstm
