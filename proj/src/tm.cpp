#include "nstm/tm.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"
#include "nstm/random.hpp"

namespace nstm {

bool TmSpec::is_final(StateId q) const {
  return std::binary_search(finals.begin(), finals.end(), q);
}

Rule TmSpec::delta(SymbolId s, StateId q) const {
  if (q == kHaltState) return Rule{s, kHaltState, 0};
  auto it = rules.find({s, q});
  if (it != rules.end()) return it->second;
  if (is_final(q)) return Rule{s, q, 0};
  throw SpecError("no rule for (" + symbols.at(s) + ", " + states.at(q) + ")");
}

std::optional<StateId> TmSpec::find_state(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == name) return static_cast<StateId>(i);
  return std::nullopt;
}

std::optional<SymbolId> TmSpec::find_symbol(std::string_view name) const {
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (symbols[i] == name) return static_cast<SymbolId>(i);
  return std::nullopt;
}

bool same_instant(const Configuration& a, const Configuration& b) {
  return a.tape == b.tape && a.state == b.state && a.head == b.head;
}

std::string to_string(HaltReason r) {
  switch (r) {
    case HaltReason::kReachedFinal:
      return "reached-final";
    case HaltReason::kEnteredHalt:
      return "entered-q0";
    case HaltReason::kStepBudget:
      return "step-budget";
  }
  return "unknown";
}

ValidationReport validate_spec(const TmSpec& spec) {
  ValidationReport report;
  const auto n_states = spec.num_states();
  const auto n_symbols = spec.num_symbols();
  if (n_states == 0 || spec.states[0] != kHaltName)
    report.push_back("state index 0 must be the halting state q0");
  if (n_states < 2) report.push_back("no states besides q0");
  if (n_symbols == 0) report.push_back("empty tape alphabet (blank missing)");
  if (spec.start == kHaltState || spec.start >= n_states)
    report.push_back("start state is not a user state");
  for (StateId f : spec.finals)
    if (f == kHaltState || f >= n_states)
      report.push_back("final state index " + std::to_string(f) +
                       " is not a user state");
  if (!std::is_sorted(spec.finals.begin(), spec.finals.end()) ||
      std::adjacent_find(spec.finals.begin(), spec.finals.end()) !=
          spec.finals.end())
    report.push_back("finals must be sorted and unique");
  for (SymbolId s : spec.input_alphabet)
    if (s >= n_symbols)
      report.push_back("input symbol index " + std::to_string(s) +
                       " outside the tape alphabet");

  for (const auto& [key, rule] : spec.rules) {
    const auto [s, q] = key;
    std::string where = "rule (" + std::to_string(s) + ", " +
                        std::to_string(q) + ")";
    if (s >= n_symbols) report.push_back(where + ": read symbol out of range");
    if (q == kHaltState) report.push_back(where + ": explicit q0 rule");
    if (q >= n_states) report.push_back(where + ": state out of range");
    if (rule.write >= n_symbols)
      report.push_back(where + ": write symbol out of range");
    if (rule.next >= n_states)
      report.push_back(where + ": next state out of range");
    if (rule.move < -1 || rule.move > 1)
      report.push_back(where + ": move must be -1, 0 or 1");
    if (rule.move == 0 && rule.next != kHaltState)
      report.push_back(where + ": move 0 outside q0 rules");
  }

  std::vector<std::string> missing;
  for (StateId q = 1; q < n_states; ++q) {
    if (spec.is_final(q)) continue;
    for (SymbolId s = 0; s < n_symbols; ++s)
      if (!spec.rules.contains({s, q}))
        missing.push_back("(" + spec.symbols[s] + ", " + spec.states[q] + ")");
  }
  if (!missing.empty()) {
    std::string line = "rules not total: missing";
    for (const auto& m : missing) line += " " + m;
    report.push_back(line);
  }
  return report;
}

Configuration initial_config(const TmSpec& spec,
                             const std::vector<SymbolId>& input) {
  for (SymbolId s : input)
    if (std::find(spec.input_alphabet.begin(), spec.input_alphabet.end(), s) ==
        spec.input_alphabet.end())
      throw AlphabetError("input symbol index " + std::to_string(s) +
                          " is not in the input alphabet");
  Configuration c;
  c.tape = input.empty() ? std::vector<SymbolId>{kBlank} : input;
  c.state = spec.start;
  c.head = 1;
  return c;
}

Configuration tm_step(const TmSpec& spec, const Configuration& c,
                      const StepOptions& opts) {
  if (c.tape.empty() || c.head < 1 || c.head > c.tape.size())
    throw IllegalState("head " + std::to_string(c.head) +
                       " outside tape of length " +
                       std::to_string(c.tape.size()));
  Configuration next = c;
  ++next.step;
  if (c.state == kHaltState) return next;

  const Rule r = spec.delta(c.tape[c.head - 1], c.state);
  next.tape[c.head - 1] = r.write;
  next.state = r.next;
  if (r.move < 0 && c.head == 1) {
    if (!opts.grow_left) throw HeadUnderflow("head moved left of cell 1");
    next.tape.insert(next.tape.begin(), kBlank);
    ++next.left_growth;
  } else if (r.move > 0 && c.head == c.tape.size()) {
    next.tape.push_back(kBlank);
    next.head = c.head + 1;
  } else {
    next.head = static_cast<std::size_t>(static_cast<std::int64_t>(c.head) +
                                         r.move);
  }
  if (next.tape.size() > opts.tape_cap)
    throw TapeOverflow("tape would grow to " +
                       std::to_string(next.tape.size()) + " cells (cap " +
                       std::to_string(opts.tape_cap) + ")");
  return next;
}

TmTrace tm_run(const TmSpec& spec, const std::vector<SymbolId>& input,
               std::uint64_t max_steps, const StepOptions& opts) {
  TmTrace trace;
  trace.spec_hash = spec_hash(spec);
  Configuration c = initial_config(spec, input);
  if (c.tape.size() > opts.tape_cap)
    throw TapeOverflow("input longer than the tape cap");
  trace.configs.push_back(c);
  for (;;) {
    const auto& cur = trace.configs.back();
    if (cur.state == kHaltState) {
      trace.halt = HaltReason::kEnteredHalt;
      break;
    }
    if (spec.is_final(cur.state)) {
      trace.halt = HaltReason::kReachedFinal;
      break;
    }
    if (cur.step >= max_steps) {
      trace.halt = HaltReason::kStepBudget;
      break;
    }
    trace.configs.push_back(tm_step(spec, cur, opts));
  }
  return trace;
}

TmSpec random_tm(std::uint64_t seed, std::size_t max_states,
                 std::size_t max_symbols, const RandomTmOptions& opts) {
  if (max_states < 1 || max_symbols < 1)
    throw DomainError("random_tm bounds must be >= 1");
  Rng rng(seed);
  const auto n_states = static_cast<std::size_t>(
      rng.between(1, static_cast<std::int64_t>(max_states)));
  const auto n_symbols = static_cast<std::size_t>(rng.between(
      std::min<std::int64_t>(2, static_cast<std::int64_t>(max_symbols)),
      static_cast<std::int64_t>(max_symbols)));

  TmSpec spec;
  spec.states.emplace_back(kHaltName);
  for (std::size_t q = 1; q <= n_states; ++q)
    spec.states.push_back("q" + std::to_string(q));
  spec.symbols.emplace_back("_");
  for (std::size_t s = 1; s < n_symbols; ++s)
    spec.symbols.push_back(std::string(1, static_cast<char>('a' + s - 1)));
  for (SymbolId s = 1; s < n_symbols; ++s) spec.input_alphabet.push_back(s);
  spec.start = 1;
  if (n_states >= 2 && rng.chance(opts.final_probability))
    spec.finals.push_back(static_cast<StateId>(n_states));

  for (StateId q = 1; q <= n_states; ++q) {
    if (spec.is_final(q)) continue;
    for (SymbolId s = 0; s < n_symbols; ++s) {
      Rule r;
      r.next = rng.chance(opts.halt_fraction)
                   ? kHaltState
                   : static_cast<StateId>(rng.between(1, n_states));
      r.write = static_cast<SymbolId>(rng.below(n_symbols));
      r.move = rng.chance(0.5) ? 1 : -1;
      spec.rules[{s, q}] = r;
    }
  }
  return spec;
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw SpecError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

TmSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  TmSpec spec;
  try {
    spec.states.emplace_back(kHaltName);
    for (const auto& name : require(j, "states")) {
      auto s = name.get<std::string>();
      if (s == kHaltName)
        throw SpecError("state name 'q0' is reserved for the halting state");
      if (spec.find_state(s)) throw SpecError("duplicate state '" + s + "'");
      spec.states.push_back(s);
    }

    const auto blank = require(j, "blank").get<std::string>();
    spec.symbols.push_back(blank);
    bool saw_blank = false;
    for (const auto& name : require(j, "symbols")) {
      auto s = name.get<std::string>();
      if (s == blank) {
        if (saw_blank) throw SpecError("duplicate symbol '" + s + "'");
        saw_blank = true;
        continue;
      }
      if (spec.find_symbol(s)) throw SpecError("duplicate symbol '" + s + "'");
      spec.symbols.push_back(s);
    }
    if (!saw_blank) throw SpecError("blank '" + blank + "' not among symbols");

    auto state_of = [&](const std::string& name) {
      auto q = spec.find_state(name);
      if (!q) throw SpecError("unknown state '" + name + "'");
      return *q;
    };
    auto symbol_of = [&](const std::string& name) {
      auto s = spec.find_symbol(name);
      if (!s) throw SpecError("unknown symbol '" + name + "'");
      return *s;
    };

    spec.start = state_of(require(j, "start").get<std::string>());
    for (const auto& f : j.value("finals", nlohmann::json::array()))
      spec.finals.push_back(state_of(f.get<std::string>()));
    std::sort(spec.finals.begin(), spec.finals.end());
    spec.finals.erase(std::unique(spec.finals.begin(), spec.finals.end()),
                      spec.finals.end());

    if (j.contains("input_alphabet")) {
      for (const auto& s : j.at("input_alphabet"))
        spec.input_alphabet.push_back(symbol_of(s.get<std::string>()));
      std::sort(spec.input_alphabet.begin(), spec.input_alphabet.end());
    } else {
      for (SymbolId s = 1; s < spec.symbols.size(); ++s)
        spec.input_alphabet.push_back(s);
    }

    for (const auto& row : require(j, "rules")) {
      if (!row.is_array() || row.size() != 5)
        throw SpecError("rule must be [state, symbol, next_state, write, move]");
      const StateId q = state_of(row[0].get<std::string>());
      const SymbolId s = symbol_of(row[1].get<std::string>());
      Rule r{symbol_of(row[3].get<std::string>()),
             state_of(row[2].get<std::string>()), row[4].get<int>()};
      if (q == kHaltState) throw SpecError("rules for q0 are implicit");
      if (!spec.rules.emplace(std::make_pair(s, q), r).second)
        throw SpecError("duplicate rule for (" + row[0].get<std::string>() +
                        ", " + row[1].get<std::string>() + ")");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed spec: ") + e.what());
  }
  return spec;
}

nlohmann::json spec_to_json(const TmSpec& spec) {
  nlohmann::json j;
  j["states"] = std::vector<std::string>(spec.states.begin() + 1,
                                         spec.states.end());
  j["symbols"] = spec.symbols;
  j["blank"] = spec.symbols.at(kBlank);
  j["start"] = spec.states.at(spec.start);
  auto finals = nlohmann::json::array();
  for (StateId f : spec.finals) finals.push_back(spec.states.at(f));
  j["finals"] = finals;

  std::vector<SymbolId> default_sigma;
  for (SymbolId s = 1; s < spec.symbols.size(); ++s) default_sigma.push_back(s);
  if (spec.input_alphabet != default_sigma) {
    auto sigma = nlohmann::json::array();
    for (SymbolId s : spec.input_alphabet) sigma.push_back(spec.symbols.at(s));
    j["input_alphabet"] = sigma;
  }

  std::vector<nlohmann::json> rows;
  for (const auto& [key, r] : spec.rules)
    rows.push_back({spec.states.at(key.second), spec.symbols.at(key.first),
                    spec.states.at(r.next), spec.symbols.at(r.write), r.move});
  std::sort(rows.begin(), rows.end());
  j["rules"] = rows;
  return j;
}

std::string canonical_bytes(const TmSpec& spec) {
  return spec_to_json(spec).dump();
}

std::string spec_hash(const TmSpec& spec) {
  return sha256_hex(canonical_bytes(spec));
}

TmSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("'" + path + "' is not valid JSON: " + e.what());
  }
  return spec_from_json(j);
}

std::vector<SymbolId> parse_input(const TmSpec& spec, std::string_view text) {
  const bool single_char =
      std::all_of(spec.symbols.begin(), spec.symbols.end(),
                  [](const std::string& s) { return s.size() == 1; });
  std::vector<SymbolId> out;
  auto push = [&](std::string_view name) {
    auto s = spec.find_symbol(name);
    if (!s) throw AlphabetError("unknown symbol '" + std::string(name) + "'");
    out.push_back(*s);
  };
  if (single_char) {
    for (char ch : text)
      if (ch != ' ' && ch != ',') push(std::string_view(&ch, 1));
    return out;
  }
  std::string buf(text);
  std::replace(buf.begin(), buf.end(), ',', ' ');
  std::istringstream is(buf);
  std::string tok;
  while (is >> tok) push(tok);
  return out;
}

std::string render_tape(const TmSpec& spec, const std::vector<SymbolId>& tape) {
  const bool single_char =
      std::all_of(spec.symbols.begin(), spec.symbols.end(),
                  [](const std::string& s) { return s.size() == 1; });
  std::string out;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (!single_char && i > 0) out += ',';
    out += spec.symbols.at(tape[i]);
  }
  return out;
}

}  // namespace nstm
