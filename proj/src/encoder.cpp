#include "nstm/encoder.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"

namespace nstm {

bool NstmProgram::is_final(StateId q) const {
  return std::binary_search(finals.begin(), finals.end(), q);
}

void NstmProgram::refactor() {
  const Layout& full = action_full.layout();
  const Layout local(dims.local_shape()), global(dims.global_shape());
  std::vector<ExactTensor::Entry> loc, glob;
  loc.reserve(action_full.nnz());
  std::array<std::size_t, 8> x{};
  for (const auto& [key, v] : action_full.entries()) {
    full.unpack(key, x);
    const std::array<std::size_t, 6> li{x[0], x[1], x[2], x[3], x[4], x[5]};
    loc.emplace_back(local.pack(li), v);
    if (x[0] == x[3]) {
      const std::array<std::size_t, 6> gi{x[0], x[1], x[2], x[3], x[6], x[7]};
      glob.emplace_back(global.pack(gi), v);
    }
  }
  action_local = ExactTensor::from_entries(dims.local_shape(), std::move(loc));
  action_global = ExactTensor::from_entries(dims.global_shape(), std::move(glob));
}

namespace {

StateTensor encode_cells(const ProgramDims& d, const Configuration& c,
                         std::size_t origin, bool fill) {
  const std::size_t lmax = d.lmax;
  const std::size_t L = c.tape.size();
  if (L == 0) throw IllegalState("configuration has an empty tape");
  if (c.head < 1 || c.head > L)
    throw IllegalState("head " + std::to_string(c.head) + " outside tape");
  if (origin + L > lmax)
    throw TapeOverflow("tape of " + std::to_string(origin + L) +
                       " cells exceeds L_max " + std::to_string(lmax));
  if (c.state >= d.states) throw IllegalState("state index out of range");
  const Layout layout(d.state_shape());
  const std::size_t head = origin + c.head - 1;
  std::vector<StateTensor::Entry> e;
  const std::size_t lo = fill ? 0 : origin, hi = fill ? lmax : origin + L;
  for (std::size_t i = lo; i < hi; ++i) {
    const SymbolId sym = i >= origin && i < origin + L ? c.tape[i - origin] : kBlank;
    if (sym >= d.symbols) throw AlphabetError("symbol index out of range");
    const std::size_t k = i == head ? c.state : kHaltState;
    const std::array<std::size_t, 4> idx{i, sym, k, head};
    e.emplace_back(layout.pack(idx), Rational(1));
  }
  return StateTensor::from_entries(d.state_shape(), std::move(e));
}

}  // namespace

StateTensor encode_framed(const TmSpec& spec, const Configuration& c,
                          std::size_t lmax, std::size_t origin) {
  return encode_cells({lmax, spec.num_symbols(), spec.num_states()}, c, origin,
                      true);
}

StateTensor encode_framed(const ProgramDims& dims, const Configuration& c,
                          std::size_t origin) {
  return encode_cells(dims, c, origin, true);
}

StateTensor encode_config(const TmSpec& spec, const Configuration& c,
                          std::size_t lmax) {
  return encode_cells({lmax, spec.num_symbols(), spec.num_states()}, c, 0,
                      false);
}

NstmProgram compile_tm(const TmSpec& spec, std::size_t lmax) {
  if (auto report = validate_spec(spec); !report.empty())
    throw SpecError("cannot compile an invalid spec: " + report.front());
  if (lmax < 1) throw DomainError("L_max must be at least 1");

  NstmProgram prog;
  prog.spec_hash = spec_hash(spec);
  prog.dims = {lmax, spec.num_symbols(), spec.num_states()};
  prog.state_names = spec.states;
  prog.symbol_names = spec.symbols;
  prog.finals = spec.finals;
  prog.start = spec.start;

  const Layout full(prog.dims.full_shape());
  const std::size_t G = prog.dims.symbols, Q = prog.dims.states;
  std::vector<ExactTensor::Entry> e;
  e.reserve(lmax * lmax * G * Q);
  for (std::size_t l = 0; l < lmax; ++l) {
    for (std::size_t j = 0; j < G; ++j) {
      for (std::size_t k = 0; k < Q; ++k) {
        // Inactive cells copy their symbol, drop to k = 0 and keep l.
        for (std::size_t i = 0; i < lmax; ++i) {
          if (i == l) continue;
          const std::array<std::size_t, 8> x{i, j, k, l, i, j, kHaltState, l};
          e.emplace_back(full.pack(x), Rational(1));
        }
        // The cell under the head applies delta.
        const Rule r = spec.delta(static_cast<SymbolId>(j), static_cast<StateId>(k));
        const auto target = static_cast<std::int64_t>(l) + r.move;
        if (target < 0 || target >= static_cast<std::int64_t>(lmax)) continue;
        const std::array<std::size_t, 8> x{
            l, j, k, l, l, r.write, r.next, static_cast<std::size_t>(target)};
        e.emplace_back(full.pack(x), Rational(1));
      }
    }
  }
  prog.action_full = ExactTensor::from_entries(prog.dims.full_shape(), std::move(e));
  prog.refactor();
  return prog;
}

template <class Scalar>
Configuration decode_state(const SparseTensor<Scalar>& st) {
  if (st.rank() != 4 || st.dims()[0] != st.dims()[3])
    throw DimMismatch("state tensor must have dims (L, |Gamma|, |Q*|, L)");
  struct Cell {
    std::size_t i, j, k, l;
  };
  std::vector<Cell> cells;
  cells.reserve(st.nnz());
  std::array<std::size_t, 4> x{};
  for (const auto& [key, v] : st.entries()) {
    if (v != 1) throw IllegalState("state entry with value other than 1");
    st.layout().unpack(key, x);
    cells.push_back({x[0], x[1], x[2], x[3]});
  }
  if (cells.empty()) throw IllegalState("empty state tensor");

  // Entries are sorted by key, hence by cell index first.
  for (std::size_t n = 0; n < cells.size(); ++n) {
    if (cells[n].i != n)
      throw IllegalState(n > 0 && cells[n].i == cells[n - 1].i
                             ? "duplicate entries for cell " + std::to_string(n)
                             : "no entry for cell " + std::to_string(n + 1));
  }

  std::size_t carrier = cells.size();
  for (std::size_t n = 0; n < cells.size(); ++n) {
    if (cells[n].k == kHaltState) continue;
    if (carrier != cells.size())
      throw IllegalState("more than one entry with k != 0");
    carrier = n;
  }
  if (carrier == cells.size()) {
    // Halted: the carrier sits at the cell every other entry points to.
    std::size_t found = 0;
    for (std::size_t n = 0; n < cells.size(); ++n) {
      bool ok = true;
      for (std::size_t m = 0; m < cells.size() && ok; ++m)
        if (m != n && cells[m].l != cells[n].i) ok = false;
      if (ok) {
        carrier = n;
        ++found;
      }
    }
    if (found != 1) throw IllegalState("cannot locate the head entry");
  }
  for (std::size_t n = 0; n < cells.size(); ++n)
    if (n != carrier && cells[n].l != cells[carrier].i)
      throw IllegalState("inactive entry disagrees on the head position");

  Configuration c;
  c.tape.reserve(cells.size());
  for (const auto& cell : cells) c.tape.push_back(static_cast<SymbolId>(cell.j));
  c.state = static_cast<StateId>(cells[carrier].k);
  if (cells[carrier].l >= cells.size())
    throw IllegalState("head " + std::to_string(cells[carrier].l + 1) +
                       " outside the encoded tape");
  c.head = cells[carrier].l + 1;
  return c;
}

template Configuration decode_state(const ExactTensor&);
template Configuration decode_state(const RealTensor&);

bool is_functional(const NstmProgram& prog) {
  const auto& entries = prog.action_full.entries();
  const std::uint64_t block = Layout(prog.dims.state_shape()).volume();
  for (std::size_t n = 1; n < entries.size(); ++n)
    if (entries[n].first / block == entries[n - 1].first / block) return false;
  return true;
}

ActionCensus census(const NstmProgram& prog) {
  ActionCensus c;
  std::array<std::size_t, 8> x{};
  for (const auto& [key, v] : prog.action_full.entries()) {
    prog.action_full.layout().unpack(key, x);
    (x[0] == x[3] ? c.active : c.inactive)++;
  }
  return c;
}

nlohmann::json program_to_json(const NstmProgram& prog) {
  auto finals = nlohmann::json::array();
  for (StateId f : prog.finals) finals.push_back(prog.state_names.at(f));
  return {{"format", "nstm-program-v1"},
          {"spec_hash", prog.spec_hash},
          {"dims",
           {{"lmax", prog.dims.lmax},
            {"symbols", prog.dims.symbols},
            {"states", prog.dims.states}}},
          {"state_names", prog.state_names},
          {"symbol_names", prog.symbol_names},
          {"finals", finals},
          {"start", prog.state_names.at(prog.start)},
          {"activation", prog.activation},
          {"action_full", tensor_to_json(prog.action_full)},
          {"action_local", tensor_to_json(prog.action_local)},
          {"action_global", tensor_to_json(prog.action_global)}};
}

NstmProgram program_from_json(const nlohmann::json& j) {
  NstmProgram p;
  try {
    p.spec_hash = j.at("spec_hash").get<std::string>();
    const auto& d = j.at("dims");
    p.dims = {d.at("lmax").get<std::size_t>(), d.at("symbols").get<std::size_t>(),
              d.at("states").get<std::size_t>()};
    p.state_names = j.at("state_names").get<std::vector<std::string>>();
    p.symbol_names = j.at("symbol_names").get<std::vector<std::string>>();
    for (const auto& f : j.at("finals")) {
      auto it = std::find(p.state_names.begin(), p.state_names.end(),
                          f.get<std::string>());
      if (it == p.state_names.end())
        throw DataFormatError("unknown final state in program");
      p.finals.push_back(static_cast<StateId>(it - p.state_names.begin()));
    }
    std::sort(p.finals.begin(), p.finals.end());
    const auto start = j.at("start").get<std::string>();
    auto it = std::find(p.state_names.begin(), p.state_names.end(), start);
    if (it == p.state_names.end())
      throw DataFormatError("unknown start state in program");
    p.start = static_cast<StateId>(it - p.state_names.begin());
    p.activation = j.value("activation", "saturated-linear");
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("program JSON: ") + e.what());
  }
  if (p.state_names.size() != p.dims.states ||
      p.symbol_names.size() != p.dims.symbols)
    throw DimMismatch("program names disagree with dims");
  p.action_full = tensor_from_json<Rational>(j.at("action_full"));
  if (p.action_full.dims() != p.dims.full_shape())
    throw DimMismatch("action_full dims disagree with program dims");
  p.action_local = tensor_from_json<Rational>(j.at("action_local"));
  p.action_global = tensor_from_json<Rational>(j.at("action_global"));
  if (p.action_local.dims() != p.dims.local_shape() ||
      p.action_global.dims() != p.dims.global_shape())
    throw DimMismatch("action factor dims disagree with program dims");
  return p;
}

NstmProgram load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open program file '" + path + "'");
  try {
    return program_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataFormatError("program file '" + path + "': " + e.what());
  }
}

namespace {

void append_tensor(std::string& out, const ExactTensor& t) {
  for (std::size_t d : t.dims()) out += std::to_string(d) + ",";
  out += ";";
  for (const auto& [k, v] : t.entries()) {
    out += std::to_string(k);
    out += ':';
    out += rational_to_string(v);
    out += ';';
  }
  out += '\n';
}

}  // namespace

// Digest over a compact canonical byte stream rather than the JSON dump,
// which is several megabytes at L_max = 64.
std::string program_hash(const NstmProgram& prog) {
  std::string bytes = "nstm-program-v1\n" + prog.spec_hash + "\n" +
                      std::to_string(prog.dims.lmax) + "," +
                      std::to_string(prog.dims.symbols) + "," +
                      std::to_string(prog.dims.states) + "\n" +
                      std::to_string(prog.start) + "\n" +
                      prog.activation + "\n";
  append_tensor(bytes, prog.action_full);
  append_tensor(bytes, prog.action_local);
  append_tensor(bytes, prog.action_global);
  return sha256_hex(bytes);
}

}  // namespace nstm
