#include "nstm/feedforward.hpp"

#include <cmath>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"
#include "nstm/random.hpp"
#include "nstm/simulator.hpp"

namespace nstm {

std::size_t BundleLayout::rank() const {
  std::size_t r = 0;
  for (const auto& b : bundles) r += b.axes.size();
  return r;
}

const Bundle& BundleLayout::at(const std::string& name) const {
  for (const auto& b : bundles)
    if (b.name == name) return b;
  throw DimMismatch("no bundle named '" + name + "'");
}

namespace {

BundleLayout history_layout(std::size_t blocks) {
  BundleLayout l;
  for (std::size_t n = 0; n <= blocks; ++n) {
    Bundle b;
    b.name = n < blocks ? "src" + std::to_string(n + 1) : "tgt";
    for (std::size_t a = 0; a < 4; ++a) b.axes.push_back(4 * n + a);
    l.bundles.push_back(std::move(b));
  }
  return l;
}

Shape repeat_block(const Shape& block, std::size_t times) {
  Shape s;
  for (std::size_t n = 0; n < times; ++n) s.insert(s.end(), block.begin(), block.end());
  return s;
}

void check_cap(double estimate, const std::string& what) {
  if (estimate > static_cast<double>(kFeedforwardCap))
    throw MemoryCapExceeded(what + " needs about " + std::to_string(estimate) +
                            " stored entries, over the cap of " +
                            std::to_string(kFeedforwardCap));
}

}  // namespace

FeedforwardNet build_ff(const NstmProgram& prog, std::size_t p, std::size_t q) {
  if (p < 1 || q < 1) throw DomainError("history orders must be at least 1");
  const Shape block = prog.dims.state_shape();
  const auto B = static_cast<double>(Layout(block).volume());
  const auto nnz = static_cast<double>(prog.action_full.nnz());
  check_cap(nnz * std::pow(B, static_cast<double>(p - 1)), "action tensor A_r");
  check_cap(std::pow(B, static_cast<double>(q)), "state tensor Z_r");
  check_cap(nnz * std::pow(B, static_cast<double>(p + q - 2)), "A_r x2 Z_r");

  FeedforwardNet net;
  net.p = p;
  net.q = q;
  net.dims = prog.dims;
  net.spec_hash = prog.spec_hash;
  net.action_bundles = history_layout(p);
  net.state_bundles = history_layout(q);

  const std::uint64_t bv = Layout(block).volume();
  // A_r: the earlier blocks range over every index tuple.
  {
    std::uint64_t free = 1;
    for (std::size_t n = 1; n < p; ++n) free *= bv;
    const std::uint64_t tail = bv * bv;
    std::vector<ExactTensor::Entry> e;
    e.reserve(prog.action_full.nnz() * free);
    for (std::uint64_t h = 0; h < free; ++h)
      for (const auto& [k, v] : prog.action_full.entries())
        e.emplace_back(h * tail + k, v);
    net.action = ExactTensor::from_entries(repeat_block(block, p + 1), std::move(e));
  }
  // Z_r: 1 exactly when the target equals the latest source block.
  {
    std::uint64_t free = 1;
    for (std::size_t n = 1; n < q; ++n) free *= bv;
    std::vector<ExactTensor::Entry> e;
    e.reserve(free * bv);
    for (std::uint64_t h = 0; h < free; ++h)
      for (std::uint64_t x = 0; x < bv; ++x)
        e.emplace_back((h * bv + x) * bv + x, Rational(1));
    net.state_map = ExactTensor::from_entries(repeat_block(block, q + 1), std::move(e));
  }
  return net;
}

FeedforwardNet build_ff(const TmSpec& spec, std::size_t p, std::size_t q,
                        std::size_t lmax) {
  if (lmax < 1) throw DomainError("L_max must be at least 1");
  // Refuse before compiling when the history tensors cannot fit anyway.
  const ProgramDims d{lmax, spec.num_symbols(), spec.num_states()};
  const auto B = static_cast<double>(Layout(d.state_shape()).volume());
  const double full_estimate =
      static_cast<double>(lmax) * static_cast<double>(lmax) *
      static_cast<double>(d.symbols * d.states);
  check_cap(full_estimate * std::pow(B, static_cast<double>(p - 1)), "action tensor A_r");
  check_cap(std::pow(B, static_cast<double>(q)), "state tensor Z_r");
  return build_ff(compile_tm(spec, lmax), p, q);
}

Type2Bundles type2_bundles(const FeedforwardNet& net) {
  return {net.action_bundles.at("tgt").axes, net.state_bundles.at("src1").axes};
}

StateTensor ff_apply(const FeedforwardNet& net,
                     const std::vector<StateTensor>& history,
                     const ActivationKind& kind) {
  if (net.q != 1) throw DomainError("ff_apply reads out single blocks only (q = 1)");
  if (history.size() != net.p)
    throw DimMismatch("ff_apply needs " + std::to_string(net.p) + " history states");
  auto m = apply_activation(type2_product(net.action, net.state_map, type2_bundles(net)),
                            ActivationKind::saturated_linear());
  for (const auto& s : history) {
    if (s.dims() != net.dims.state_shape())
      throw DimMismatch("history state dims do not match the net");
    m = type1_flat(s, m);
  }
  return apply_activation(m, kind);
}

double check_associativity(const RealTensor& s, const RealTensor& a,
                           const RealTensor& z, const ActivationKind& kind) {
  if (s.rank() != 4 || a.rank() != 8 || z.rank() != 8)
    throw DimMismatch("associativity check expects ranks 4, 8, 8");
  const Type2Bundles b{{4, 5, 6, 7}, {0, 1, 2, 3}};
  const auto lhs =
      apply_activation(type1_flat(apply_activation(type1_flat(s, a), kind), z), kind);
  const auto rhs =
      apply_activation(type1_flat(s, apply_activation(type2_product(a, z, b), kind)), kind);
  if (lhs.dims() != rhs.dims()) throw DimMismatch("parenthesizations differ in shape");
  double worst = 0;
  // Both sides are sorted by key; walk them together so absent entries
  // count as zero.
  auto i = lhs.entries().begin(), j = rhs.entries().begin();
  while (i != lhs.entries().end() || j != rhs.entries().end()) {
    if (j == rhs.entries().end() || (i != lhs.entries().end() && i->first < j->first)) {
      worst = std::max(worst, std::abs(i->second));
      ++i;
    } else if (i == lhs.entries().end() || j->first < i->first) {
      worst = std::max(worst, std::abs(j->second));
      ++j;
    } else {
      worst = std::max(worst, std::abs(i->second - j->second));
      ++i;
      ++j;
    }
  }
  return worst;
}

bool FfCheckSummary::passed() const {
  return agreed == trials && worst_threshold == 0.0 && worst_sigmoid <= 1e-6;
}

nlohmann::json FfCheckSummary::to_json() const {
  return {{"trials", trials},
          {"agreed", agreed},
          {"assoc_trials", assoc_trials},
          {"worst_threshold", worst_threshold},
          {"worst_sigmoid", worst_sigmoid},
          {"passed", passed()},
          {"first_failures", first_failures}};
}

namespace {

RealTensor random_binary(Rng& rng, const Shape& dims, double density) {
  const Layout l(dims);
  std::vector<RealTensor::Entry> e;
  for (Key k = 0; k < l.volume(); ++k)
    if (rng.chance(density)) e.emplace_back(k, 1.0);
  return RealTensor::from_entries(dims, std::move(e));
}

}  // namespace

FfCheckSummary ff_check(const FfCheckOptions& opts) {
  if (opts.lmax < 3) throw DomainError("ff_check needs L_max >= 3 to keep the head off the edges");
  if (opts.max_states < 1 || opts.max_symbols < 1) throw DomainError("machine bounds must be at least 1");
  FfCheckSummary out;
  Rng rng(mix_seed(opts.seed));
  StepOptions so;
  so.tape_cap = opts.lmax;
  for (std::size_t n = 0; n < opts.trials; ++n) {
    const TmSpec spec = random_tm(rng.next(), opts.max_states, opts.max_symbols);
    Configuration c;
    for (std::size_t i = 0; i < opts.lmax; ++i)
      c.tape.push_back(static_cast<SymbolId>(rng.below(spec.num_symbols())));
    c.head = 2 + rng.below(opts.lmax - 2);
    c.state = static_cast<StateId>(1 + rng.below(spec.num_states() - 1));
    ++out.trials;
    std::string why;
    try {
      const NstmProgram prog = compile_tm(spec, opts.lmax);
      const FeedforwardNet net = build_ff(prog, 1, 1);
      const StateTensor st = encode_config(spec, c, opts.lmax);
      const Configuration rec =
          decode_state(type1_product(st, prog, ActivationKind::saturated_linear()));
      const Configuration ff = decode_state(ff_apply(net, {st}));
      const Configuration want = tm_step(spec, c, so);
      if (!same_instant(ff, rec)) why = "feedforward and recurrent decodes differ";
      else if (!same_instant(ff, want)) why = "feedforward decode differs from the interpreter";
    } catch (const Error& e) {
      why = e.what();
    }
    if (why.empty()) {
      ++out.agreed;
    } else if (out.first_failures.size() < 5) {
      out.first_failures.push_back({{"trial", n}, {"reason", why}, {"spec", spec_to_json(spec)},
                                    {"tape", render_tape(spec, c.tape)}, {"head", c.head},
                                    {"state", spec.states[c.state]}});
    }
  }

  const auto gate = ActivationKind::threshold(0.5);
  const auto sig = ActivationKind::denoiser(min_scale_for(0.25, 1e-6));
  for (std::size_t n = 0; n < opts.assoc_trials; ++n) {
    Shape block(4);
    for (auto& d : block) d = 1 + rng.below(3);
    Shape two = block;
    two.insert(two.end(), block.begin(), block.end());
    const RealTensor s = random_binary(rng, block, opts.density);
    const RealTensor a = random_binary(rng, two, opts.density);
    const RealTensor z = random_binary(rng, two, opts.density);
    out.worst_threshold = std::max(out.worst_threshold, check_associativity(s, a, z, gate));
    out.worst_sigmoid = std::max(out.worst_sigmoid, check_associativity(s, a, z, sig));
    ++out.assoc_trials;
  }
  return out;
}

}  // namespace nstm
