#pragma once

// Recurrence-free variant: history-indexed action and state tensors joined by
// the Type-2 product. Only small horizons are buildable.

#include <cstddef>
#include <string>
#include <vector>

#include "nstm/encoder.hpp"

namespace nstm {

// A named group of four axes (i, j, k, l) inside a larger tensor. The
// history index bundles of the construction are kept as explicit metadata
// instead of positional convention.
struct Bundle {
  std::string name;
  std::vector<std::size_t> axes;
};

struct BundleLayout {
  std::vector<Bundle> bundles;

  std::size_t rank() const;
  const Bundle& at(const std::string& name) const;
};

struct FeedforwardNet {
  std::size_t p = 1;  // action history order
  std::size_t q = 1;  // state history order
  ProgramDims dims;
  std::string spec_hash;
  // A_r: bundles src1..srcp (oldest first) then tgt. Markov: only srcp
  // matters, the earlier history blocks range freely.
  ExactTensor action;
  BundleLayout action_bundles;
  // Z_r: bundles src1..srcq then tgt, copying the latest block.
  ExactTensor state_map;
  BundleLayout state_bundles;
};

// Estimated stored entries above which construction is refused.
inline constexpr std::uint64_t kFeedforwardCap = std::uint64_t{1} << 26;

FeedforwardNet build_ff(const TmSpec& spec, std::size_t p, std::size_t q,
                        std::size_t lmax);
// Builds from an existing program's action_full.
FeedforwardNet build_ff(const NstmProgram& prog, std::size_t p, std::size_t q);

// Contracts a's target bundle with z's first source bundle. Result axes: a's
// remaining axes in order, then z's remaining axes in order.
struct Type2Bundles {
  std::vector<std::size_t> a_target;
  std::vector<std::size_t> z_source;
};
Type2Bundles type2_bundles(const FeedforwardNet& net);

template <class Scalar>
SparseTensor<Scalar> type2_product(const SparseTensor<Scalar>& a,
                                   const SparseTensor<Scalar>& z,
                                   const Type2Bundles& b) {
  if (b.a_target.size() != b.z_source.size())
    throw DimMismatch("type-2 bundles differ in size");
  AxisPairing pairing;
  for (std::size_t n = 0; n < b.a_target.size(); ++n)
    pairing.emplace_back(b.a_target[n], b.z_source[n]);
  return contract(a, z, pairing);
}

// s x1 t: contract a rank-4 state with the leading source bundle of t.
template <class Scalar>
SparseTensor<Scalar> type1_flat(const SparseTensor<Scalar>& s,
                                const SparseTensor<Scalar>& t) {
  return contract(s, t, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
}

// sigma(s x1 (A x2 Z)) for q = 1. `history` holds the last p state tensors,
// oldest first.
StateTensor ff_apply(const FeedforwardNet& net,
                     const std::vector<StateTensor>& history,
                     const ActivationKind& kind = ActivationKind::saturated_linear());

// max |sigma(sigma(s x1 a) x1 z) - sigma(s x1 sigma(a x2 z))| over entries,
// for a rank-4 s and rank-8 a, z.
double check_associativity(const RealTensor& s, const RealTensor& a,
                           const RealTensor& z, const ActivationKind& kind);

struct FfCheckOptions {
  std::uint64_t seed = 1;
  std::size_t trials = 50;
  std::size_t max_states = 4;
  std::size_t max_symbols = 3;
  std::size_t lmax = 6;
  std::size_t assoc_trials = 500;
  double density = 0.3;
};

struct FfCheckSummary {
  std::size_t trials = 0;
  // Feedforward decode equals both the recurrent decode and the
  // interpreter's next configuration.
  std::size_t agreed = 0;
  std::size_t assoc_trials = 0;
  double worst_threshold = 0.0;
  double worst_sigmoid = 0.0;  // under h_H, H = min_scale_for(1/4, 1e-6)
  nlohmann::json first_failures = nlohmann::json::array();

  bool passed() const;
  nlohmann::json to_json() const;
};

// Random (spec, configuration) pairs with the head away from the frame
// edges, then random binary (s, a, z) triples over small random blocks.
FfCheckSummary ff_check(const FfCheckOptions& opts);

}  // namespace nstm
