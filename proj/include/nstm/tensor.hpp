#pragma once

// Sparse multi-index tensors over exact rationals or doubles, pairwise
// contraction, and the activation functions used by the network.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nstm/errors.hpp"

namespace nstm {

using Rational = boost::multiprecision::cpp_rational;

// Always "p/q", including integers ("1/1").
std::string rational_to_string(const Rational& r);
Rational parse_rational(const std::string& text);

// Dense-equivalent size ceiling for anything that would materialize every
// entry of a tensor.
inline constexpr std::uint64_t kDenseCap = std::uint64_t{1} << 26;

using Key = std::uint64_t;
using Shape = std::vector<std::size_t>;

// Row-major mixed-radix packing of index tuples into one 64-bit key.
class Layout {
 public:
  Layout() = default;
  explicit Layout(Shape dims);

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::uint64_t volume() const { return volume_; }

  Key pack(std::span<const std::size_t> idx) const;
  void unpack(Key key, std::span<std::size_t> idx) const;
  bool contains(std::span<const std::size_t> idx) const;

 private:
  Shape dims_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t volume_ = 1;
};

// Entries are kept sorted by packed key; absent entries are zero and zero is
// never stored.
template <class Scalar>
class SparseTensor {
 public:
  using Entry = std::pair<Key, Scalar>;

  SparseTensor() = default;
  explicit SparseTensor(Shape dims) : layout_(std::move(dims)) {}

  // Sorts, sums duplicate keys and drops zeros.
  static SparseTensor from_entries(Shape dims, std::vector<Entry> entries) {
    SparseTensor t(std::move(dims));
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (auto& e : entries) {
      if (e.first >= t.layout_.volume())
        throw DimMismatch("key outside tensor volume");
      if (!t.entries_.empty() && t.entries_.back().first == e.first)
        t.entries_.back().second += e.second;
      else
        t.entries_.push_back(std::move(e));
    }
    std::erase_if(t.entries_, [](const Entry& e) { return e.second == 0; });
    return t;
  }

  const Layout& layout() const { return layout_; }
  const Shape& dims() const { return layout_.dims(); }
  std::size_t rank() const { return layout_.rank(); }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  Scalar get(std::span<const std::size_t> idx) const {
    check_index(idx);
    return at_key(layout_.pack(idx));
  }
  Scalar get(std::initializer_list<std::size_t> idx) const {
    return get(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  Scalar at_key(Key k) const {
    auto it = find(k);
    return it == entries_.end() ? Scalar(0) : it->second;
  }

  void set(std::span<const std::size_t> idx, const Scalar& v) {
    check_index(idx);
    set_key(layout_.pack(idx), v);
  }
  void set(std::initializer_list<std::size_t> idx, const Scalar& v) {
    set(std::span<const std::size_t>(idx.begin(), idx.size()), v);
  }

  void set_key(Key k, const Scalar& v) {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), k,
        [](const Entry& e, Key key) { return e.first < key; });
    const bool present = it != entries_.end() && it->first == k;
    if (v == 0) {
      if (present) entries_.erase(it);
    } else if (present) {
      it->second = v;
    } else {
      entries_.insert(it, Entry{k, v});
    }
  }

  // Half-open range of entries whose key lies in [lo, hi).
  std::pair<typename std::vector<Entry>::const_iterator,
            typename std::vector<Entry>::const_iterator>
  key_range(Key lo, Key hi) const {
    auto cmp = [](const Entry& e, Key key) { return e.first < key; };
    auto first = std::lower_bound(entries_.begin(), entries_.end(), lo, cmp);
    auto last = std::lower_bound(first, entries_.end(), hi, cmp);
    return {first, last};
  }

  std::vector<std::size_t> index_of(Key k) const {
    std::vector<std::size_t> idx(rank());
    layout_.unpack(k, idx);
    return idx;
  }

  template <class F>
  auto transform(F f) const {
    using Out = std::decay_t<decltype(f(std::declval<Scalar>()))>;
    std::vector<typename SparseTensor<Out>::Entry> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.emplace_back(k, f(v));
    return SparseTensor<Out>::from_entries(dims(), std::move(out));
  }

  // Dense row-major copy. Only for oracles and small tensors.
  std::vector<Scalar> to_dense() const {
    if (layout_.volume() > kDenseCap)
      throw MemoryCapExceeded("dense copy of " +
                              std::to_string(layout_.volume()) + " entries");
    std::vector<Scalar> d(layout_.volume(), Scalar(0));
    for (const auto& [k, v] : entries_) d[k] = v;
    return d;
  }

  friend bool operator==(const SparseTensor& a, const SparseTensor& b) {
    return a.dims() == b.dims() && a.entries_ == b.entries_;
  }

 private:
  typename std::vector<Entry>::const_iterator find(Key k) const {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), k,
        [](const Entry& e, Key key) { return e.first < key; });
    return (it != entries_.end() && it->first == k) ? it : entries_.end();
  }

  void check_index(std::span<const std::size_t> idx) const {
    if (!layout_.contains(idx)) throw DimMismatch("index outside tensor dims");
  }

  Layout layout_;
  std::vector<Entry> entries_;
};

using ExactTensor = SparseTensor<Rational>;
using RealTensor = SparseTensor<double>;

template <class Scalar>
double to_double(const Scalar& v) {
  if constexpr (std::is_same_v<Scalar, Rational>)
    return v.template convert_to<double>();
  else
    return static_cast<double>(v);
}

template <class Scalar>
RealTensor to_real(const SparseTensor<Scalar>& t) {
  return t.transform([](const Scalar& v) { return to_double(v); });
}

using AxisPairing = std::vector<std::pair<std::size_t, std::size_t>>;

// Sum over paired axes. Result axes: free axes of `a` in order, then free
// axes of `b` in order.
template <class Scalar>
SparseTensor<Scalar> contract(const SparseTensor<Scalar>& a,
                              const SparseTensor<Scalar>& b,
                              const AxisPairing& pairing) {
  std::vector<bool> a_paired(a.rank(), false), b_paired(b.rank(), false);
  for (auto [ax, bx] : pairing) {
    if (ax >= a.rank() || bx >= b.rank())
      throw DimMismatch("pairing axis out of range");
    if (a_paired[ax] || b_paired[bx])
      throw DimMismatch("pairing axes must be distinct");
    if (a.dims()[ax] != b.dims()[bx])
      throw DimMismatch("paired extents differ: " +
                        std::to_string(a.dims()[ax]) + " vs " +
                        std::to_string(b.dims()[bx]));
    a_paired[ax] = b_paired[bx] = true;
  }
  Shape a_free, b_free, out_dims;
  std::vector<std::size_t> a_free_axes, b_free_axes;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (!a_paired[i]) {
      a_free_axes.push_back(i);
      a_free.push_back(a.dims()[i]);
    }
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (!b_paired[i]) {
      b_free_axes.push_back(i);
      b_free.push_back(b.dims()[i]);
    }
  out_dims = a_free;
  out_dims.insert(out_dims.end(), b_free.begin(), b_free.end());

  const Layout a_free_layout(a_free), b_free_layout(b_free);
  Shape paired_dims;
  for (auto [ax, bx] : pairing) paired_dims.push_back(a.dims()[ax]);
  const Layout paired_layout(paired_dims);
  // Validates that the result key fits in 64 bits.
  const Layout out_layout(out_dims);

  std::vector<typename SparseTensor<Scalar>::Entry> out;
  std::vector<std::size_t> ai(a.rank()), bi(b.rank()), tmp, pi(pairing.size());

  auto sub_key = [](const Layout& l, const std::vector<std::size_t>& full,
                    const std::vector<std::size_t>& axes,
                    std::vector<std::size_t>& scratch) {
    scratch.resize(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) scratch[i] = full[axes[i]];
    return l.pack(scratch);
  };

  // Fast path: b is paired on its leading axes in order, so every a entry
  // matches one contiguous key range of b.
  bool leading = true;
  for (std::size_t n = 0; n < pairing.size(); ++n)
    if (pairing[n].second != n) leading = false;

  if (leading) {
    const std::uint64_t stride = b_free_layout.volume();
    for (const auto& [ak, av] : a.entries()) {
      a.layout().unpack(ak, ai);
      for (std::size_t n = 0; n < pairing.size(); ++n) pi[n] = ai[pairing[n].first];
      const Key prefix = paired_layout.pack(pi);
      const Key a_part = sub_key(a_free_layout, ai, a_free_axes, tmp);
      auto [first, last] = b.key_range(prefix * stride, (prefix + 1) * stride);
      for (auto it = first; it != last; ++it)
        out.emplace_back(a_part * stride + (it->first % stride),
                         av * it->second);
    }
  } else {
    std::unordered_map<Key, std::vector<std::pair<Key, const Scalar*>>> groups;
    for (const auto& [bk, bv] : b.entries()) {
      b.layout().unpack(bk, bi);
      for (std::size_t n = 0; n < pairing.size(); ++n) pi[n] = bi[pairing[n].second];
      groups[paired_layout.pack(pi)].emplace_back(
          sub_key(b_free_layout, bi, b_free_axes, tmp), &bv);
    }
    for (const auto& [ak, av] : a.entries()) {
      a.layout().unpack(ak, ai);
      for (std::size_t n = 0; n < pairing.size(); ++n) pi[n] = ai[pairing[n].first];
      auto g = groups.find(paired_layout.pack(pi));
      if (g == groups.end()) continue;
      const Key a_part = sub_key(a_free_layout, ai, a_free_axes, tmp);
      for (const auto& [b_part, bv] : g->second)
        out.emplace_back(a_part * b_free_layout.volume() + b_part, av * *bv);
    }
  }
  return SparseTensor<Scalar>::from_entries(out_dims, std::move(out));
}

// Outer product; result axes are a's then b's.
template <class Scalar>
SparseTensor<Scalar> outer(const SparseTensor<Scalar>& a,
                           const SparseTensor<Scalar>& b) {
  return contract(a, b, {});
}

struct ActivationKind {
  enum class Type { kSaturatedLinear, kScaledSigmoid, kDenoiser, kThreshold };
  Type type = Type::kSaturatedLinear;
  double param = 0.0;  // H for the sigmoids, theta for the gate

  static ActivationKind saturated_linear() { return {}; }
  // h_H(x).
  static ActivationKind scaled_sigmoid(double H);
  // h_H(x - 1/2): callers pass raw values, the shift happens here.
  static ActivationKind denoiser(double H);
  static ActivationKind threshold(double theta = 0.5) {
    return {Type::kThreshold, theta};
  }
  std::string describe() const;
};

// h_H(x) = 1 / (1 + exp(-H x)).
inline double scaled_sigmoid(double H, double x) {
  return 1.0 / (1.0 + std::exp(-H * x));
}

// Elementwise activation of one value.
template <class Scalar>
Scalar activate(const Scalar& x, const ActivationKind& kind) {
  switch (kind.type) {
    case ActivationKind::Type::kSaturatedLinear:
      if (x < 0) return Scalar(0);
      if (x > 1) return Scalar(1);
      return x;
    case ActivationKind::Type::kThreshold:
      return to_double(x) >= kind.param ? Scalar(1) : Scalar(0);
    case ActivationKind::Type::kScaledSigmoid:
    case ActivationKind::Type::kDenoiser:
      if constexpr (std::is_same_v<Scalar, Rational>) {
        throw DomainError("the scaled sigmoid has no exact-rational form");
      } else {
        const double shift =
            kind.type == ActivationKind::Type::kDenoiser ? 0.5 : 0.0;
        return scaled_sigmoid(kind.param, x - shift);
      }
  }
  return x;
}

template <class Scalar>
SparseTensor<Scalar> apply_activation(const SparseTensor<Scalar>& t,
                                      const ActivationKind& kind) {
  const Scalar at_zero = activate(Scalar(0), kind);
  if (at_zero == 0) {
    return t.transform([&](const Scalar& v) { return activate(v, kind); });
  }
  // The activation lifts zeros, so every entry of the output is present.
  if (t.layout().volume() > kDenseCap)
    throw MemoryCapExceeded("activation would materialize " +
                            std::to_string(t.layout().volume()) + " entries");
  std::vector<typename SparseTensor<Scalar>::Entry> out;
  out.reserve(t.layout().volume());
  auto it = t.entries().begin();
  for (Key k = 0; k < t.layout().volume(); ++k) {
    if (it != t.entries().end() && it->first == k) {
      out.emplace_back(k, activate(it->second, kind));
      ++it;
    } else {
      out.emplace_back(k, at_zero);
    }
  }
  return SparseTensor<Scalar>::from_entries(t.dims(), std::move(out));
}

// Smallest H with h_H(-(1/2 - eps0)) <= eps, i.e. ln(1/eps - 1)/(1/2 - eps0).
// For any binary Zbar and any Z with |Z - Zbar|_inf <= eps0 this gives
// max_i |Zbar_i - h_H(Z_i - 1/2)| <= eps.
double min_scale_for(double eps0, double eps);

// Exchange format {"dims": [...], "entries": [[[i, j, ...], "value"], ...]}.
template <class Scalar>
nlohmann::json tensor_to_json(const SparseTensor<Scalar>& t);
template <class Scalar>
SparseTensor<Scalar> tensor_from_json(const nlohmann::json& j);

}  // namespace nstm
