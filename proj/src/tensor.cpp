#include "nstm/tensor.hpp"

#include <cstdio>
#include <limits>

namespace nstm {

std::string rational_to_string(const Rational& r) {
  return boost::multiprecision::numerator(r).str() + "/" +
         boost::multiprecision::denominator(r).str();
}

Rational parse_rational(const std::string& text) {
  try {
    auto slash = text.find('/');
    if (slash == std::string::npos) {
      // Plain decimal integers and finite decimals such as "0.25".
      auto dot = text.find('.');
      if (dot == std::string::npos)
        return Rational(boost::multiprecision::cpp_int(text));
      std::string digits = text.substr(0, dot) + text.substr(dot + 1);
      boost::multiprecision::cpp_int den = 1;
      for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
      return Rational(boost::multiprecision::cpp_int(digits), den);
    }
    boost::multiprecision::cpp_int num(text.substr(0, slash));
    boost::multiprecision::cpp_int den(text.substr(slash + 1));
    if (den == 0) throw DataFormatError("zero denominator in '" + text + "'");
    return Rational(num, den);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw DataFormatError("not a rational: '" + text + "'");
  }
}

Layout::Layout(Shape dims) : dims_(std::move(dims)), strides_(dims_.size()) {
  volume_ = 1;
  for (std::size_t i = dims_.size(); i-- > 0;) {
    if (dims_[i] == 0) throw DimMismatch("zero-length axis");
    strides_[i] = volume_;
    if (volume_ > std::numeric_limits<std::uint64_t>::max() / dims_[i])
      throw MemoryCapExceeded("tensor volume does not fit in a 64-bit key");
    volume_ *= dims_[i];
  }
}

Key Layout::pack(std::span<const std::size_t> idx) const {
  Key k = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) k += idx[i] * strides_[i];
  return k;
}

void Layout::unpack(Key key, std::span<std::size_t> idx) const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    idx[i] = static_cast<std::size_t>(key / strides_[i]);
    key %= strides_[i];
  }
}

bool Layout::contains(std::span<const std::size_t> idx) const {
  if (idx.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] >= dims_[i]) return false;
  return true;
}

ActivationKind ActivationKind::scaled_sigmoid(double H) {
  if (!(H > 0)) throw DomainError("sigmoid scale must be positive");
  return {Type::kScaledSigmoid, H};
}

ActivationKind ActivationKind::denoiser(double H) {
  if (!(H > 0)) throw DomainError("sigmoid scale must be positive");
  return {Type::kDenoiser, H};
}

std::string ActivationKind::describe() const {
  switch (type) {
    case Type::kSaturatedLinear: return "saturated-linear";
    case Type::kThreshold: return "threshold(" + std::to_string(param) + ")";
    case Type::kScaledSigmoid: return "sigmoid(H=" + std::to_string(param) + ")";
    case Type::kDenoiser: return "denoiser(H=" + std::to_string(param) + ")";
  }
  return "?";
}

double min_scale_for(double eps0, double eps) {
  if (!(eps0 >= 0 && eps0 < 0.5))
    throw DomainError("noise level must lie in [0, 1/2)");
  if (!(eps > 0 && eps <= 0.5))
    throw DomainError("target error must lie in (0, 1/2]");
  return std::log(1.0 / eps - 1.0) / (0.5 - eps0);
}

namespace {

std::string scalar_to_string(const Rational& v) { return rational_to_string(v); }
std::string scalar_to_string(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Scalar>
Scalar scalar_from_json(const nlohmann::json& v) {
  if constexpr (std::is_same_v<Scalar, Rational>) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw DataFormatError("exact tensor values must be \"p/q\" strings");
  } else {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s.find('/') != std::string::npos)
        return parse_rational(s).convert_to<double>();
      try {
        return std::stod(s);
      } catch (const std::exception&) {
        throw DataFormatError("not a number: '" + s + "'");
      }
    }
    throw DataFormatError("tensor value must be a number or string");
  }
}

}  // namespace

template <class Scalar>
nlohmann::json tensor_to_json(const SparseTensor<Scalar>& t) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [k, v] : t.entries())
    entries.push_back({t.index_of(k), scalar_to_string(v)});
  return {{"dims", t.dims()}, {"entries", entries}};
}

template <class Scalar>
SparseTensor<Scalar> tensor_from_json(const nlohmann::json& j) {
  try {
    Shape dims = j.at("dims").get<Shape>();
    SparseTensor<Scalar> shape_only(dims);
    std::vector<typename SparseTensor<Scalar>::Entry> entries;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2)
        throw DataFormatError("tensor entry must be [[index...], value]");
      auto idx = e[0].get<std::vector<std::size_t>>();
      if (!shape_only.layout().contains(idx))
        throw DimMismatch("tensor entry index outside dims");
      entries.emplace_back(shape_only.layout().pack(idx),
                           scalar_from_json<Scalar>(e[1]));
    }
    return SparseTensor<Scalar>::from_entries(std::move(dims), std::move(entries));
  } catch (const nlohmann::json::exception& ex) {
    throw DataFormatError(std::string("tensor JSON: ") + ex.what());
  }
}

template nlohmann::json tensor_to_json(const ExactTensor&);
template nlohmann::json tensor_to_json(const RealTensor&);
template ExactTensor tensor_from_json<Rational>(const nlohmann::json&);
template RealTensor tensor_from_json<double>(const nlohmann::json&);

}  // namespace nstm
