#include <doctest.h>

#include <cmath>

#include "nstm/errors.hpp"
#include "nstm/random.hpp"
#include "nstm/tensor.hpp"

using namespace nstm;

namespace {

RealTensor random_tensor(Rng& rng, Shape dims, double density = 0.6) {
  Layout l(dims);
  std::vector<RealTensor::Entry> e;
  for (Key k = 0; k < l.volume(); ++k)
    if (rng.chance(density)) e.emplace_back(k, rng.uniform(-2, 2));
  return RealTensor::from_entries(dims, e);
}

// Dense nested-loop contraction, written independently of the sparse path.
std::vector<double> brute_contract(const RealTensor& a, const RealTensor& b,
                                   const AxisPairing& pairing, Shape& out_dims) {
  auto da = a.to_dense(), db = b.to_dense();
  std::vector<int> a_role(a.rank(), -1), b_role(b.rank(), -1);
  for (std::size_t n = 0; n < pairing.size(); ++n) {
    a_role[pairing[n].first] = static_cast<int>(n);
    b_role[pairing[n].second] = static_cast<int>(n);
  }
  out_dims.clear();
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (a_role[i] < 0) out_dims.push_back(a.dims()[i]);
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (b_role[i] < 0) out_dims.push_back(b.dims()[i]);
  Layout lo(out_dims);
  std::vector<double> out(lo.volume(), 0.0);
  std::vector<std::size_t> ia(a.rank()), ib(b.rank()), io;
  for (Key ka = 0; ka < a.layout().volume(); ++ka) {
    a.layout().unpack(ka, ia);
    for (Key kb = 0; kb < b.layout().volume(); ++kb) {
      b.layout().unpack(kb, ib);
      bool match = true;
      for (auto [x, y] : pairing) match = match && ia[x] == ib[y];
      if (!match) continue;
      io.clear();
      for (std::size_t i = 0; i < a.rank(); ++i)
        if (a_role[i] < 0) io.push_back(ia[i]);
      for (std::size_t i = 0; i < b.rank(); ++i)
        if (b_role[i] < 0) io.push_back(ib[i]);
      out[lo.pack(io)] += da[ka] * db[kb];
    }
  }
  return out;
}

void check_close(const std::vector<double>& x, const std::vector<double>& y) {
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(y[i]));
}

}  // namespace

TEST_CASE("identity contracted with a vector") {
  ExactTensor id(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) id.set({i, i}, 1);
  ExactTensor v(Shape{3});
  v.set({0}, Rational(1, 3));
  v.set({2}, Rational(-7, 2));
  CHECK(contract(id, v, {{1, 0}}) == v);
  CHECK(contract(v, id, {{0, 0}}) == v);
}

TEST_CASE("zero tensor annihilates") {
  Rng rng(3);
  RealTensor zero(Shape{2, 2, 2});
  auto r = random_tensor(rng, {2, 2, 2});
  CHECK(contract(zero, r, {{0, 1}, {2, 2}}).nnz() == 0);
  CHECK(contract(r, zero, {{1, 0}}).nnz() == 0);
}

TEST_CASE("contraction matches the dense oracle") {
  Rng rng(11);
  const std::vector<AxisPairing> pairings = {
      {{0, 0}, {1, 1}}, {{1, 0}, {2, 1}}, {{2, 0}}, {{0, 2}, {1, 0}},
      {{2, 1}}, {{0, 0}, {1, 1}, {2, 2}}, {}};
  for (int trial = 0; trial < 20; ++trial) {
    for (const auto& p : pairings) {
      Shape da, db;
      for (int i = 0; i < 3; ++i) da.push_back(1 + rng.below(3));
      for (int i = 0; i < 3; ++i) db.push_back(1 + rng.below(3));
      for (auto [x, y] : p) db[y] = da[x];
      auto a = random_tensor(rng, da), b = random_tensor(rng, db);
      Shape od;
      auto want = brute_contract(a, b, p, od);
      auto got = contract(a, b, p);
      CHECK(got.dims() == od);
      check_close(got.to_dense(), want);
    }
  }
}

TEST_CASE("contraction is bilinear and associative") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_tensor(rng, {2, 3});
    auto b = random_tensor(rng, {3, 2});
    auto b2 = random_tensor(rng, {3, 2});
    auto c = random_tensor(rng, {2, 3});
    std::vector<RealTensor::Entry> sum = b.entries();
    for (auto [k, v] : b2.entries()) sum.emplace_back(k, 2.5 * v);
    auto bsum = RealTensor::from_entries({3, 2}, sum);
    auto lhs = contract(a, bsum, {{1, 0}}).to_dense();
    auto r1 = contract(a, b, {{1, 0}}).to_dense();
    auto r2 = contract(a, b2, {{1, 0}}).to_dense();
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(lhs[i] == doctest::Approx(r1[i] + 2.5 * r2[i]));

    auto left = contract(contract(a, b, {{1, 0}}), c, {{1, 0}});
    auto right = contract(a, contract(b, c, {{1, 0}}), {{1, 0}});
    check_close(left.to_dense(), right.to_dense());
  }
}

TEST_CASE("contraction rejects mismatched pairings") {
  RealTensor a(Shape{2, 3}), b(Shape{2, 2});
  CHECK_THROWS_AS(contract(a, b, {{1, 0}}), DimMismatch);
  CHECK_THROWS_AS(contract(a, b, {{0, 0}, {0, 1}}), DimMismatch);
  CHECK_THROWS_AS(contract(a, b, {{5, 0}}), DimMismatch);
}

TEST_CASE("activations") {
  RealTensor t(Shape{3});
  t.set({0}, -0.5);
  t.set({1}, 0.3);
  t.set({2}, 1.7);
  auto s = apply_activation(t, ActivationKind::saturated_linear());
  CHECK(s.get({0}) == 0.0);
  CHECK(s.get({1}) == doctest::Approx(0.3));
  CHECK(s.get({2}) == 1.0);

  RealTensor g(Shape{2});
  g.set({0}, 0.2);
  g.set({1}, 0.8);
  auto th = apply_activation(g, ActivationKind::threshold(0.5));
  CHECK(th.get({0}) == 0.0);
  CHECK(th.get({1}) == 1.0);

  RealTensor q(Shape{1});
  q.set({0}, 0.25);
  auto h = apply_activation(q, ActivationKind::scaled_sigmoid(55.3));
  CHECK(std::abs(h.get({0}) - 1.0) < 1e-6);

  // The denoiser shifts by one half, so zeros map to a small positive value.
  auto d = apply_activation(RealTensor(Shape{4}), ActivationKind::denoiser(10));
  CHECK(d.nnz() == 4);
  CHECK(d.get({2}) == doctest::Approx(1.0 / (1.0 + std::exp(5.0))));
}

TEST_CASE("exact saturated-linear is exact") {
  ExactTensor t(Shape{3});
  t.set({0}, Rational(1, 3));
  t.set({1}, Rational(7, 5));
  t.set({2}, Rational(-1, 9));
  auto s = apply_activation(t, ActivationKind::saturated_linear());
  CHECK(s.get({0}) == Rational(1, 3));
  CHECK(s.get({1}) == Rational(1));
  CHECK(s.nnz() == 2);
  CHECK_THROWS_AS(apply_activation(t, ActivationKind::scaled_sigmoid(2)),
                  DomainError);
}

TEST_CASE("minimal sigmoid scale") {
  CHECK(min_scale_for(0.25, 1e-6) == doctest::Approx(55.262).epsilon(1e-4));
  CHECK(min_scale_for(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(min_scale_for(0.5, 0.1), DomainError);
  CHECK_THROWS_AS(min_scale_for(0.7, 0.1), DomainError);
}

TEST_CASE("denoiser bound holds on random perturbations") {
  Rng rng(2024);
  for (auto [eps0, eps] : {std::pair{0.25, 1e-6}, std::pair{0.1, 1e-3},
                           std::pair{0.45, 1e-2}, std::pair{0.0, 0.25}}) {
    const double H = min_scale_for(eps0, eps);
    double worst = 0;
    for (int n = 0; n < 10000; ++n) {
      const double zbar = rng.chance(0.5) ? 1.0 : 0.0;
      const double z = zbar + rng.uniform(-eps0, eps0);
      worst = std::max(worst, std::abs(zbar - scaled_sigmoid(H, z - 0.5)));
    }
    CHECK(worst <= eps * (1 + 1e-9));
  }
}

TEST_CASE("tensor JSON round trip") {
  ExactTensor t(Shape{2, 3});
  t.set({0, 1}, Rational(3, 4));
  t.set({1, 2}, Rational(1));
  auto j = tensor_to_json(t);
  CHECK(j["entries"][0][1] == "3/4");
  CHECK(j["entries"][1][1] == "1/1");
  CHECK(tensor_from_json<Rational>(j) == t);

  RealTensor r(Shape{2});
  r.set({1}, 0.1);
  CHECK(tensor_from_json<double>(tensor_to_json(r)) == r);

  auto bad = j;
  bad["entries"][0][0] = {5, 0};
  CHECK_THROWS_AS(tensor_from_json<Rational>(bad), DimMismatch);
  bad = j;
  bad["entries"][0][1] = "x/y";
  CHECK_THROWS_AS(tensor_from_json<Rational>(bad), DataFormatError);
}

TEST_CASE("sparse storage never keeps zeros") {
  ExactTensor t(Shape{4});
  t.set({1}, 2);
  t.set({1}, 0);
  CHECK(t.nnz() == 0);
  auto m = ExactTensor::from_entries({4}, {{2, 1}, {2, -1}, {3, 5}});
  CHECK(m.nnz() == 1);
}
