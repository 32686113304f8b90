#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nstm/dyck.hpp"
#include "nstm/errors.hpp"
#include "dyck_oracles.hpp"

using namespace nstm;

TEST_CASE("is_dyck basics") {
  CHECK(is_dyck("([])", 2));
  CHECK_FALSE(is_dyck("([)]", 2));
  CHECK(is_dyck("", 2));
  CHECK(is_dyck("<{}>", 4));
  CHECK_FALSE(is_dyck(")(", 1));
  CHECK_FALSE(is_dyck("((", 1));
  CHECK_THROWS_AS(is_dyck("(a)", 2), AlphabetError);
  CHECK_THROWS_AS(is_dyck("{}", 2), AlphabetError);
  // A foreign symbol is reported even after the string is already rejected.
  CHECK_THROWS_AS(is_dyck(")x", 2), AlphabetError);
  CHECK_THROWS_AS(is_dyck("()", 5), DomainError);
}

TEST_CASE("is_dyck matches the counter oracle for one pair type") {
  for (std::size_t n = 0; n <= 14; ++n)
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += (bits >> i) & 1 ? ')' : '(';
      CHECK(is_dyck(s, 1) == oracle::counter_balanced(s));
    }
}

TEST_CASE("is_dyck matches grammar membership on all short strings") {
  const std::string a = dyck_alphabet(2);
  std::size_t members = 0;
  for (std::size_t n = 0; n <= 10; ++n) {
    std::vector<std::size_t> digits(n, 0);
    while (true) {
      std::string s;
      for (auto d : digits) s += a[d];
      const bool in = oracle::cfg_member(s, a);
      if (is_dyck(s, 2) != in) FAIL_CHECK("disagreement on '" << s << "'");
      members += in;
      std::size_t i = 0;
      while (i < n && ++digits[i] == a.size()) digits[i++] = 0;
      if (i == n) break;
    }
  }
  // Dyck words of length 2m over 2 types: Catalan(m) * 2^m, summed for m <= 5.
  CHECK(members == 1 + 2 + 8 + 40 + 224 + 1344);
}

TEST_CASE("positive sampler") {
  Rng rng(11);
  std::map<int, int> depths;
  for (int n = 0; n < 2000; ++n) {
    auto s = gen_positive(4, {2, 52}, rng);
    REQUIRE(is_dyck(s.text, 4));
    CHECK(s.positive);
    CHECK(s.length() >= 2);
    CHECK(s.length() <= 52);
    ++depths[nesting_depth(s.text)];
  }
  int deep = 0;
  for (auto [d, c] : depths)
    if (d >= 2) deep += c;
  CHECK(deep > 1000);
  CHECK(depths.rbegin()->first >= 10);

  auto pair = gen_positive(2, {2, 2}, rng);
  CHECK(pair.length() == 2);
  CHECK(is_dyck(pair.text, 2));
  CHECK(gen_positive(2, {0, 0}, rng).text.empty());
  CHECK_THROWS_AS(gen_positive(2, {3, 3}, rng), InfeasibleWindow);
}

TEST_CASE("negative sampler") {
  Rng rng(12);
  for (int n = 0; n < 2000; ++n) {
    auto s = gen_negative(4, {2, 52}, rng);
    CHECK_FALSE(is_dyck(s.text, 4));
    CHECK_FALSE(s.positive);
    CHECK(s.length() >= 2);
    CHECK(s.length() <= 52);
  }
  CHECK_THROWS_AS(gen_negative(2, {3, 3}, rng), InfeasibleWindow);
  CHECK_THROWS_AS(gen_negative(2, {0, 0}, rng), InfeasibleWindow);
  // Only swaps of "()" fit a [2, 2] window for one pair type.
  CHECK(gen_negative(1, {2, 2}, rng).text == ")(");
}

TEST_CASE("perturbations") {
  Rng rng(13);
  for (int n = 0; n < 200; ++n) {
    auto m = perturb("([])", 2, Perturbation::kTypeMismatch, rng);
    CHECK(m.size() == 4);
    CHECK_FALSE(is_dyck(m, 2));
    CHECK(perturb("([]){}", 3, Perturbation::kSwap, rng).size() == 6);
    CHECK(perturb("([])", 2, Perturbation::kDeletion, rng).size() == 3);
    CHECK(perturb("([])", 2, Perturbation::kInsertion, rng).size() == 5);
  }
  CHECK(perturb("((((", 1, Perturbation::kSwap, rng) == "((((");
}

TEST_CASE("splits") {
  DyckConfig cfg = DyckConfig::standard(2, 5);
  for (auto& s : cfg.splits) s.size = s.size / 50 + 1;
  auto splits = build_splits(cfg);
  REQUIRE(splits.size() == 5);
  CHECK(splits[0].name == "train");
  CHECK(splits[4].name == "long1000");
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto& sp = splits[i];
    CHECK(sp.samples.size() == cfg.splits[i].size);
    long pos = 0;
    for (const auto& s : sp.samples) {
      CHECK(sp.window.contains(s.length()));
      CHECK(is_dyck(s.text, 2) == s.positive);
      pos += s.positive;
    }
    const long neg = static_cast<long>(sp.samples.size()) - pos;
    CHECK(std::abs(pos - neg) <= 1);
  }
  CHECK(build_splits(cfg)[2].samples[0].text == splits[2].samples[0].text);

  auto full = DyckConfig::standard(4, 1);
  CHECK(full.splits[0].size == 5000);
  CHECK(full.splits[1].window.lo == 21);
  CHECK(full.splits[2].window.hi == 120);
}

TEST_CASE("dataset files round-trip") {
  namespace fs = std::filesystem;
  DyckConfig cfg;
  cfg.k = 3;
  cfg.seed = 9;
  cfg.splits = {{"a", 11, {0, 8}}, {"b", 4, {10, 12}}};
  const auto dir = fs::temp_directory_path() / "nstm_dyck_test";
  fs::remove_all(dir);
  auto splits = build_splits(cfg);
  auto paths = write_splits(cfg, splits, dir.string());
  CHECK(paths.size() == 3);
  auto back = read_dataset((dir / "a.tsv").string());
  REQUIRE(back.size() == 11);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].text == splits[0].samples[i].text);
    CHECK(back[i].positive == splits[0].samples[i].positive);
  }
  std::ifstream meta(dir / "dataset.json");
  auto j = nlohmann::json::parse(meta);
  CHECK(j["sampler_version"] == kSamplerVersion);
  CHECK(j["files"]["a"]["positives"] == 6);

  // Same seed, byte-identical files.
  const auto dir2 = fs::temp_directory_path() / "nstm_dyck_test2";
  fs::remove_all(dir2);
  write_splits(cfg, build_splits(cfg), dir2.string());
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a.tsv") == slurp(dir2 / "a.tsv"));
  CHECK(slurp(dir / "b.tsv") == slurp(dir2 / "b.tsv"));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("dataset parsing") {
  auto s = parse_dataset("1\t()\n0\t)(\r\n\n1\t\n");
  REQUIRE(s.size() == 3);
  CHECK(s[1].text == ")(");
  CHECK(s[2].text.empty());
  CHECK_THROWS_AS(parse_dataset("2\t()\n"), DataFormatError);
  CHECK_THROWS_AS(parse_dataset("1 ()\n"), DataFormatError);
  CHECK_THROWS_AS(read_dataset("/nonexistent/file.tsv"), DataFormatError);
}
