#include "nstm/dyck.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"

namespace nstm {

std::string dyck_alphabet(int k) {
  if (k < 1 || k > kMaxBracketPairs)
    throw DomainError("bracket pair count must be in [1, 4], got " + std::to_string(k));
  return std::string(kBrackets.substr(0, 2 * static_cast<std::size_t>(k)));
}

int dyck_symbol(char c, int k) {
  const std::string a = dyck_alphabet(k);
  const auto pos = a.find(c);
  if (pos == std::string::npos)
    throw AlphabetError(std::string("'") + c + "' is not in " + a);
  return static_cast<int>(pos);
}

bool is_dyck(std::string_view s, int k) {
  std::vector<int> stack;
  bool ok = true;
  // Every symbol is checked against the alphabet even after a mismatch.
  for (char c : s) {
    const int x = dyck_symbol(c, k);
    if (!ok) continue;
    if (x % 2 == 0) {
      stack.push_back(x / 2);
    } else if (stack.empty() || stack.back() != x / 2) {
      ok = false;
    } else {
      stack.pop_back();
    }
  }
  return ok && stack.empty();
}

int nesting_depth(std::string_view s) {
  int depth = 0, best = 0;
  for (char c : s) {
    const auto pos = kBrackets.find(c);
    depth += pos % 2 == 0 ? 1 : -1;
    best = std::max(best, depth);
  }
  return best;
}

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::kSwap: return "swap";
    case Perturbation::kDeletion: return "deletion";
    case Perturbation::kInsertion: return "insertion";
    case Perturbation::kTypeMismatch: return "type-mismatch";
  }
  return "?";
}

namespace {

// Even lengths in [lo, hi], at least `min`, as an inclusive range.
std::optional<LengthWindow> even_lengths(std::size_t lo, std::size_t hi, std::size_t min) {
  lo = std::max(lo, min);
  if (lo % 2 == 1) ++lo;
  if (lo > hi) return std::nullopt;
  return LengthWindow{lo, hi - hi % 2};
}

std::string window_text(LengthWindow w) {
  return "[" + std::to_string(w.lo) + ", " + std::to_string(w.hi) + "]";
}

std::string balanced(int k, std::size_t n, Rng& rng) {
  const std::string a = dyck_alphabet(k);
  // Each sample gets its own opening bias so the set mixes shallow and
  // deeply nested strings.
  const double p_open = rng.uniform(0.4, 0.65);
  std::string out;
  out.reserve(n);
  std::vector<int> stack;
  std::size_t opens_left = n / 2;
  while (out.size() < n) {
    const bool open = stack.empty() || (opens_left > 0 && rng.chance(p_open));
    if (open) {
      const auto t = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      stack.push_back(t);
      out += a[2 * t];
      --opens_left;
    } else {
      out += a[2 * stack.back() + 1];
      stack.pop_back();
    }
  }
  return out;
}

Sample positive_of_length(int k, LengthWindow evens, Rng& rng) {
  const std::size_t count = (evens.hi - evens.lo) / 2 + 1;
  const std::size_t n = evens.lo + 2 * rng.below(count);
  return {balanced(k, n, rng), true};
}

// Lengths a positive source may have so the perturbed string lands in w.
std::optional<LengthWindow> source_lengths(Perturbation p, int k, LengthWindow w) {
  switch (p) {
    case Perturbation::kSwap:
      return even_lengths(w.lo, w.hi, 2);
    case Perturbation::kTypeMismatch:
      if (k < 2) return std::nullopt;
      return even_lengths(w.lo, w.hi, 2);
    case Perturbation::kDeletion:
      return even_lengths(w.lo + 1, w.hi + 1, 2);
    case Perturbation::kInsertion:
      if (w.hi < 1) return std::nullopt;
      return even_lengths(w.lo == 0 ? 0 : w.lo - 1, w.hi - 1, 0);
  }
  return std::nullopt;
}

}  // namespace

Sample gen_positive(int k, LengthWindow w, Rng& rng) {
  dyck_alphabet(k);
  const auto evens = even_lengths(w.lo, w.hi, 0);
  if (!evens) throw InfeasibleWindow("no even length in " + window_text(w));
  return positive_of_length(k, *evens, rng);
}

std::string perturb(std::string_view positive, int k, Perturbation p, Rng& rng) {
  const std::string a = dyck_alphabet(k);
  std::string s(positive);
  const std::size_t n = s.size();
  switch (p) {
    case Perturbation::kSwap: {
      if (std::adjacent_find(s.begin(), s.end(), std::not_equal_to<>()) == s.end()) break;
      std::size_t i, j;
      do {
        i = rng.below(n);
        j = rng.below(n);
      } while (s[i] == s[j]);
      std::swap(s[i], s[j]);
      break;
    }
    case Perturbation::kDeletion:
      if (n > 0) s.erase(rng.below(n), 1);
      break;
    case Perturbation::kInsertion:
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(n + 1)), a[rng.below(a.size())]);
      break;
    case Perturbation::kTypeMismatch: {
      std::vector<std::size_t> closers;
      for (std::size_t i = 0; i < n; ++i)
        if (dyck_symbol(s[i], k) % 2 == 1) closers.push_back(i);
      if (closers.empty() || k < 2) break;
      const std::size_t at = closers[rng.below(closers.size())];
      const int t = dyck_symbol(s[at], k) / 2;
      int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
      if (u >= t) ++u;
      s[at] = a[2 * u + 1];
      break;
    }
  }
  return s;
}

Sample gen_negative(int k, LengthWindow w, Rng& rng, const PerturbationMix& mix) {
  dyck_alphabet(k);
  if (!even_lengths(w.lo, w.hi, 0)) throw InfeasibleWindow("no even length in " + window_text(w));
  std::array<std::optional<LengthWindow>, 4> src;
  double total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (mix.weight[i] < 0) throw DomainError("perturbation weights must be non-negative");
    src[i] = source_lengths(static_cast<Perturbation>(i), k, w);
    if (src[i]) total += mix.weight[i];
  }
  if (total <= 0) throw InfeasibleWindow("no perturbation yields a length in " + window_text(w));

  constexpr int kAttempts = 10000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    double pick = rng.uniform(0, total);
    std::size_t which = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (!src[i] || mix.weight[i] <= 0) continue;
      which = i;
      if (pick < mix.weight[i]) break;
      pick -= mix.weight[i];
    }
    const Sample base = positive_of_length(k, *src[which], rng);
    std::string s = perturb(base.text, k, static_cast<Perturbation>(which), rng);
    if (w.contains(s.size()) && !is_dyck(s, k)) return {std::move(s), false};
  }
  throw InfeasibleWindow("could not draw a negative in " + window_text(w));
}

DyckConfig DyckConfig::standard(int k, std::uint64_t seed) {
  DyckConfig c;
  c.k = k;
  c.seed = seed;
  c.splits = {{"train", 5000, {2, 52}},
              {"val", 500, {21, 70}},
              {"test", 3000, {53, 120}},
              {"long500", 1000, {121, 500}},
              {"long1000", 1000, {501, 1000}}};
  return c;
}

void DyckConfig::validate() const {
  dyck_alphabet(k);
  for (const auto& s : splits) {
    if (s.name.empty()) throw DomainError("split without a name");
    if (s.window.lo > s.window.hi)
      throw DomainError("split " + s.name + " has empty window " + window_text(s.window));
  }
}

nlohmann::json DyckConfig::to_json() const {
  nlohmann::json j = {{"k", k}, {"seed", seed}};
  j["splits"] = nlohmann::json::array();
  for (const auto& s : splits)
    j["splits"].push_back({{"name", s.name},
                           {"size", s.size},
                           {"min_length", s.window.lo},
                           {"max_length", s.window.hi}});
  nlohmann::json m;
  for (std::size_t i = 0; i < 4; ++i) m[to_string(static_cast<Perturbation>(i))] = mix.weight[i];
  j["perturbation_mix"] = m;
  return j;
}

std::vector<Split> build_splits(const DyckConfig& cfg) {
  cfg.validate();
  std::vector<Split> out;
  for (std::size_t idx = 0; idx < cfg.splits.size(); ++idx) {
    const SplitConfig& sc = cfg.splits[idx];
    Rng rng(mix_seed(cfg.seed ^ mix_seed(idx + 1)));
    Split sp{sc.name, sc.window, {}};
    sp.samples.reserve(sc.size);
    const std::size_t positives = (sc.size + 1) / 2;
    for (std::size_t n = 0; n < positives; ++n)
      sp.samples.push_back(gen_positive(cfg.k, sc.window, rng));
    for (std::size_t n = positives; n < sc.size; ++n)
      sp.samples.push_back(gen_negative(cfg.k, sc.window, rng, cfg.mix));
    for (std::size_t n = sp.samples.size(); n > 1; --n)
      std::swap(sp.samples[n - 1], sp.samples[rng.below(n)]);
    out.push_back(std::move(sp));
  }
  return out;
}

std::vector<std::string> write_splits(const DyckConfig& cfg, const std::vector<Split>& splits,
                                      const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  nlohmann::json meta = cfg.to_json();
  meta["sampler_version"] = kSamplerVersion;
  meta["alphabet"] = dyck_alphabet(cfg.k);
  meta["files"] = nlohmann::json::object();
  for (const auto& sp : splits) {
    const std::string path = (fs::path(dir) / (sp.name + ".tsv")).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataFormatError("cannot write " + path);
    std::size_t pos = 0;
    for (const auto& s : sp.samples) {
      f << (s.positive ? '1' : '0') << '\t' << s.text << '\n';
      pos += s.positive;
    }
    meta["files"][sp.name] = {{"path", sp.name + ".tsv"},
                              {"samples", sp.samples.size()},
                              {"positives", pos}};
    paths.push_back(path);
  }
  const std::string mpath = (fs::path(dir) / "dataset.json").string();
  std::ofstream m(mpath, std::ios::binary);
  if (!m) throw DataFormatError("cannot write " + mpath);
  m << meta.dump(2) << '\n';
  paths.push_back(mpath);
  return paths;
}

std::vector<Sample> parse_dataset(std::string_view text, const std::string& origin) {
  std::vector<Sample> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.size() < 2 || (line[0] != '0' && line[0] != '1') || line[1] != '\t')
      throw DataFormatError(origin + ":" + std::to_string(line_no) +
                            ": expected '<0|1>\\t<string>'");
    out.push_back({std::string(line.substr(2)), line[0] == '1'});
  }
  return out;
}

std::vector<Sample> read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataFormatError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dataset(ss.str(), path);
}

}  // namespace nstm
