#pragma once

// Dyck-language samples, the stack oracle, and the dataset splits used to
// train the recurrent model.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nstm/random.hpp"

namespace nstm {

inline constexpr std::string_view kBrackets = "()[]{}<>";
inline constexpr int kMaxBracketPairs = 4;
inline constexpr const char* kSamplerVersion = "dyck-sampler-v1";

// First 2k characters of ()[]{}<>. Throws DomainError unless 1 <= k <= 4.
std::string dyck_alphabet(int k);

// Position of c in dyck_alphabet(k): opener of pair t is 2t, closer 2t + 1.
// Throws AlphabetError for anything else.
int dyck_symbol(char c, int k);

bool is_dyck(std::string_view s, int k);

// Deepest nesting reached while reading s. Assumes s is over the alphabet.
int nesting_depth(std::string_view s);

struct LengthWindow {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool contains(std::size_t n) const { return n >= lo && n <= hi; }
};

struct Sample {
  std::string text;
  bool positive = false;
  std::size_t length() const { return text.size(); }
};

enum class Perturbation { kSwap, kDeletion, kInsertion, kTypeMismatch };
std::string to_string(Perturbation p);

// Relative weights of the four perturbations used to make negatives.
struct PerturbationMix {
  std::array<double, 4> weight{1.0, 1.0, 1.0, 1.0};
};

// Throws InfeasibleWindow when the window has no even length.
Sample gen_positive(int k, LengthWindow w, Rng& rng);

Sample gen_negative(int k, LengthWindow w, Rng& rng, const PerturbationMix& mix = {});

// Applies one perturbation to a balanced string. The result may still be
// balanced (swapping two equal symbols, say); callers re-check it.
std::string perturb(std::string_view positive, int k, Perturbation p, Rng& rng);

struct SplitConfig {
  std::string name;
  std::size_t size = 0;
  LengthWindow window;
};

struct DyckConfig {
  int k = 2;
  std::uint64_t seed = 1;
  std::vector<SplitConfig> splits;
  PerturbationMix mix;

  // train/val/test/long500/long1000 with 5000/500/3000/1000/1000 samples.
  static DyckConfig standard(int k, std::uint64_t seed);
  void validate() const;
  nlohmann::json to_json() const;
};

struct Split {
  std::string name;
  LengthWindow window;
  std::vector<Sample> samples;
};

// Half the samples of each split are positive (the odd one out, if any, is
// positive), shuffled. Each split draws from its own seed stream.
std::vector<Split> build_splits(const DyckConfig& cfg);

// Writes <dir>/<name>.tsv per split and <dir>/dataset.json, returning the
// written paths.
std::vector<std::string> write_splits(const DyckConfig& cfg, const std::vector<Split>& splits,
                                      const std::string& dir);

// `<0|1>\t<string>` lines. Throws DataFormatError on malformed lines.
std::vector<Sample> read_dataset(const std::string& path);
std::vector<Sample> parse_dataset(std::string_view text, const std::string& origin = "<input>");

}  // namespace nstm
