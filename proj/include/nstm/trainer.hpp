#pragma once

// Trainable second-order recurrent model with real-time recurrent learning.
//
//   s_i = h(sum_{j,r,x} Ws[i,j,r,x] z_j r_r x_x + bs_i)
//   a_i = h(sum_{j,r,x} Wa[i,j,r,x] z_j r_r x_x + ba_i)
//   z'_i = h(s_i a_i + bz_i)
//
// with h the logistic at scale H. Neuron 0 is the acceptance neuron.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nstm/dyck.hpp"

namespace nstm {

struct TrainableNstm {
  std::size_t N = 8;
  std::size_t R = 1;
  std::size_t X = 5;
  double H = 1.0;
  // Row-major over (i, j, r, x).
  std::vector<double> Ws, Wa;
  std::vector<double> bs, ba, bz;

  static TrainableNstm zeros(std::size_t N, std::size_t R, std::size_t X, double H = 1.0);
  // Every parameter uniform in [-scale, scale].
  static TrainableNstm random(std::size_t N, std::size_t R, std::size_t X, std::uint64_t seed,
                              double scale = 0.5, double H = 1.0);

  std::size_t weight_count() const { return N * N * R * X; }
  // Flat order: Ws, Wa, bs, ba, bz.
  std::size_t num_params() const { return 2 * weight_count() + 3 * N; }
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& theta);
  std::size_t w_index(std::size_t i, std::size_t j, std::size_t r, std::size_t x) const {
    return ((i * N + j) * R + r) * X + x;
  }

  // Every neuron starts at 1/2.
  std::vector<double> initial_state() const { return std::vector<double>(N, 0.5); }
  // Throws DimMismatch or DomainError (non-finite parameters).
  void validate() const;

  nlohmann::json to_json() const;
  static TrainableNstm from_json(const nlohmann::json& j);
};

struct StepResult {
  std::vector<double> s, a, z;
};

// r defaults to the constant read vector of ones.
StepResult forward_step(const TrainableNstm& m, const std::vector<double>& z,
                        const std::vector<double>& x, const std::vector<double>& r = {});

// One-hot input rows.
std::vector<double> one_hot(std::size_t width, std::size_t channel);

// Dyck string as input channels followed by the end-of-string marker 2k.
// Throws DataFormatError for symbols outside the k-pair alphabet.
std::vector<std::size_t> encode_string(const std::string& text, int k);

struct RtrlState {
  std::vector<double> z;
  // Row-major N x P: d z_n / d theta_p.
  std::vector<double> sens;
  double loss = 0.0;
  std::size_t steps = 0;
};

RtrlState rtrl_begin(const TrainableNstm& m);

// Advances z and its sensitivities by one input. With a target, returns
// d/dtheta of (z_0 - target)^2 at the new state and records the loss.
std::optional<std::vector<double>> rtrl_step(const TrainableNstm& m, RtrlState& st,
                                             const std::vector<double>& x,
                                             std::optional<double> target = std::nullopt);

struct SequenceGradient {
  double output = 0.5;
  double loss = 0.0;
  std::vector<double> grad;
};

// Loss at the last step only. An empty sequence has zero loss and gradient.
SequenceGradient sequence_gradient(const TrainableNstm& m,
                                   const std::vector<std::vector<double>>& xs, double target);
SequenceGradient sequence_gradient(const TrainableNstm& m,
                                   const std::vector<std::size_t>& channels, double target);

// Acceptance-neuron value after the whole sequence.
double sequence_output(const TrainableNstm& m, const std::vector<std::size_t>& channels);

struct TrainConfig {
  int k = 2;
  std::size_t N = 8;
  double H = 1.0;
  std::size_t epochs = 400;
  double lr = 1e-2;
  std::size_t halve_after = 10;  // epochs without val improvement
  std::size_t stop_after = 30;
  double init_scale = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochMetrics {
  std::size_t epoch = 0;
  // Online accuracy and mean loss over the epoch, measured before each update.
  double train_acc = 0.0;
  double loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  TrainableNstm best;  // highest validation accuracy seen
  TrainableNstm last;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Per-sequence SGD on the squared error of the acceptance neuron.
TrainResult train(const TrainConfig& cfg, TrainableNstm model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const EpochCallback& on_epoch = {});

struct LengthBucket {
  std::size_t lo = 0, hi = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
};

struct Evaluation {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  // Ten equal-width length ranges spanning the dataset's lengths.
  std::vector<LengthBucket> by_length;

  nlohmann::json to_json() const;
};

// Throws DataFormatError on an empty dataset or foreign symbols.
Evaluation evaluate(const TrainableNstm& m, const std::vector<Sample>& data, int k);

std::string metrics_csv(const std::vector<EpochMetrics>& history);

nlohmann::json checkpoint_json(const TrainableNstm& m, const TrainConfig& cfg);
// Returns the model and fills cfg when given.
TrainableNstm load_checkpoint(const nlohmann::json& j, TrainConfig* cfg = nullptr);

}  // namespace nstm
