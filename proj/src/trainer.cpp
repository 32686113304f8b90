#include "nstm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nstm/errors.hpp"
#include "nstm/hash.hpp"
#include "nstm/random.hpp"

namespace nstm {

namespace {

double logistic(double H, double v) { return 1.0 / (1.0 + std::exp(-H * v)); }

std::string decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json decimals(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(decimal(x));
  return a;
}

std::vector<double> parse_decimals(const nlohmann::json& a, std::size_t expect,
                                   const std::string& what) {
  if (!a.is_array() || a.size() != expect)
    throw DataFormatError(what + " must be an array of " + std::to_string(expect) + " values");
  std::vector<double> out;
  out.reserve(expect);
  for (const auto& e : a) {
    if (e.is_number()) {
      out.push_back(e.get<double>());
    } else if (e.is_string()) {
      try {
        std::size_t used = 0;
        const std::string s = e.get<std::string>();
        out.push_back(std::stod(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw DataFormatError(what + " holds a malformed number");
      }
    } else {
      throw DataFormatError(what + " holds a non-numeric entry");
    }
  }
  return out;
}

// Quantities of one step shared by the forward pass and the RTRL update.
struct StepTerms {
  std::vector<double> Ms, Ma;  // N x N effective weights for this (r, x)
  std::vector<double> s, a, z;
  std::vector<double> ds, da, dz;  // logistic derivatives
};

StepTerms step_terms(const TrainableNstm& m, const std::vector<double>& z,
                     const std::vector<double>& x, const std::vector<double>& r) {
  const std::size_t N = m.N, R = m.R, X = m.X;
  if (z.size() != N) throw DimMismatch("state has " + std::to_string(z.size()) + " entries, model has N = " + std::to_string(N));
  if (x.size() != X) throw DimMismatch("input has " + std::to_string(x.size()) + " channels, model has X = " + std::to_string(X));
  if (!r.empty() && r.size() != R) throw DimMismatch("read vector width differs from R");
  StepTerms t;
  t.Ms.assign(N * N, 0.0);
  t.Ma.assign(N * N, 0.0);
  for (std::size_t rr = 0; rr < R; ++rr) {
    const double rv = r.empty() ? 1.0 : r[rr];
    if (rv == 0.0) continue;
    for (std::size_t xx = 0; xx < X; ++xx) {
      const double w = rv * x[xx];
      if (w == 0.0) continue;
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const std::size_t at = m.w_index(i, j, rr, xx);
          t.Ms[i * N + j] += m.Ws[at] * w;
          t.Ma[i * N + j] += m.Wa[at] * w;
        }
    }
  }
  t.s.resize(N);
  t.a.resize(N);
  t.z.resize(N);
  t.ds.resize(N);
  t.da.resize(N);
  t.dz.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    double vs = m.bs[i], va = m.ba[i];
    for (std::size_t j = 0; j < N; ++j) {
      vs += t.Ms[i * N + j] * z[j];
      va += t.Ma[i * N + j] * z[j];
    }
    t.s[i] = logistic(m.H, vs);
    t.a[i] = logistic(m.H, va);
    t.z[i] = logistic(m.H, t.s[i] * t.a[i] + m.bz[i]);
    t.ds[i] = m.H * t.s[i] * (1 - t.s[i]);
    t.da[i] = m.H * t.a[i] * (1 - t.a[i]);
    t.dz[i] = m.H * t.z[i] * (1 - t.z[i]);
  }
  return t;
}

void add_scaled(TrainableNstm& m, double scale, const std::vector<double>& g) {
  const std::size_t wc = m.weight_count(), N = m.N;
  for (std::size_t p = 0; p < wc; ++p) {
    m.Ws[p] += scale * g[p];
    m.Wa[p] += scale * g[wc + p];
  }
  for (std::size_t i = 0; i < N; ++i) {
    m.bs[i] += scale * g[2 * wc + i];
    m.ba[i] += scale * g[2 * wc + N + i];
    m.bz[i] += scale * g[2 * wc + 2 * N + i];
  }
}

std::vector<std::vector<std::size_t>> encode_all(const std::vector<Sample>& data, int k) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(encode_string(s.text, k));
  return out;
}

}  // namespace

TrainableNstm TrainableNstm::zeros(std::size_t N, std::size_t R, std::size_t X, double H) {
  if (N < 1 || R < 1 || X < 1) throw DimMismatch("model dimensions must be at least 1");
  TrainableNstm m;
  m.N = N;
  m.R = R;
  m.X = X;
  m.H = H;
  m.Ws.assign(m.weight_count(), 0.0);
  m.Wa.assign(m.weight_count(), 0.0);
  m.bs.assign(N, 0.0);
  m.ba.assign(N, 0.0);
  m.bz.assign(N, 0.0);
  return m;
}

TrainableNstm TrainableNstm::random(std::size_t N, std::size_t R, std::size_t X,
                                    std::uint64_t seed, double scale, double H) {
  TrainableNstm m = zeros(N, R, X, H);
  Rng rng(mix_seed(seed));
  std::vector<double> theta(m.num_params());
  for (double& v : theta) v = rng.uniform(-scale, scale);
  m.set_flat(theta);
  return m;
}

std::vector<double> TrainableNstm::flat() const {
  std::vector<double> t;
  t.reserve(num_params());
  for (const auto* v : {&Ws, &Wa, &bs, &ba, &bz}) t.insert(t.end(), v->begin(), v->end());
  return t;
}

void TrainableNstm::set_flat(const std::vector<double>& theta) {
  if (theta.size() != num_params())
    throw DimMismatch("parameter vector has " + std::to_string(theta.size()) + " entries, expected " +
                      std::to_string(num_params()));
  auto it = theta.begin();
  for (auto* v : {&Ws, &Wa, &bs, &ba, &bz}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
}

void TrainableNstm::validate() const {
  if (N < 1 || R < 1 || X < 1) throw DimMismatch("model dimensions must be at least 1");
  if (Ws.size() != weight_count() || Wa.size() != weight_count() || bs.size() != N ||
      ba.size() != N || bz.size() != N)
    throw DimMismatch("parameter tensors do not match (N, R, X)");
  if (!std::isfinite(H) || H <= 0) throw DomainError("H must be positive and finite");
  for (double v : flat())
    if (!std::isfinite(v)) throw DomainError("model has a non-finite parameter");
}

nlohmann::json TrainableNstm::to_json() const {
  return {{"N", N}, {"R", R}, {"X", X}, {"H", decimal(H)},
          {"Ws", decimals(Ws)}, {"Wa", decimals(Wa)},
          {"bs", decimals(bs)}, {"ba", decimals(ba)}, {"bz", decimals(bz)}};
}

TrainableNstm TrainableNstm::from_json(const nlohmann::json& j) {
  try {
    const double H = parse_decimals(nlohmann::json::array({j.at("H")}), 1, "H")[0];
    TrainableNstm m = zeros(j.at("N").get<std::size_t>(), j.at("R").get<std::size_t>(),
                            j.at("X").get<std::size_t>(), H);
    m.Ws = parse_decimals(j.at("Ws"), m.weight_count(), "Ws");
    m.Wa = parse_decimals(j.at("Wa"), m.weight_count(), "Wa");
    m.bs = parse_decimals(j.at("bs"), m.N, "bs");
    m.ba = parse_decimals(j.at("ba"), m.N, "ba");
    m.bz = parse_decimals(j.at("bz"), m.N, "bz");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("model: ") + e.what());
  }
}

StepResult forward_step(const TrainableNstm& m, const std::vector<double>& z,
                        const std::vector<double>& x, const std::vector<double>& r) {
  StepTerms t = step_terms(m, z, x, r);
  return {std::move(t.s), std::move(t.a), std::move(t.z)};
}

std::vector<double> one_hot(std::size_t width, std::size_t channel) {
  if (channel >= width) throw DimMismatch("channel outside the one-hot width");
  std::vector<double> v(width, 0.0);
  v[channel] = 1.0;
  return v;
}

std::vector<std::size_t> encode_string(const std::string& text, int k) {
  std::vector<std::size_t> out;
  out.reserve(text.size() + 1);
  try {
    for (char c : text) out.push_back(static_cast<std::size_t>(dyck_symbol(c, k)));
  } catch (const AlphabetError& e) {
    throw DataFormatError(e.what());
  }
  out.push_back(2 * static_cast<std::size_t>(k));
  return out;
}

RtrlState rtrl_begin(const TrainableNstm& m) {
  RtrlState st;
  st.z = m.initial_state();
  st.sens.assign(m.N * m.num_params(), 0.0);
  return st;
}

std::optional<std::vector<double>> rtrl_step(const TrainableNstm& m, RtrlState& st,
                                             const std::vector<double>& x,
                                             std::optional<double> target) {
  const std::size_t N = m.N, R = m.R, X = m.X, P = m.num_params(), wc = m.weight_count();
  if (st.z.size() != N || st.sens.size() != N * P)
    throw DimMismatch("RTRL state does not match the model");
  const StepTerms t = step_terms(m, st.z, x, {});

  // Propagated part: J * sens with J = dz'/dz.
  std::vector<double> next(N * P, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double gs = t.dz[i] * t.a[i] * t.ds[i];
    const double ga = t.dz[i] * t.s[i] * t.da[i];
    double* out = &next[i * P];
    for (std::size_t j = 0; j < N; ++j) {
      const double J = gs * t.Ms[i * N + j] + ga * t.Ma[i * N + j];
      if (J == 0.0) continue;
      const double* in = &st.sens[j * P];
      for (std::size_t p = 0; p < P; ++p) out[p] += J * in[p];
    }
    // Explicit part: parameters of row i only touch neuron i.
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t xx = 0; xx < X; ++xx) {
          const double w = st.z[j] * x[xx];
          if (w == 0.0) continue;
          const std::size_t at = m.w_index(i, j, r, xx);
          out[at] += gs * w;
          out[wc + at] += ga * w;
        }
    out[2 * wc + i] += gs;
    out[2 * wc + N + i] += ga;
    out[2 * wc + 2 * N + i] += t.dz[i];
  }
  st.sens = std::move(next);
  st.z = t.z;
  ++st.steps;
  if (!target) return std::nullopt;
  const double err = st.z[0] - *target;
  st.loss = err * err;
  std::vector<double> g(P);
  for (std::size_t p = 0; p < P; ++p) g[p] = 2 * err * st.sens[p];
  return g;
}

SequenceGradient sequence_gradient(const TrainableNstm& m,
                                   const std::vector<std::vector<double>>& xs, double target) {
  SequenceGradient out;
  if (xs.empty()) {
    out.grad.assign(m.num_params(), 0.0);
    return out;
  }
  RtrlState st = rtrl_begin(m);
  for (std::size_t t = 0; t + 1 < xs.size(); ++t) rtrl_step(m, st, xs[t]);
  out.grad = *rtrl_step(m, st, xs.back(), target);
  out.output = st.z[0];
  out.loss = st.loss;
  return out;
}

SequenceGradient sequence_gradient(const TrainableNstm& m,
                                   const std::vector<std::size_t>& channels, double target) {
  std::vector<std::vector<double>> xs;
  xs.reserve(channels.size());
  for (auto c : channels) xs.push_back(one_hot(m.X, c));
  return sequence_gradient(m, xs, target);
}

double sequence_output(const TrainableNstm& m, const std::vector<std::size_t>& channels) {
  std::vector<double> z = m.initial_state();
  for (auto c : channels) z = step_terms(m, z, one_hot(m.X, c), {}).z;
  return z[0];
}

void TrainConfig::validate() const {
  dyck_alphabet(k);
  if (N < 1) throw DomainError("N must be at least 1");
  if (epochs < 1) throw DomainError("epochs must be at least 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw DomainError("learning rate must be finite and >= 0");
  if (!(H > 0)) throw DomainError("H must be positive");
  if (halve_after < 1 || stop_after < 1) throw DomainError("patience must be at least 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"k", k}, {"N", N}, {"H", H}, {"epochs", epochs}, {"lr", lr},
          {"halve_after", halve_after}, {"stop_after", stop_after},
          {"init_scale", init_scale}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.k = j.value("k", c.k);
    c.N = j.value("N", c.N);
    c.H = j.value("H", c.H);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.halve_after = j.value("halve_after", c.halve_after);
    c.stop_after = j.value("stop_after", c.stop_after);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainResult train(const TrainConfig& cfg, TrainableNstm model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (model.X != 2 * static_cast<std::size_t>(cfg.k) + 1)
    throw DimMismatch("model input width must be 2k + 1");
  if (train_set.empty()) throw DataFormatError("training set is empty");
  if (val_set.empty()) throw DataFormatError("validation set is empty");
  const auto train_in = encode_all(train_set, cfg.k);
  encode_all(val_set, cfg.k);

  Rng rng(mix_seed(cfg.seed ^ 0x7472616e));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;

  TrainResult res;
  res.best = model;
  double lr = cfg.lr;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t n = order.size(); n > 1; --n) std::swap(order[n - 1], order[rng.below(n)]);
    double loss = 0;
    std::size_t correct = 0;
    for (std::size_t idx : order) {
      const double y = train_set[idx].positive ? 1.0 : 0.0;
      const SequenceGradient g = sequence_gradient(model, train_in[idx], y);
      loss += g.loss;
      correct += (g.output >= 0.5) == train_set[idx].positive;
      if (lr != 0) add_scaled(model, -lr, g.grad);
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    em.loss = loss / static_cast<double>(order.size());
    em.val_acc = evaluate(model, val_set, cfg.k).accuracy;
    em.lr = lr;
    res.history.push_back(em);
    if (on_epoch) on_epoch(em);

    if (epoch == 1 || em.val_acc > res.best_val) {
      res.best = model;
      res.best_val = em.val_acc;
      res.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.stop_after) {
        res.stopped_early = true;
        break;
      }
      if (since_best % cfg.halve_after == 0) lr /= 2;
    }
  }
  res.last = std::move(model);
  return res;
}

nlohmann::json Evaluation::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& x : by_length)
    b.push_back({{"min_length", x.lo}, {"max_length", x.hi}, {"count", x.count},
                 {"accuracy", x.count ? static_cast<double>(x.correct) / static_cast<double>(x.count) : 0.0}});
  return {{"count", count}, {"correct", correct}, {"accuracy", accuracy}, {"by_length", b}};
}

Evaluation evaluate(const TrainableNstm& m, const std::vector<Sample>& data, int k) {
  if (data.empty()) throw DataFormatError("dataset is empty");
  if (m.X != 2 * static_cast<std::size_t>(k) + 1)
    throw DimMismatch("model input width must be 2k + 1");
  Evaluation ev;
  std::size_t lo = data[0].length(), hi = lo;
  for (const auto& s : data) {
    lo = std::min(lo, s.length());
    hi = std::max(hi, s.length());
  }
  const std::size_t width = (hi - lo + 10) / 10;
  for (std::size_t b = 0; lo + b * width <= hi && b < 10; ++b)
    ev.by_length.push_back({lo + b * width, std::min(hi, lo + (b + 1) * width - 1), 0, 0});
  for (const auto& s : data) {
    const bool ok = (sequence_output(m, encode_string(s.text, k)) >= 0.5) == s.positive;
    LengthBucket& b = ev.by_length[(s.length() - lo) / width];
    ++b.count;
    ++ev.count;
    b.correct += ok;
    ev.correct += ok;
  }
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.count);
  return ev;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::ostringstream o;
  o << "epoch,train_acc,val_acc,loss,lr\n";
  for (const auto& e : history)
    o << e.epoch << ',' << decimal(e.train_acc) << ',' << decimal(e.val_acc) << ','
      << decimal(e.loss) << ',' << decimal(e.lr) << '\n';
  return o.str();
}

nlohmann::json checkpoint_json(const TrainableNstm& m, const TrainConfig& cfg) {
  return {{"format", "nstm-rnn-v1"}, {"seed", cfg.seed}, {"config", cfg.to_json()},
          {"model", m.to_json()}};
}

TrainableNstm load_checkpoint(const nlohmann::json& j, TrainConfig* cfg) {
  if (!j.is_object() || j.value("format", "") != "nstm-rnn-v1")
    throw DataFormatError("not an nstm-rnn-v1 checkpoint");
  if (cfg) *cfg = TrainConfig::from_json(j.at("config"));
  if (!j.contains("model")) throw DataFormatError("checkpoint has no model");
  return TrainableNstm::from_json(j.at("model"));
}

}  // namespace nstm
