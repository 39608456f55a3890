#include "propattest/model/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "propattest/common/error.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::model {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Numerically stable BCE with logits.
double bce_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

struct Workspace {
  // Post-activation outputs per layer; acts[0] is the input.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas;
};

void forward(const MlpModel& m, std::span<const double> x, Workspace& ws) {
  const auto& layers = m.layers();
  ws.acts.resize(layers.size() + 1);
  ws.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    auto& out = ws.acts[l + 1];
    out.assign(L.out, 0.0);
    const auto& in = ws.acts[l];
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = L.bias[o];
      const double* wr = L.weights.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) s += wr[i] * in[i];
      out[o] = (l + 1 < layers.size()) ? std::max(s, 0.0) : s;
    }
  }
}

// Accumulates parameter gradients of BCE for one sample into grads.
void backward(const MlpModel& m, double y, Workspace& ws, std::vector<DenseLayer>& grads, std::size_t first_layer) {
  const auto& layers = m.layers();
  const std::size_t nl = layers.size();
  ws.deltas.resize(nl);
  double z = ws.acts[nl][0];
  ws.deltas[nl - 1].assign(1, sigmoid(z) - y);
  for (std::size_t l = nl; l-- > 0;) {
    const auto& L = layers[l];
    const auto& delta = ws.deltas[l];
    const auto& in = ws.acts[l];
    if (l >= first_layer) {
      auto& G = grads[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        G.bias[o] += delta[o];
        double* gr = G.weights.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) gr[i] += delta[o] * in[i];
      }
    }
    if (l <= first_layer) break;
    auto& prev = ws.deltas[l - 1];
    prev.assign(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* wr = L.weights.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) prev[i] += wr[i] * delta[o];
    }
    for (std::size_t i = 0; i < L.in; ++i) {
      if (in[i] <= 0.0) prev[i] = 0.0;
    }
  }
}

std::vector<DenseLayer> zero_like(const MlpModel& m) {
  std::vector<DenseLayer> g;
  for (const auto& L : m.layers()) g.push_back({L.in, L.out, std::vector<double>(L.weights.size()), std::vector<double>(L.out)});
  return g;
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw InvalidArgument("model needs at least an input and an output size");
  if (dims_.back() != 1) throw InvalidArgument("model output size must be 1");
  for (auto v : dims_) {
    if (v == 0) throw InvalidArgument("layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({dims_[l], dims_[l + 1], std::vector<double>(dims_[l] * dims_[l + 1]), std::vector<double>(dims_[l + 1])});
  }
}

MlpModel MlpModel::initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  MlpModel m(std::move(layer_dims));
  Prng rng(seed);
  for (auto& L : m.layers_) {
    double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& w : L.weights) w = u(rng);
  }
  return m;
}

double MlpModel::logit(std::span<const double> x) const {
  if (x.size() != input_dim()) throw ShapeMismatch("predict: input has dimension " + std::to_string(x.size()) +
                                                   ", model expects " + std::to_string(input_dim()));
  Workspace ws;
  forward(*this, x, ws);
  return ws.acts.back()[0];
}

bool MlpModel::all_finite() const {
  for (const auto& L : layers_) {
    for (double v : L.weights) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : L.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Bytes MlpModel::serialize() const {
  ByteWriter w;
  w.magic("MLP1");
  w.u32(static_cast<std::uint32_t>(dims_.size()));
  for (auto v : dims_) w.u32(static_cast<std::uint32_t>(v));
  for (const auto& L : layers_) {
    w.f64s(L.weights);
    w.f64s(L.bias);
  }
  return std::move(w).take();
}

MlpModel MlpModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("MLP1");
  std::vector<std::size_t> dims(r.u32());
  for (auto& v : dims) v = r.u32();
  MlpModel m(std::move(dims));
  for (auto& L : m.layers_) {
    L.weights = r.f64s(L.weights.size());
    L.bias = r.f64s(L.bias.size());
  }
  r.expect_done();
  return m;
}

double predict(const MlpModel& m, std::span<const double> x) { return sigmoid(m.logit(x)); }

double accuracy(const MlpModel& m, const data::LabeledDataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    bool pos = m.logit(ds.row(i)) >= 0.0;
    correct += (pos == (ds.labels()[i] == 1)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double mean_loss(const MlpModel& m, const data::LabeledDataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) total += bce_logit(m.logit(ds.row(i)), ds.labels()[i]);
  return total / static_cast<double>(ds.size());
}

TrainResult train_mlp(const data::LabeledDataset& ds, std::vector<std::size_t> dims, const TrainParams& hp,
                      std::uint64_t seed) {
  if (dims.empty() || dims.front() != ds.dim()) {
    throw ShapeMismatch("train_mlp: first layer size must equal dataset dimension");
  }
  return continue_training(ds, MlpModel::initialize(std::move(dims), derive_seed(seed, "init")), hp, seed, false);
}

TrainResult continue_training(const data::LabeledDataset& ds, MlpModel model, const TrainParams& hp,
                              std::uint64_t seed, bool freeze_first) {
  if (ds.size() == 0) throw InvalidArgument("training on an empty dataset");
  if (model.input_dim() != ds.dim()) throw ShapeMismatch("model input size does not match dataset");
  if (hp.batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (freeze_first && model.layers().size() < 2) throw InvalidArgument("cannot freeze the only layer");

  const std::size_t first_trainable = freeze_first ? 1 : 0;
  TrainResult result;
  result.epoch_losses.push_back(mean_loss(model, ds));

  Prng order_rng(derive_seed(seed, "batches"));
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Workspace ws;
  auto grads = zero_like(model);

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      std::size_t end = std::min(order.size(), start + hp.batch_size);
      for (auto& G : grads) {
        std::fill(G.weights.begin(), G.weights.end(), 0.0);
        std::fill(G.bias.begin(), G.bias.end(), 0.0);
      }
      for (std::size_t k = start; k < end; ++k) {
        std::size_t i = order[k];
        forward(model, ds.row(i), ws);
        backward(model, ds.labels()[i], ws, grads, first_trainable);
      }
      const double step = hp.learning_rate / static_cast<double>(end - start);
      for (std::size_t l = first_trainable; l < model.layers().size(); ++l) {
        auto& L = model.layers()[l];
        for (std::size_t j = 0; j < L.weights.size(); ++j) L.weights[j] -= step * grads[l].weights[j];
        for (std::size_t j = 0; j < L.bias.size(); ++j) L.bias[j] -= step * grads[l].bias[j];
      }
    }
    double loss = mean_loss(model, ds);
    if (!std::isfinite(loss) || !model.all_finite()) throw TrainingFailure("training diverged", epoch);
    if (loss > result.epoch_losses.back() + 1e-6) result.loss_monotone = false;
    result.epoch_losses.push_back(loss);
  }
  result.train_accuracy = accuracy(model, ds);
  result.model = std::move(model);
  return result;
}

FirstLayerFeature FirstLayerFeature::canonical() const {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto ra = row(a), rb = row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  FirstLayerFeature out{rows, cols, {}};
  out.values.reserve(values.size());
  for (auto i : idx) {
    auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

FirstLayerFeature extract_first_layer(const MlpModel& m) {
  if (m.layers().size() < 2) throw InvalidArgument("extract_first_layer: model has no hidden layer");
  const auto& L = m.layers().front();
  FirstLayerFeature f{L.out, L.in + 1, {}};
  f.values.reserve(f.rows * f.cols);
  for (std::size_t o = 0; o < L.out; ++o) {
    for (std::size_t i = 0; i < L.in; ++i) f.values.push_back(L.w(o, i));
    f.values.push_back(L.bias[o]);
  }
  return f;
}

void install_first_layer(MlpModel& m, const FirstLayerFeature& f) {
  auto& L = m.layers().front();
  if (f.rows != L.out || f.cols != L.in + 1) throw ShapeMismatch("first-layer feature shape does not match model");
  for (std::size_t o = 0; o < L.out; ++o) {
    for (std::size_t i = 0; i < L.in; ++i) L.w(o, i) = f.values[o * f.cols + i];
    L.bias[o] = f.values[o * f.cols + L.in];
  }
}

}  // namespace propattest::model
