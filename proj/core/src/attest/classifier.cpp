#include "propattest/attest/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "propattest/attest/roc.hpp"
#include "propattest/common/error.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::attest {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

DenseLayer make_layer(std::size_t in, std::size_t out, Prng& rng) {
  DenseLayer L{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
  double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& w : L.weights) w = u(rng);
  return L;
}

// acts[0] = input, acts[l+1] = output of layer l (after ReLU unless it is the
// last layer and relu_last is false).
void run_layers(const std::vector<DenseLayer>& layers, std::span<const double> x, bool relu_last,
                std::vector<std::vector<double>>& acts) {
  acts.resize(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    auto& out = acts[l + 1];
    out.assign(L.out, 0.0);
    const auto& in = acts[l];
    bool relu = relu_last || l + 1 < layers.size();
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = L.bias[o];
      const double* wr = L.weights.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) s += wr[i] * in[i];
      out[o] = relu ? std::max(s, 0.0) : s;
    }
  }
}

// Backpropagates d(out) through cached activations; accumulates parameter
// gradients (when grads is non-null) and returns d(input).
std::vector<double> back_layers(const std::vector<DenseLayer>& layers, const std::vector<std::vector<double>>& acts,
                                std::vector<double> delta, bool relu_last, std::vector<DenseLayer>* grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& L = layers[l];
    bool relu = relu_last || l + 1 < layers.size();
    if (relu) {
      for (std::size_t o = 0; o < L.out; ++o) {
        if (acts[l + 1][o] <= 0.0) delta[o] = 0.0;
      }
    }
    if (grads) {
      auto& G = (*grads)[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        G.bias[o] += delta[o];
        double* gr = G.weights.data() + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) gr[i] += delta[o] * acts[l][i];
      }
    }
    std::vector<double> prev(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* wr = L.weights.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) prev[i] += wr[i] * delta[o];
    }
    delta = std::move(prev);
  }
  return delta;
}

struct Forward {
  std::vector<std::vector<std::vector<double>>> row_acts;
  std::vector<double> pooled;
  std::vector<std::vector<double>> head_acts;
  double logit = 0.0;
};

void zero(std::vector<DenseLayer>& g) {
  for (auto& L : g) {
    std::fill(L.weights.begin(), L.weights.end(), 0.0);
    std::fill(L.bias.begin(), L.bias.end(), 0.0);
  }
}

struct Adam {
  std::vector<DenseLayer> m, v;
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  explicit Adam(const std::vector<DenseLayer>& shape) : m(shape), v(shape) {
    zero(m);
    zero(v);
  }

  void step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads, double lr, std::size_t tick) {
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(tick));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(tick));
    auto upd = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& mm,
                   std::vector<double>& vv) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        mm[i] = kBeta1 * mm[i] + (1 - kBeta1) * g[i];
        vv[i] = kBeta2 * vv[i] + (1 - kBeta2) * g[i] * g[i];
        p[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + kEps);
      }
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
      upd(params[l].weights, grads[l].weights, m[l].weights, v[l].weights);
      upd(params[l].bias, grads[l].bias, m[l].bias, v[l].bias);
    }
  }
};

}  // namespace

std::vector<LabeledFeature> label_corpus(const model::ShadowCorpus& corpus, const data::PropertySpec& spec) {
  std::vector<LabeledFeature> out;
  out.reserve(corpus.entries.size());
  for (const auto& e : corpus.entries) out.push_back({e.feature, data::in_window(spec, corpus.grid.at(e.grid_index))});
  return out;
}

Normalizer Normalizer::fit(const std::vector<LabeledFeature>& set) {
  if (set.empty()) throw InvalidArgument("cannot fit normalization on an empty set");
  std::size_t cols = set.front().feature.cols;
  Normalizer n{std::vector<double>(cols, INFINITY), std::vector<double>(cols, -INFINITY)};
  for (const auto& lf : set) {
    if (lf.feature.cols != cols) throw ShapeMismatch("features differ in row length");
    for (std::size_t r = 0; r < lf.feature.rows; ++r) {
      auto row = lf.feature.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        n.min[c] = std::min(n.min[c], row[c]);
        n.range[c] = std::max(n.range[c], row[c]);
      }
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    double span = n.range[c] - n.min[c];
    n.range[c] = (std::isfinite(span) && span > 0.0) ? span : 1.0;
    if (!std::isfinite(n.min[c])) n.min[c] = 0.0;
  }
  return n;
}

FirstLayerFeature Normalizer::apply(const FirstLayerFeature& raw) const {
  if (raw.cols != min.size()) throw ShapeMismatch("feature row length does not match normalization");
  FirstLayerFeature out = raw;
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols; ++c) row[c] = (row[c] - min[c]) / range[c];
  }
  return out;
}

FirstLayerFeature Normalizer::invert(const FirstLayerFeature& normalized) const {
  if (normalized.cols != min.size()) throw ShapeMismatch("feature row length does not match normalization");
  FirstLayerFeature out = normalized;
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols; ++c) row[c] = row[c] * range[c] + min[c];
  }
  return out;
}

AttClassifier::AttClassifier(std::size_t row_len, const AttestorParams& params, data::PropertySpec spec,
                             std::uint64_t seed)
    : row_len_(row_len), spec_(std::move(spec)) {
  if (row_len == 0 || params.phi_hidden.empty()) throw InvalidArgument("classifier needs a row length and encoder");
  Prng rng(seed);
  std::size_t in = row_len;
  for (auto h : params.phi_hidden) {
    phi_.push_back(make_layer(in, h, rng));
    in = h;
  }
  for (auto h : params.rho_hidden) {
    rho_.push_back(make_layer(in, h, rng));
    in = h;
  }
  rho_.push_back(make_layer(in, 1, rng));
  norm_ = {std::vector<double>(row_len, 0.0), std::vector<double>(row_len, 1.0)};
}

void AttClassifier::set_threshold(double t) {
  if (!std::isfinite(t)) throw InvalidArgument("threshold must be finite");
  threshold_ = t;
}

namespace {

Forward run_forward(const AttClassifier& clf, const FirstLayerFeature& canon) {
  Forward fw;
  std::size_t emb = clf.phi().back().out;
  fw.pooled.assign(emb, 0.0);
  fw.row_acts.resize(canon.rows);
  for (std::size_t r = 0; r < canon.rows; ++r) {
    run_layers(clf.phi(), canon.row(r), true, fw.row_acts[r]);
    const auto& e = fw.row_acts[r].back();
    for (std::size_t k = 0; k < emb; ++k) fw.pooled[k] += e[k];
  }
  run_layers(clf.rho(), fw.pooled, false, fw.head_acts);
  fw.logit = fw.head_acts.back()[0];
  return fw;
}

// Returns d(logit)/d(canonical input) and accumulates parameter gradients
// scaled by dlogit.
void run_backward(const AttClassifier& clf, const Forward& fw, double dlogit, std::vector<DenseLayer>* phi_grads,
                  std::vector<DenseLayer>* rho_grads, FirstLayerFeature* input_grad) {
  auto dpool = back_layers(clf.rho(), fw.head_acts, {dlogit}, false, rho_grads);
  for (std::size_t r = 0; r < fw.row_acts.size(); ++r) {
    auto dx = back_layers(clf.phi(), fw.row_acts[r], dpool, true, phi_grads);
    if (input_grad) {
      auto dst = input_grad->row(r);
      std::copy(dx.begin(), dx.end(), dst.begin());
    }
  }
}

}  // namespace

double AttClassifier::score_normalized(const FirstLayerFeature& normalized, FirstLayerFeature* input_grad) const {
  if (normalized.cols != row_len_) throw ShapeMismatch("feature row length does not match classifier");
  if (normalized.rows == 0) throw InvalidArgument("cannot score a feature without rows");
  if (!input_grad) return sigmoid(run_forward(*this, normalized.canonical()).logit);

  // Gradients are computed in canonical order, then mapped back.
  std::vector<std::size_t> idx(normalized.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto ra = normalized.row(a), rb = normalized.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  FirstLayerFeature canon{normalized.rows, normalized.cols, {}};
  for (auto i : idx) {
    auto r = normalized.row(i);
    canon.values.insert(canon.values.end(), r.begin(), r.end());
  }
  auto fw = run_forward(*this, canon);
  double s = sigmoid(fw.logit);
  FirstLayerFeature g{canon.rows, canon.cols, std::vector<double>(canon.values.size())};
  run_backward(*this, fw, s * (1.0 - s), nullptr, nullptr, &g);
  *input_grad = {normalized.rows, normalized.cols, std::vector<double>(normalized.values.size())};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto src = g.row(k);
    std::copy(src.begin(), src.end(), input_grad->row(idx[k]).begin());
  }
  return s;
}

double AttClassifier::score(const FirstLayerFeature& raw) const {
  if (raw.cols != row_len_) throw ShapeMismatch("feature row length does not match classifier");
  if (raw.rows == 0) throw InvalidArgument("cannot score a feature without rows");
  return score_normalized(norm_.apply(raw));
}

Bytes AttClassifier::serialize() const {
  ByteWriter w;
  w.magic("FAT1");
  w.u32(static_cast<std::uint32_t>(row_len_));
  w.u32(static_cast<std::uint32_t>(phi_.size()));
  for (const auto& L : phi_) w.u32(static_cast<std::uint32_t>(L.out));
  w.u32(static_cast<std::uint32_t>(rho_.size()));
  for (const auto& L : rho_) w.u32(static_cast<std::uint32_t>(L.out));
  w.f64s(norm_.min);
  w.f64s(norm_.range);
  for (const auto* net : {&phi_, &rho_}) {
    for (const auto& L : *net) {
      w.f64s(L.weights);
      w.f64s(L.bias);
    }
  }
  w.f64(threshold_);
  const auto& spec = trained_for();
  w.i64(spec.p_req().num());
  w.i64(spec.p_req().den());
  w.u32(static_cast<std::uint32_t>(spec.window()));
  w.u32(static_cast<std::uint32_t>(spec.grid().size()));
  for (const auto& g : spec.grid()) {
    w.i64(g.num());
    w.i64(g.den());
  }
  return std::move(w).take();
}

AttClassifier AttClassifier::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("FAT1");
  AttClassifier c;
  c.row_len_ = r.u32();
  auto read_net = [&](std::vector<DenseLayer>& net, std::size_t in) {
    std::size_t count = r.u32();
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t out = r.u32();
      net.push_back({in, out, std::vector<double>(in * out), std::vector<double>(out)});
      in = out;
    }
    return in;
  };
  std::size_t emb = read_net(c.phi_, c.row_len_);
  read_net(c.rho_, emb);
  if (c.phi_.empty() || c.rho_.empty() || c.rho_.back().out != 1) throw IoError("malformed classifier layout");
  c.norm_.min = r.f64s(c.row_len_);
  c.norm_.range = r.f64s(c.row_len_);
  for (auto* net : {&c.phi_, &c.rho_}) {
    for (auto& L : *net) {
      L.weights = r.f64s(L.weights.size());
      L.bias = r.f64s(L.bias.size());
    }
  }
  c.threshold_ = r.f64();
  auto pn = r.i64();
  auto pd = r.i64();
  std::size_t window = r.u32();
  std::vector<Rational> grid(r.u32());
  for (auto& g : grid) {
    auto n = r.i64();
    auto d = r.i64();
    g = Rational(n, d);
  }
  r.expect_done();
  c.spec_.emplace(Rational(pn, pd), window, std::move(grid));
  return c;
}

AttestorTraining train_on_set(const std::vector<LabeledFeature>& set, const data::PropertySpec& spec,
                              const AttestorParams& hp, std::uint64_t seed, const BatchAugmenter& augment) {
  if (set.empty()) throw InvalidArgument("train_attestor: empty corpus");
  std::size_t pos = 0;
  for (const auto& lf : set) pos += lf.positive ? 1 : 0;
  if (pos == 0 || pos == set.size()) {
    throw InvalidArgument("train_attestor: corpus needs examples both inside and outside the window");
  }
  if (hp.batch_size == 0) throw InvalidArgument("batch size must be positive");

  AttestorTraining out;
  AttClassifier clf(set.front().feature.cols, hp, spec, derive_seed(seed, "attestor-init"));
  clf.set_normalizer(Normalizer::fit(set));

  std::vector<FirstLayerFeature> inputs;
  std::vector<double> labels;
  inputs.reserve(set.size());
  for (const auto& lf : set) {
    inputs.push_back(clf.normalizer().apply(lf.feature).canonical());
    labels.push_back(lf.positive ? 1.0 : 0.0);
  }
  const double neg = static_cast<double>(set.size() - pos);
  const double w_pos = hp.balance_classes ? 0.5 * static_cast<double>(set.size()) / static_cast<double>(pos) : 1.0;
  const double w_neg = hp.balance_classes ? 0.5 * static_cast<double>(set.size()) / neg : 1.0;

  auto phi_g = clf.phi();
  auto rho_g = clf.rho();
  Adam phi_opt(clf.phi()), rho_opt(clf.rho());
  std::size_t tick = 0;
  Prng order_rng(derive_seed(seed, "attestor-batches"));
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      std::size_t end = std::min(order.size(), start + hp.batch_size);
      std::vector<FirstLayerFeature> batch;
      std::vector<double> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(inputs[order[k]]);
        batch_labels.push_back(labels[order[k]]);
      }
      if (augment) augment(clf, batch, batch_labels);
      zero(phi_g);
      zero(rho_g);
      double wsum = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        auto canon = batch[b].canonical();
        auto fw = run_forward(clf, canon);
        double s = sigmoid(fw.logit);
        double y = batch_labels[b];
        double wgt = y > 0.5 ? w_pos : w_neg;
        wsum += wgt;
        epoch_loss += wgt * (std::max(fw.logit, 0.0) - fw.logit * y + std::log1p(std::exp(-std::abs(fw.logit))));
        run_backward(clf, fw, wgt * (s - y), &phi_g, &rho_g, nullptr);
      }
      for (auto* g : {&phi_g, &rho_g}) {
        for (auto& L : *g) {
          for (auto& v : L.weights) v /= wsum;
          for (auto& v : L.bias) v /= wsum;
        }
      }
      ++tick;
      phi_opt.step(clf.phi(), phi_g, hp.learning_rate, tick);
      rho_opt.step(clf.rho(), rho_g, hp.learning_rate, tick);
    }
    if (!std::isfinite(epoch_loss)) throw TrainingFailure("attestor training diverged", epoch);
    out.epoch_losses.push_back(epoch_loss / static_cast<double>(set.size()));
  }

  clf.set_threshold(0.5);
  out.classifier = std::move(clf);
  auto scores = score_all(out.classifier, set);
  std::vector<bool> pos_flags;
  for (const auto& lf : set) pos_flags.push_back(lf.positive);
  out.train_auc = compute_roc(scores, pos_flags).auc;
  return out;
}

AttestorTraining train_attestor(const model::ShadowCorpus& corpus, const data::PropertySpec& spec,
                                const AttestorParams& hp, std::uint64_t seed) {
  return train_on_set(label_corpus(corpus, spec), spec, hp, seed);
}

std::vector<double> score_all(const AttClassifier& clf, const std::vector<LabeledFeature>& set) {
  std::vector<double> s;
  s.reserve(set.size());
  for (const auto& lf : set) s.push_back(clf.score(lf.feature));
  return s;
}

}  // namespace propattest::attest
