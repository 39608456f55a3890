#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "propattest/common/binary_io.hpp"
#include "propattest/data/dataset.hpp"
#include "propattest/model/mlp.hpp"
#include "propattest/model/shadow.hpp"

namespace propattest::attest {

using model::DenseLayer;
using model::FirstLayerFeature;

struct LabeledFeature {
  FirstLayerFeature feature;
  bool positive = false;
};

// Labels every corpus entry by whether its grid value lies in the window.
std::vector<LabeledFeature> label_corpus(const model::ShadowCorpus& corpus, const data::PropertySpec& spec);

struct Normalizer {
  std::vector<double> min;
  std::vector<double> range;  // max - min, 1 where the column is constant

  static Normalizer fit(const std::vector<LabeledFeature>& set);
  FirstLayerFeature apply(const FirstLayerFeature& raw) const;
  FirstLayerFeature invert(const FirstLayerFeature& normalized) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

struct AttestorParams {
  std::size_t epochs = 200;
  double learning_rate = 5e-3;
  std::size_t batch_size = 32;
  std::vector<std::size_t> phi_hidden = {16, 16};  // last entry is the embedding size
  std::vector<std::size_t> rho_hidden = {8};
  bool balance_classes = true;
};

// Permutation-invariant classifier over first-layer rows: a per-row encoder,
// sum pooling, then a head producing a logistic score. Rows are sorted before
// pooling, which makes the score exactly invariant to row order.
class AttClassifier {
 public:
  AttClassifier() = default;
  AttClassifier(std::size_t row_len, const AttestorParams& params, data::PropertySpec spec, std::uint64_t seed);

  std::size_t row_len() const { return row_len_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t);
  const data::PropertySpec& trained_for() const { return *spec_; }
  const Normalizer& normalizer() const { return norm_; }
  void set_normalizer(Normalizer n) { norm_ = std::move(n); }

  // Score in (0,1); higher means more likely inside the accept window.
  double score(const FirstLayerFeature& raw) const;
  bool accepts(const FirstLayerFeature& raw) const { return score(raw) >= threshold_; }

  // Score of an already-normalized feature and its gradient w.r.t. every
  // normalized coordinate.
  double score_normalized(const FirstLayerFeature& normalized, FirstLayerFeature* input_grad = nullptr) const;

  std::vector<DenseLayer>& phi() { return phi_; }
  std::vector<DenseLayer>& rho() { return rho_; }
  const std::vector<DenseLayer>& phi() const { return phi_; }
  const std::vector<DenseLayer>& rho() const { return rho_; }

  // FAT1 file.
  Bytes serialize() const;
  static AttClassifier deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const AttClassifier&, const AttClassifier&) = default;

 private:
  std::size_t row_len_ = 0;
  Normalizer norm_;
  std::vector<DenseLayer> phi_;
  std::vector<DenseLayer> rho_;
  double threshold_ = 0.5;
  std::optional<data::PropertySpec> spec_;
};

// Called once per minibatch with the current classifier and the normalized
// batch; may append extra (normalized feature, label) pairs to train on.
using BatchAugmenter = std::function<void(const AttClassifier&, std::vector<FirstLayerFeature>& normalized,
                                          std::vector<double>& labels)>;

struct AttestorTraining {
  AttClassifier classifier;
  double train_auc = 0.0;
  std::vector<double> epoch_losses;
};

// Fits normalization on `set`, then trains with Adam on class-balanced
// binary cross-entropy. Threshold starts at 0.5.
AttestorTraining train_on_set(const std::vector<LabeledFeature>& set, const data::PropertySpec& spec,
                              const AttestorParams& hp, std::uint64_t seed, const BatchAugmenter& augment = {});

AttestorTraining train_attestor(const model::ShadowCorpus& corpus, const data::PropertySpec& spec,
                                const AttestorParams& hp, std::uint64_t seed);

std::vector<double> score_all(const AttClassifier& clf, const std::vector<LabeledFeature>& set);

}  // namespace propattest::attest
