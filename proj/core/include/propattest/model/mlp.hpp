#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "propattest/common/binary_io.hpp"
#include "propattest/data/dataset.hpp"

namespace propattest::model {

// Dense layer, weights row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Rectifier hidden layers, affine output squashed by the logistic function.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<std::size_t> layer_dims);

  // Glorot-uniform weights, zero biases.
  static MlpModel initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  double logit(std::span<const double> x) const;
  bool all_finite() const;

  Bytes serialize() const;
  static MlpModel deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

// Logistic score of the final affine output.
double predict(const MlpModel& m, std::span<const double> x);

double accuracy(const MlpModel& m, const data::LabeledDataset& ds);
// Mean binary cross-entropy over the whole dataset.
double mean_loss(const MlpModel& m, const data::LabeledDataset& ds);

struct TrainParams {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
};

struct TrainResult {
  MlpModel model;
  double train_accuracy = 0.0;
  // Full-dataset loss before training and after every epoch.
  std::vector<double> epoch_losses;
  // False when some epoch raised the full-dataset loss by more than 1e-6.
  bool loss_monotone = true;
};

// Mini-batch SGD on binary cross-entropy. Throws TrainingFailure on a
// non-finite loss.
TrainResult train_mlp(const data::LabeledDataset& ds, std::vector<std::size_t> dims, const TrainParams& hp,
                      std::uint64_t seed);

// Continues training from `start`; when freeze_first is set the first layer
// is never written.
TrainResult continue_training(const data::LabeledDataset& ds, MlpModel start, const TrainParams& hp,
                              std::uint64_t seed, bool freeze_first);

// One row per first-layer neuron: weight row followed by its bias. Row order
// carries no meaning.
struct FirstLayerFeature {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  // Same multiset of rows, lexicographically sorted.
  FirstLayerFeature canonical() const;

  friend bool operator==(const FirstLayerFeature&, const FirstLayerFeature&) = default;
};

FirstLayerFeature extract_first_layer(const MlpModel& m);

// Overwrites the first layer of m from a feature of matching shape.
void install_first_layer(MlpModel& m, const FirstLayerFeature& f);

}  // namespace propattest::model
