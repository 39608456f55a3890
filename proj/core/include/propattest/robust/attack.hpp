#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "propattest/attest/classifier.hpp"
#include "propattest/common/error.hpp"
#include "propattest/model/mlp.hpp"

namespace propattest::robust {

using attest::AttClassifier;
using model::FirstLayerFeature;

// L-infinity PGD budget, measured in the attacked classifier's normalized
// feature space.
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  std::size_t steps = 20;
  double step_size = (8.0 / 255.0) / 8.0;

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be non-negative");
    if (steps < 1) throw InvalidArgument("attack needs at least one step");
    if (!(step_size >= 0.0)) throw InvalidArgument("step size must be non-negative");
  }
};

// Sign-gradient ascent on `scorer` starting from x0, projected onto the
// epsilon ball around x0. Returns the best iterate seen, so the score never
// drops below the starting score. Scorer needs
// `double score_normalized(const FirstLayerFeature&, FirstLayerFeature* grad) const`.
template <typename Scorer>
FirstLayerFeature pgd_normalized(const FirstLayerFeature& x0, const Scorer& scorer, const AttackConfig& cfg,
                                 double* best_score = nullptr) {
  cfg.validate();
  FirstLayerFeature best = x0;
  double best_s = scorer.score_normalized(x0, nullptr);
  if (cfg.epsilon > 0.0 && cfg.step_size > 0.0) {
    FirstLayerFeature x = x0;
    FirstLayerFeature grad;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      scorer.score_normalized(x, &grad);
      for (std::size_t i = 0; i < x.values.size(); ++i) {
        double g = grad.values[i];
        if (!std::isfinite(g)) throw Error("non-finite gradient during attack");
        double moved = x.values[i] + (g > 0 ? cfg.step_size : (g < 0 ? -cfg.step_size : 0.0));
        x.values[i] = std::clamp(moved, x0.values[i] - cfg.epsilon, x0.values[i] + cfg.epsilon);
      }
      double s = scorer.score_normalized(x, nullptr);
      if (s > best_s) {
        best_s = s;
        best = x;
      }
    }
  }
  if (best_score) *best_score = best_s;
  return best;
}

struct Perturbation {
  FirstLayerFeature feature;  // raw (un-normalized) first layer
  double clean_score = 0.0;   // under the substitute
  double attacked_score = 0.0;
};

// Perturbs the raw first layer toward the substitute's positive class. The
// change of every coordinate, divided by the substitute's normalization range,
// stays within epsilon.
Perturbation perturb_first_layer(const FirstLayerFeature& raw, const AttClassifier& substitute,
                                 const AttackConfig& cfg);

// Same contract as train_attestor; trained on the prover's own corpus.
attest::AttestorTraining train_substitute(const model::ShadowCorpus& prover_corpus, const data::PropertySpec& spec,
                                          const attest::AttestorParams& hp, std::uint64_t seed);

// Installs perturbed_first and trains only the deeper layers.
model::TrainResult finetune_frozen(const model::MlpModel& m, const FirstLayerFeature& perturbed_first,
                                   const data::LabeledDataset& ds, const model::TrainParams& hp, std::uint64_t seed);

// Every minibatch is augmented with PGD-perturbed copies of its negatives,
// crafted against the classifier being trained. epsilon == 0 trains exactly
// like train_attestor.
attest::AttestorTraining adversarial_train(const model::ShadowCorpus& corpus, const data::PropertySpec& spec,
                                           const AttackConfig& cfg, const attest::AttestorParams& hp,
                                           std::uint64_t seed);

struct AttackRecord {
  std::string model_id;
  double clean_score = 0.0;
  double attacked_score = 0.0;
  bool accepted_before = false;
  bool accepted_after = false;
};

// CSV with header model_id,clean_score,attacked_score,accepted_before,accepted_after.
std::string attack_report_csv(const std::vector<AttackRecord>& records);

}  // namespace propattest::robust
