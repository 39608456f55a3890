#include "propattest/robust/attack.hpp"

#include <sstream>

namespace propattest::robust {

Perturbation perturb_first_layer(const FirstLayerFeature& raw, const AttClassifier& substitute,
                                 const AttackConfig& cfg) {
  if (raw.cols != substitute.row_len()) throw ShapeMismatch("feature does not match substitute input shape");
  if (raw.rows == 0) throw InvalidArgument("cannot attack a feature without rows");
  const auto& norm = substitute.normalizer();
  auto x0 = norm.apply(raw);
  Perturbation out;
  out.clean_score = substitute.score_normalized(x0);
  auto best = pgd_normalized(x0, substitute, cfg, &out.attacked_score);

  // Map the normalized displacement back onto the raw coordinates so an
  // unchanged coordinate stays bit-identical.
  out.feature = raw;
  for (std::size_t r = 0; r < raw.rows; ++r) {
    for (std::size_t c = 0; c < raw.cols; ++c) {
      std::size_t k = r * raw.cols + c;
      double delta = best.values[k] - x0.values[k];
      if (delta != 0.0) out.feature.values[k] = raw.values[k] + delta * norm.range[c];
    }
  }
  return out;
}

attest::AttestorTraining train_substitute(const model::ShadowCorpus& prover_corpus, const data::PropertySpec& spec,
                                          const attest::AttestorParams& hp, std::uint64_t seed) {
  return attest::train_attestor(prover_corpus, spec, hp, seed);
}

model::TrainResult finetune_frozen(const model::MlpModel& m, const FirstLayerFeature& perturbed_first,
                                   const data::LabeledDataset& ds, const model::TrainParams& hp, std::uint64_t seed) {
  model::MlpModel start = m;
  model::install_first_layer(start, perturbed_first);
  return model::continue_training(ds, std::move(start), hp, seed, true);
}

attest::AttestorTraining adversarial_train(const model::ShadowCorpus& corpus, const data::PropertySpec& spec,
                                           const AttackConfig& cfg, const attest::AttestorParams& hp,
                                           std::uint64_t seed) {
  cfg.validate();
  auto set = attest::label_corpus(corpus, spec);
  if (cfg.epsilon == 0.0) return attest::train_on_set(set, spec, hp, seed);
  attest::BatchAugmenter augment = [cfg](const AttClassifier& clf, std::vector<FirstLayerFeature>& batch,
                                         std::vector<double>& labels) {
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] > 0.5) continue;
      batch.push_back(pgd_normalized(batch[i], clf, cfg));
      labels.push_back(0.0);
    }
  };
  return attest::train_on_set(set, spec, hp, seed, augment);
}

std::string attack_report_csv(const std::vector<AttackRecord>& records) {
  std::ostringstream os;
  os.precision(17);
  os << "model_id,clean_score,attacked_score,accepted_before,accepted_after\n";
  for (const auto& r : records) {
    os << r.model_id << ',' << r.clean_score << ',' << r.attacked_score << ',' << (r.accepted_before ? 1 : 0) << ','
       << (r.accepted_after ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace propattest::robust
