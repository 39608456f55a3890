#include <gtest/gtest.h>

#include "propattest/common/error.hpp"
#include "propattest/robust/attack.hpp"

namespace propattest::robust {
namespace {

model::ShadowCorpus tiny_corpus(std::uint64_t seed) {
  model::ShadowConfig cfg;
  cfg.per_value = 12;
  cfg.records = 120;
  cfg.dim = 3;
  cfg.hidden = {4};
  cfg.train = {15, 0.05, 32};
  return model::build_shadow_corpus({Rational(1, 5), Rational(4, 5)}, cfg, seed);
}

data::PropertySpec spec() { return {Rational(1, 5), 0, {Rational(1, 5), Rational(4, 5)}}; }

attest::AttestorParams quick() {
  attest::AttestorParams hp;
  hp.epochs = 20;
  hp.phi_hidden = {8, 8};
  hp.rho_hidden = {4};
  return hp;
}

class RobustTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new model::ShadowCorpus(tiny_corpus(1));
    clf_ = new AttClassifier(attest::train_attestor(*corpus_, spec(), quick(), 2).classifier);
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete clf_;
  }
  static model::ShadowCorpus* corpus_;
  static AttClassifier* clf_;
};
model::ShadowCorpus* RobustTest::corpus_ = nullptr;
AttClassifier* RobustTest::clf_ = nullptr;

TEST_F(RobustTest, PgdStaysInBallAndNeverLowersScore) {
  AttackConfig cfg{0.05, 10, 0.01};
  for (const auto& e : corpus_->entries) {
    auto x0 = clf_->normalizer().apply(e.feature);
    double best = 0.0;
    auto x = pgd_normalized(x0, *clf_, cfg, &best);
    EXPECT_GE(best, clf_->score_normalized(x0) - 1e-15);
    EXPECT_DOUBLE_EQ(best, clf_->score_normalized(x));
    for (std::size_t i = 0; i < x.values.size(); ++i) EXPECT_LE(std::abs(x.values[i] - x0.values[i]), 0.05 + 1e-12);
  }
}

TEST_F(RobustTest, ZeroBudgetIsIdentity) {
  const auto& f = corpus_->entries[0].feature;
  auto p = perturb_first_layer(f, *clf_, {0.0, 5, 0.01});
  EXPECT_EQ(p.feature, f);
  EXPECT_DOUBLE_EQ(p.clean_score, p.attacked_score);
}

TEST_F(RobustTest, RawPerturbationRespectsNormalizedBudget) {
  AttackConfig cfg{0.03, 10, 0.006};
  const auto& norm = clf_->normalizer();
  for (std::size_t k = 0; k < corpus_->entries.size(); k += 3) {
    const auto& f = corpus_->entries[k].feature;
    auto p = perturb_first_layer(f, *clf_, cfg);
    EXPECT_GE(p.attacked_score, p.clean_score);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      double range = norm.range[i % norm.range.size()];
      EXPECT_LE(std::abs(p.feature.values[i] - f.values[i]) / range, cfg.epsilon + 1e-9);
    }
  }
}

TEST_F(RobustTest, AdversarialTrainingWithZeroBudgetMatchesPlainTraining) {
  auto plain = attest::train_attestor(*corpus_, spec(), quick(), 5).classifier;
  auto adv = adversarial_train(*corpus_, spec(), {0.0, 5, 0.01}, quick(), 5).classifier;
  EXPECT_EQ(plain.serialize(), adv.serialize());
}

TEST(Robust, FrozenFinetuneKeepsPerturbedLayer) {
  auto ds = data::sample_dataset(Rational(4, 5), 150, 3, 3);
  auto base = model::train_mlp(ds, {3, 4, 1}, {20, 0.05, 32}, 1);
  auto f = model::extract_first_layer(base.model);
  for (auto& v : f.values) v += 0.01;
  auto tuned = finetune_frozen(base.model, f, ds, {20, 0.05, 32}, 1);
  EXPECT_EQ(model::extract_first_layer(tuned.model), f);
}

TEST(Robust, InvalidConfigAndCsv) {
  EXPECT_THROW((AttackConfig{-1.0, 5, 0.1}).validate(), InvalidArgument);
  EXPECT_THROW((AttackConfig{0.1, 0, 0.1}).validate(), InvalidArgument);
  auto csv = attack_report_csv({{"m0", 0.1, 0.9, false, true}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model_id,clean_score,attacked_score,accepted_before,accepted_after");
}

}  // namespace
}  // namespace propattest::robust
