#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "propattest/attest/classifier.hpp"
#include "propattest/attest/roc.hpp"
#include "propattest/common/error.hpp"

namespace propattest::attest {
namespace {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> positive;
};

ScoreSet random_scores(std::uint64_t seed, std::size_t n, bool with_ties) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    bool pos = i % 3 != 0;
    double v = nd(gen) + (pos ? 0.7 : 0.0);
    if (with_ties) v = std::round(v * 4.0) / 4.0;
    s.scores.push_back(v);
    s.positive.push_back(pos);
  }
  return s;
}

TEST(Roc, AucMatchesMannWhitney) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = random_scores(seed, 150, seed % 2 == 0);
    auto roc = compute_roc(s.scores, s.positive);
    EXPECT_NEAR(roc.auc, oracle::mann_whitney_auc(s.scores, s.positive), 1e-9) << "seed " << seed;
  }
}

TEST(Roc, RateIdentitiesAndMonotoneFar) {
  auto s = random_scores(3, 200, true);
  auto roc = compute_roc(s.scores, s.positive);
  ASSERT_GE(roc.points.size(), 2u);
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    const auto& p = roc.points[i];
    EXPECT_DOUBLE_EQ(p.tar + p.frr, 1.0);
    EXPECT_DOUBLE_EQ(p.trr + p.far, 1.0);
    if (i > 0) {
      EXPECT_GT(p.threshold, roc.points[i - 1].threshold);
      EXPECT_LE(p.far, roc.points[i - 1].far);
    }
  }
  EXPECT_EQ(roc.points.front().far, 1.0);
  EXPECT_EQ(roc.points.back().far, 0.0);
}

TEST(Roc, PerfectSeparationAndEer) {
  std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
  std::vector<bool> pos{false, false, true, true};
  auto roc = compute_roc(scores, pos);
  EXPECT_DOUBLE_EQ(roc.auc, 1.0);
  EXPECT_DOUBLE_EQ(roc.eer, 0.0);
  EXPECT_THROW(compute_roc(scores, {true, true, true, true}), InvalidArgument);
}

TEST(Calibration, FixedFarMeetsLevelWhenAttainable) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = random_scores(seed, 300, seed % 2 == 1);
    auto cal = choose_threshold(s.scores, s.positive, CalibrationMode::kFixedFar, 0.05);
    auto r = rates_at(s.scores, s.positive, cal.threshold);
    EXPECT_LE(r.far, 0.05);
    EXPECT_DOUBLE_EQ(r.far, cal.achieved.far);
    auto frr = choose_threshold(s.scores, s.positive, CalibrationMode::kFixedFrr, 0.05);
    EXPECT_LE(rates_at(s.scores, s.positive, frr.threshold).frr, 0.05);
  }
}

TEST(Calibration, FixedFarPicksLowestQualifyingThreshold) {
  std::vector<double> scores{0.1, 0.3, 0.5, 0.7, 0.9, 0.2};
  std::vector<bool> pos{false, false, true, true, true, false};
  auto cal = choose_threshold(scores, pos, CalibrationMode::kFixedFar, 0.0);
  EXPECT_GT(cal.threshold, 0.3);
  EXPECT_LE(cal.threshold, 0.5);
  EXPECT_EQ(cal.achieved.frr, 0.0);
}

std::vector<LabeledFeature> toy_set(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<LabeledFeature> set;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledFeature lf;
    lf.positive = i % 2 == 0;
    lf.feature.rows = 4;
    lf.feature.cols = 3;
    for (int k = 0; k < 12; ++k) lf.feature.values.push_back(nd(gen) + (lf.positive && k % 3 == 0 ? 1.5 : 0.0));
    set.push_back(lf);
  }
  return set;
}

data::PropertySpec toy_spec() { return {Rational(1, 5), 0, {Rational(1, 5), Rational(4, 5)}}; }

AttestorParams quick_params() {
  AttestorParams hp;
  hp.epochs = 40;
  hp.phi_hidden = {8, 8};
  hp.rho_hidden = {4};
  return hp;
}

TEST(Attestor, LearnsSeparableSetAndIsRowPermutationInvariant) {
  auto set = toy_set(1, 200);
  auto trained = train_on_set(set, toy_spec(), quick_params(), 4);
  EXPECT_GT(evaluate(trained.classifier, toy_set(2, 200)).auc, 0.9);

  auto f = set[0].feature;
  auto g = f;
  for (std::size_t r = 0; r < f.rows; ++r) {
    auto src = f.row(f.rows - 1 - r);
    std::copy(src.begin(), src.end(), g.row(r).begin());
  }
  EXPECT_EQ(trained.classifier.score(f), trained.classifier.score(g));
}

TEST(Attestor, GradientMatchesFiniteDifference) {
  auto set = toy_set(1, 60);
  auto clf = train_on_set(set, toy_spec(), quick_params(), 4).classifier;
  auto x = clf.normalizer().apply(set[1].feature);
  FirstLayerFeature grad;
  clf.score_normalized(x, &grad);
  for (std::size_t i = 0; i < x.values.size(); i += 5) {
    auto up = x, down = x;
    up.values[i] += 1e-6;
    down.values[i] -= 1e-6;
    double fd = (clf.score_normalized(up) - clf.score_normalized(down)) / 2e-6;
    EXPECT_NEAR(grad.values[i], fd, 1e-5);
  }
}

TEST(Attestor, SerializationAndCalibrationPersist) {
  auto set = toy_set(1, 80);
  auto clf = train_on_set(set, toy_spec(), quick_params(), 4).classifier;
  auto cal = calibrate(clf, set, CalibrationMode::kFixedFar, 0.1);
  auto back = AttClassifier::deserialize(cal.serialize());
  EXPECT_EQ(back, cal);
  EXPECT_EQ(back.score(set[3].feature), cal.score(set[3].feature));
  EXPECT_NO_THROW(cal.score(FirstLayerFeature{2, 3, std::vector<double>(6)}));
  EXPECT_THROW(cal.score(FirstLayerFeature{2, 4, std::vector<double>(8)}), Error);
}

TEST(Attestor, TrainingIsDeterministic) {
  auto set = toy_set(1, 80);
  auto a = train_on_set(set, toy_spec(), quick_params(), 4).classifier.serialize();
  auto b = train_on_set(set, toy_spec(), quick_params(), 4).classifier.serialize();
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace propattest::attest
