#pragma once

#include <span>
#include <string>
#include <vector>

#include "propattest/attest/classifier.hpp"

namespace propattest::attest {

// Acceptance means score >= threshold.
struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double tar = 0.0;
  double trr = 0.0;
};

struct RocSummary {
  std::vector<RocPoint> points;  // ascending threshold
  double auc = 0.0;              // area under the FAR-TAR curve
  double eer = 0.0;
  double eer_threshold = 0.0;
};

// Thresholds: one below every score, midpoints between consecutive distinct
// scores, one above every score. EER is taken at the point minimizing
// |FAR - FRR| (lowest threshold on ties) and reported as (FAR + FRR) / 2.
RocSummary compute_roc(std::span<const double> scores, const std::vector<bool>& positive);
RocSummary evaluate(const AttClassifier& clf, const std::vector<LabeledFeature>& eval_set);

// CSV with header threshold,far,frr,tar,trr.
std::string roc_csv(const RocSummary& roc);

struct Rates {
  double far = 0.0;
  double frr = 0.0;
  double tar() const { return 1.0 - frr; }
  double trr() const { return 1.0 - far; }
};

Rates rates_at(std::span<const double> scores, const std::vector<bool>& positive, double threshold);

enum class CalibrationMode { kFixedFar, kFixedFrr };

struct Calibration {
  double threshold = 0.5;
  Rates achieved;
  // Set when no interior threshold meets the level and a sentinel (accept
  // nothing / accept everything) was chosen.
  bool degenerate = false;
};

// fixed_far: lowest threshold whose FAR <= level.
// fixed_frr: highest threshold whose FRR <= level.
Calibration choose_threshold(std::span<const double> scores, const std::vector<bool>& positive, CalibrationMode mode,
                             double level);

AttClassifier calibrate(const AttClassifier& clf, const std::vector<LabeledFeature>& holdout, CalibrationMode mode,
                        double level, Calibration* report = nullptr);

struct WindowCandidate {
  std::size_t window = 0;
  double auc = 0.0;
  bool good = false;  // auc >= 0.85
};

struct WindowSelection {
  std::size_t chosen = 0;
  std::vector<WindowCandidate> candidates;
};

inline constexpr double kGoodAuc = 0.85;

// Trains one attestor per candidate window on the train split and keeps the
// window with the highest test AUC (smaller window on ties).
WindowSelection select_window(const model::ShadowCorpus& train, const model::ShadowCorpus& test,
                              const data::PropertySpec& spec, const std::vector<std::size_t>& candidates,
                              const AttestorParams& hp, std::uint64_t seed);

}  // namespace propattest::attest
