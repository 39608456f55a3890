#include "propattest/attest/roc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "propattest/common/error.hpp"

namespace propattest::attest {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts count_classes(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeMismatch("scores and labels differ in length");
  ClassCounts c;
  for (bool p : positive) (p ? c.pos : c.neg) += 1;
  if (c.pos == 0 || c.neg == 0) throw InvalidArgument("ROC evaluation needs both classes");
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("non-finite score");
  }
  return c;
}

std::vector<double> sweep_thresholds(std::span<const double> scores) {
  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> t;
  t.reserve(distinct.size() + 1);
  t.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) t.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  t.push_back(distinct.back() + 1.0);
  return t;
}

}  // namespace

Rates rates_at(std::span<const double> scores, const std::vector<bool>& positive, double threshold) {
  auto c = count_classes(scores, positive);
  std::size_t fa = 0, fr = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool accept = scores[i] >= threshold;
    if (positive[i] && !accept) ++fr;
    if (!positive[i] && accept) ++fa;
  }
  return {static_cast<double>(fa) / static_cast<double>(c.neg), static_cast<double>(fr) / static_cast<double>(c.pos)};
}

RocSummary compute_roc(std::span<const double> scores, const std::vector<bool>& positive) {
  auto c = count_classes(scores, positive);
  auto thresholds = sweep_thresholds(scores);

  // Sorted class scores let every threshold be answered by binary search.
  std::vector<double> pos_s, neg_s;
  for (std::size_t i = 0; i < scores.size(); ++i) (positive[i] ? pos_s : neg_s).push_back(scores[i]);
  std::sort(pos_s.begin(), pos_s.end());
  std::sort(neg_s.begin(), neg_s.end());

  RocSummary roc;
  roc.points.reserve(thresholds.size());
  for (double t : thresholds) {
    auto below_pos = static_cast<std::size_t>(std::lower_bound(pos_s.begin(), pos_s.end(), t) - pos_s.begin());
    auto below_neg = static_cast<std::size_t>(std::lower_bound(neg_s.begin(), neg_s.end(), t) - neg_s.begin());
    RocPoint p;
    p.threshold = t;
    p.frr = static_cast<double>(below_pos) / static_cast<double>(c.pos);
    p.far = static_cast<double>(c.neg - below_neg) / static_cast<double>(c.neg);
    p.tar = 1.0 - p.frr;
    p.trr = 1.0 - p.far;
    roc.points.push_back(p);
  }

  // Trapezoid over FAR ascending, i.e. threshold descending.
  double area = 0.0;
  for (std::size_t i = roc.points.size() - 1; i > 0; --i) {
    const auto& a = roc.points[i];
    const auto& b = roc.points[i - 1];
    area += (b.far - a.far) * 0.5 * (a.tar + b.tar);
  }
  roc.auc = std::clamp(area, 0.0, 1.0);

  double best = INFINITY;
  for (const auto& p : roc.points) {
    double gap = std::abs(p.far - p.frr);
    if (gap < best) {
      best = gap;
      roc.eer = 0.5 * (p.far + p.frr);
      roc.eer_threshold = p.threshold;
    }
  }
  return roc;
}

RocSummary evaluate(const AttClassifier& clf, const std::vector<LabeledFeature>& eval_set) {
  std::vector<bool> pos;
  for (const auto& lf : eval_set) pos.push_back(lf.positive);
  auto scores = score_all(clf, eval_set);
  return compute_roc(scores, pos);
}

std::string roc_csv(const RocSummary& roc) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold,far,frr,tar,trr\n";
  for (const auto& p : roc.points) os << p.threshold << ',' << p.far << ',' << p.frr << ',' << p.tar << ',' << p.trr << '\n';
  return os.str();
}

Calibration choose_threshold(std::span<const double> scores, const std::vector<bool>& positive, CalibrationMode mode,
                             double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw InvalidArgument("calibration level outside [0,1]");
  auto roc = compute_roc(scores, positive);
  const auto& pts = roc.points;
  Calibration cal;
  std::size_t chosen = 0;
  if (mode == CalibrationMode::kFixedFar) {
    chosen = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].far <= level) {
        chosen = i;
        break;
      }
    }
    cal.degenerate = chosen == pts.size() - 1;
  } else {
    chosen = 0;
    for (std::size_t i = pts.size(); i-- > 0;) {
      if (pts[i].frr <= level) {
        chosen = i;
        break;
      }
    }
    cal.degenerate = chosen == 0;
  }
  cal.threshold = pts[chosen].threshold;
  cal.achieved = {pts[chosen].far, pts[chosen].frr};
  return cal;
}

AttClassifier calibrate(const AttClassifier& clf, const std::vector<LabeledFeature>& holdout, CalibrationMode mode,
                        double level, Calibration* report) {
  std::vector<bool> pos;
  for (const auto& lf : holdout) pos.push_back(lf.positive);
  auto scores = score_all(clf, holdout);
  auto cal = choose_threshold(scores, pos, mode, level);
  AttClassifier out = clf;
  out.set_threshold(cal.threshold);
  if (report) *report = cal;
  return out;
}

WindowSelection select_window(const model::ShadowCorpus& train, const model::ShadowCorpus& test,
                              const data::PropertySpec& spec, const std::vector<std::size_t>& candidates,
                              const AttestorParams& hp, std::uint64_t seed) {
  if (candidates.empty()) throw InvalidArgument("select_window: no candidate windows");
  WindowSelection sel;
  double best = -1.0;
  auto sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (auto w : sorted) {
    auto s = spec.with_window(w);
    auto trained = train_attestor(train, s, hp, seed);
    double auc = evaluate(trained.classifier, label_corpus(test, s)).auc;
    sel.candidates.push_back({w, auc, auc >= kGoodAuc});
    if (auc > best) {
      best = auc;
      sel.chosen = w;
    }
  }
  return sel;
}

}  // namespace propattest::attest
