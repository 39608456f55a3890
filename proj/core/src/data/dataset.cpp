#include "propattest/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "propattest/common/error.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::data {

LabeledDataset::LabeledDataset(std::size_t dim, std::vector<double> features, std::vector<std::uint8_t> labels,
                               std::vector<std::uint8_t> sensitive, std::uint64_t seed)
    : dim_(dim),
      features_(std::move(features)),
      labels_(std::move(labels)),
      sensitive_(std::move(sensitive)),
      seed_(seed) {
  if (dim_ < 1) throw InvalidArgument("dataset dimension must be positive");
  if (labels_.empty()) throw InvalidArgument("dataset must hold at least one record");
  if (features_.size() != labels_.size() * dim_ || sensitive_.size() != labels_.size()) {
    throw ShapeMismatch("dataset columns disagree in length");
  }
  auto not_bit = [](std::uint8_t b) { return b > 1; };
  if (std::any_of(labels_.begin(), labels_.end(), not_bit) ||
      std::any_of(sensitive_.begin(), sensitive_.end(), not_bit)) {
    throw InvalidArgument("labels and sensitive attributes must be bits");
  }
}

std::size_t LabeledDataset::sensitive_count() const {
  return static_cast<std::size_t>(std::count(sensitive_.begin(), sensitive_.end(), std::uint8_t{1}));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> order) const {
  std::vector<double> feats;
  std::vector<std::uint8_t> labels, sens;
  feats.reserve(order.size() * dim_);
  for (std::size_t i : order) {
    if (i >= size()) throw InvalidArgument("subset index out of range");
    auto r = row(i);
    feats.insert(feats.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
    sens.push_back(sensitive_[i]);
  }
  return {dim_, std::move(feats), std::move(labels), std::move(sens), seed_};
}

Bytes LabeledDataset::serialize() const {
  ByteWriter w;
  w.magic("ADS1");
  w.u32(static_cast<std::uint32_t>(size()));
  w.u32(static_cast<std::uint32_t>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    w.f64s(row(i));
    w.u8(labels_[i]);
    w.u8(sensitive_[i]);
  }
  return std::move(w).take();
}

LabeledDataset LabeledDataset::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("ADS1");
  std::size_t n = r.u32();
  std::size_t d = r.u32();
  std::vector<double> feats;
  std::vector<std::uint8_t> labels(n), sens(n);
  feats.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = r.f64s(d);
    feats.insert(feats.end(), row.begin(), row.end());
    labels[i] = r.u8();
    sens[i] = r.u8();
  }
  r.expect_done();
  return {d, std::move(feats), std::move(labels), std::move(sens)};
}

LabeledDataset sample_dataset(const Rational& ratio, std::size_t n, std::size_t d, std::uint64_t seed,
                              const GeneratorParams& params) {
  if (n == 0) throw InvalidArgument("sample_dataset: n must be at least 1");
  if (d < 2) throw InvalidArgument("sample_dataset: dimension must be at least 2");
  if (ratio < Rational(0) || ratio > Rational(1)) throw InvalidArgument("sample_dataset: ratio outside [0,1]");

  const auto count = static_cast<std::size_t>(ratio.round_half_up_times(static_cast<std::int64_t>(n)));
  Prng rng(seed);
  std::vector<std::uint8_t> sens(n, 0);
  std::fill_n(sens.begin(), count, std::uint8_t{1});
  std::shuffle(sens.begin(), sens.end(), rng);

  // Sensitive records are shifted along the first axis. The task label
  // thresholds a fixed dense linear function of the unshifted draw, so the
  // label posterior given the observed features depends on the ratio.
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, params.label_noise);
  std::vector<double> feats(n * d);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double x = gauss(rng);
      z += (j % 2 == 0 ? w_scale : -0.5 * w_scale) * x;
      if (j == 0 && sens[i]) x += params.mean_shift;
      feats[i * d + j] = x;
    }
    labels[i] = static_cast<std::uint8_t>(z + noise(rng) > 0.0);
  }
  return {d, std::move(feats), std::move(labels), std::move(sens), seed};
}

Rational compute_property(const LabeledDataset& ds) {
  if (ds.size() == 0) throw InvalidArgument("compute_property: empty dataset");
  return {static_cast<std::int64_t>(ds.sensitive_count()), static_cast<std::int64_t>(ds.size())};
}

PropertySpec::PropertySpec(Rational p_req, std::size_t window, std::vector<Rational> grid)
    : p_req_(p_req), window_(window), grid_(std::move(grid)) {
  if (grid_.empty()) throw InvalidArgument("property grid is empty");
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (grid_[i] < Rational(0) || grid_[i] > Rational(1)) throw InvalidArgument("grid value outside [0,1]");
    if (i > 0 && !(grid_[i - 1] < grid_[i])) throw InvalidArgument("grid must be strictly increasing");
  }
  auto it = std::find(grid_.begin(), grid_.end(), p_req_);
  if (it == grid_.end()) throw InvalidArgument("p_req " + p_req_.to_string() + " is not a grid value");
  p_req_index_ = static_cast<std::size_t>(it - grid_.begin());
  if (window_ > grid_.size()) throw InvalidArgument("window exceeds grid length");
}

std::vector<Rational> PropertySpec::default_grid() { return make_grid(Rational(0), Rational(1), Rational(1, 10)); }

std::vector<Rational> PropertySpec::make_grid(const Rational& lo, const Rational& hi, const Rational& step) {
  if (!(step > Rational(0))) throw InvalidArgument("grid step must be positive");
  std::vector<Rational> grid;
  for (Rational v = lo; v <= hi; v = v + step) grid.push_back(v);
  return grid;
}

std::pair<Rational, Rational> window_range(const PropertySpec& spec) {
  const auto& grid = spec.grid();
  std::size_t i = spec.p_req_index();
  std::size_t lo = i >= spec.window() ? i - spec.window() : 0;
  std::size_t hi = std::min(grid.size() - 1, i + spec.window());
  return {grid[lo], grid[hi]};
}

bool in_window(const PropertySpec& spec, const Rational& value) {
  auto [lo, hi] = window_range(spec);
  return lo <= value && value <= hi;
}

bool count_in_window(const PropertySpec& spec, std::uint64_t count, std::uint64_t n) {
  auto [lo, hi] = window_range(spec);
  using I = __int128;
  I c = static_cast<I>(count);
  I total = static_cast<I>(n);
  return static_cast<I>(lo.num()) * total <= c * lo.den() && c * hi.den() <= static_cast<I>(hi.num()) * total;
}

}  // namespace propattest::data
