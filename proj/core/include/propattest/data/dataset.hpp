#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "propattest/common/binary_io.hpp"
#include "propattest/common/rational.hpp"

namespace propattest::data {

// Records stored column-wise: a row-major n x d feature matrix plus the task
// label and sensitive attribute columns.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::size_t dim, std::vector<double> features, std::vector<std::uint8_t> labels,
                 std::vector<std::uint8_t> sensitive, std::uint64_t seed = 0);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
  std::span<const double> features() const { return features_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<const std::uint8_t> sensitive() const { return sensitive_; }

  std::size_t sensitive_count() const;

  // Rows in `order`, in that order.
  LabeledDataset subset(std::span<const std::size_t> order) const;

  // ADS1: magic, u32 n, u32 d, then per record d f64 + label byte + sensitive byte.
  // The seed is not part of the file format.
  Bytes serialize() const;
  static LabeledDataset deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.dim_ == b.dim_ && a.features_ == b.features_ && a.labels_ == b.labels_ &&
           a.sensitive_ == b.sensitive_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::uint8_t> sensitive_;
  std::uint64_t seed_ = 0;
};

struct GeneratorParams {
  double mean_shift = 1.0;   // shift along the sensitive direction for sensitive=1 records
  double label_noise = 0.1;  // stddev of noise added before thresholding the task label
};

// Draws n records of dimension d with exactly round(ratio * n) sensitive records.
LabeledDataset sample_dataset(const Rational& ratio, std::size_t n, std::size_t d, std::uint64_t seed,
                              const GeneratorParams& params = {});

// Exact fraction of sensitive=1 records.
Rational compute_property(const LabeledDataset& ds);

class PropertySpec {
 public:
  PropertySpec(Rational p_req, std::size_t window, std::vector<Rational> grid);

  // {0, 0.1, ..., 1.0}
  static std::vector<Rational> default_grid();
  // {lo, lo+step, ..., hi} with exact rational steps.
  static std::vector<Rational> make_grid(const Rational& lo, const Rational& hi, const Rational& step);

  const Rational& p_req() const { return p_req_; }
  std::size_t window() const { return window_; }
  const std::vector<Rational>& grid() const { return grid_; }
  std::size_t p_req_index() const { return p_req_index_; }

  PropertySpec with_window(std::size_t window) const { return {p_req_, window, grid_}; }
  PropertySpec with_p_req(const Rational& p) const { return {p, window_, grid_}; }

  friend bool operator==(const PropertySpec&, const PropertySpec&) = default;

 private:
  Rational p_req_;
  std::size_t window_;
  std::vector<Rational> grid_;
  std::size_t p_req_index_ = 0;
};

// Accept interval [lo, hi] of grid values within `window` steps of p_req,
// truncated at the grid ends.
std::pair<Rational, Rational> window_range(const PropertySpec& spec);

bool in_window(const PropertySpec& spec, const Rational& value);

// Plaintext DistCheck: lo*n <= count <= hi*n, evaluated with integer
// cross-multiplication.
bool count_in_window(const PropertySpec& spec, std::uint64_t count, std::uint64_t n);

}  // namespace propattest::data
