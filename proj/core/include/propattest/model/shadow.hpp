#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "propattest/common/binary_io.hpp"
#include "propattest/common/rational.hpp"
#include "propattest/data/dataset.hpp"
#include "propattest/model/mlp.hpp"

namespace propattest::model {

struct ShadowEntry {
  FirstLayerFeature feature;
  std::size_t grid_index = 0;

  friend bool operator==(const ShadowEntry&, const ShadowEntry&) = default;
};

// First-layer features of models trained on data with known property values.
struct ShadowCorpus {
  std::vector<Rational> grid;
  std::vector<ShadowEntry> entries;

  std::vector<std::size_t> counts_per_value() const;

  // SHC1: magic, u32 grid size, grid as (i64 num, i64 den), u32 entries,
  // u32 rows, u32 cols, then per entry u32 grid index and rows*cols f64.
  Bytes serialize() const;
  static ShadowCorpus deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const ShadowCorpus&, const ShadowCorpus&) = default;
};

struct ShadowConfig {
  std::size_t per_value = 10;
  std::size_t records = 500;  // n per shadow dataset
  std::size_t dim = 4;
  std::vector<std::size_t> hidden = {8, 4};
  TrainParams train;
  data::GeneratorParams generator;
  std::size_t workers = 1;
};

// Trains per_value models for every value in `grid`. Entry order is
// (grid value, replicate) regardless of worker count.
ShadowCorpus build_shadow_corpus(const std::vector<Rational>& grid, const ShadowConfig& cfg, std::uint64_t seed);

// Restricts a corpus to the listed grid values (kept in grid order).
ShadowCorpus filter_corpus(const ShadowCorpus& corpus, const std::vector<Rational>& keep);

// Deterministic per-class split; `train_fraction` of each grid value's entries
// go to the first corpus.
std::pair<ShadowCorpus, ShadowCorpus> split_corpus(const ShadowCorpus& corpus, double train_fraction,
                                                   std::uint64_t seed);

}  // namespace propattest::model
