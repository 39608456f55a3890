#include "propattest/model/shadow.hpp"

#include <algorithm>
#include <numeric>

#include "propattest/common/error.hpp"
#include "propattest/common/parallel.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::model {

std::vector<std::size_t> ShadowCorpus::counts_per_value() const {
  std::vector<std::size_t> counts(grid.size(), 0);
  for (const auto& e : entries) ++counts.at(e.grid_index);
  return counts;
}

Bytes ShadowCorpus::serialize() const {
  ByteWriter w;
  w.magic("SHC1");
  w.u32(static_cast<std::uint32_t>(grid.size()));
  for (const auto& g : grid) {
    w.i64(g.num());
    w.i64(g.den());
  }
  w.u32(static_cast<std::uint32_t>(entries.size()));
  std::size_t rows = entries.empty() ? 0 : entries.front().feature.rows;
  std::size_t cols = entries.empty() ? 0 : entries.front().feature.cols;
  w.u32(static_cast<std::uint32_t>(rows));
  w.u32(static_cast<std::uint32_t>(cols));
  for (const auto& e : entries) {
    if (e.feature.rows != rows || e.feature.cols != cols) throw ShapeMismatch("corpus features differ in shape");
    w.u32(static_cast<std::uint32_t>(e.grid_index));
    w.f64s(e.feature.values);
  }
  return std::move(w).take();
}

ShadowCorpus ShadowCorpus::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("SHC1");
  ShadowCorpus c;
  c.grid.resize(r.u32());
  for (auto& g : c.grid) {
    auto num = r.i64();
    auto den = r.i64();
    g = Rational(num, den);
  }
  std::size_t count = r.u32();
  std::size_t rows = r.u32();
  std::size_t cols = r.u32();
  c.entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ShadowEntry e;
    e.grid_index = r.u32();
    if (e.grid_index >= c.grid.size()) throw IoError("corpus entry references unknown grid value");
    e.feature = {rows, cols, r.f64s(rows * cols)};
    c.entries.push_back(std::move(e));
  }
  r.expect_done();
  return c;
}

ShadowCorpus build_shadow_corpus(const std::vector<Rational>& grid, const ShadowConfig& cfg, std::uint64_t seed) {
  if (cfg.per_value == 0) throw InvalidArgument("per_value must be at least 1");
  if (grid.empty()) throw InvalidArgument("empty grid");
  std::vector<std::size_t> dims{cfg.dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);

  const std::size_t total = grid.size() * cfg.per_value;
  ShadowCorpus corpus{grid, std::vector<ShadowEntry>(total)};
  parallel_for(total, cfg.workers, [&](std::size_t job) {
    std::size_t gi = job / cfg.per_value;
    std::size_t rep = job % cfg.per_value;
    try {
      auto ds = data::sample_dataset(grid[gi], cfg.records, cfg.dim, derive_seed(seed, "shadow-data", job),
                                     cfg.generator);
      auto trained = train_mlp(ds, dims, cfg.train, derive_seed(seed, "shadow-model", job));
      corpus.entries[job] = {extract_first_layer(trained.model), gi};
    } catch (const TrainingFailure& e) {
      throw TrainingFailure("shadow model for grid value " + grid[gi].to_string() + " replicate " +
                                std::to_string(rep) + ": " + e.what(),
                            e.epoch());
    }
  });
  return corpus;
}

ShadowCorpus filter_corpus(const ShadowCorpus& corpus, const std::vector<Rational>& keep) {
  ShadowCorpus out;
  std::vector<std::ptrdiff_t> remap(corpus.grid.size(), -1);
  for (std::size_t i = 0; i < corpus.grid.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), corpus.grid[i]) != keep.end()) {
      remap[i] = static_cast<std::ptrdiff_t>(out.grid.size());
      out.grid.push_back(corpus.grid[i]);
    }
  }
  for (const auto& e : corpus.entries) {
    if (remap[e.grid_index] >= 0) out.entries.push_back({e.feature, static_cast<std::size_t>(remap[e.grid_index])});
  }
  return out;
}

std::pair<ShadowCorpus, ShadowCorpus> split_corpus(const ShadowCorpus& corpus, double train_fraction,
                                                   std::uint64_t seed) {
  ShadowCorpus a{corpus.grid, {}}, b{corpus.grid, {}};
  Prng rng(seed);
  for (std::size_t gi = 0; gi < corpus.grid.size(); ++gi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
      if (corpus.entries[i].grid_index == gi) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(idx.size()) + 0.5);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) (k < cut ? a : b).entries.push_back(corpus.entries[idx[k]]);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace propattest::model
