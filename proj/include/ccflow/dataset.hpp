#pragma once

// Dataset builds: one OFR file per scenario seed plus a JSON-lines manifest
// (header record with the config hash, then one {path, split, seed, sha256}
// record per sample).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccflow/sample.hpp"
#include "ccflow/scenario.hpp"

namespace ccflow::dataset {

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  std::string split;
  std::uint64_t seed = 0;
  std::string sha256;
};

struct Manifest {
  std::string dir;
  std::string config_hash;
  DatasetMeta meta;
  std::vector<ManifestEntry> entries;

  std::vector<size_t> split_indices(const std::string& split) const;
};

// Generates len(seeds) samples; the last val_count seeds become the "val"
// split. Returns the manifest path.
std::string build_dataset(const scenario::ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                          int val_count, const std::string& out_dir, int threads = 0);

Manifest load_manifest(const std::string& manifest_path);

// Lazy view over one split.
struct DatasetView {
  const Manifest* manifest = nullptr;
  std::vector<size_t> indices;

  size_t size() const { return indices.size(); }
  SampleRecord load(size_t i) const;
  std::uint64_t seed(size_t i) const { return manifest->entries[indices[i]].seed; }
};

DatasetView split_view(const Manifest& m, const std::string& split);

// Distribution report: reverse-flow magnitude histogram over occupied
// future cells (fixed bin edges 0, 0.25, 0.5, 1, 2, 4, 8, 16, inf) and
// spatial density count grids for the future observed/occluded channels.
struct StatsReport {
  static constexpr std::array<double, 8> kBinEdges = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  std::array<std::int64_t, 8> flow_hist{};
  Grid<float> density_observed;
  Grid<float> density_occluded;
  std::int64_t occupied_cells = 0;
  std::int64_t sample_count = 0;
};

// Folds one record's future frames into the report (density grids must be
// pre-sized to the record geometry).
void accumulate_stats(StatsReport& rep, const SampleRecord& rec);

StatsReport dataset_stats(const Manifest& m);

}  // namespace ccflow::dataset
