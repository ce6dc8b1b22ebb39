#include "ccflow/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ccflow/ofr.hpp"
#include "ccflow/sha256.hpp"
#include "ccflow/threading.hpp"
#include "json.hpp"

namespace ccflow::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<size_t> Manifest::split_indices(const std::string& split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == split) out.push_back(i);
  return out;
}

std::string build_dataset(const scenario::ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                          int val_count, const std::string& out_dir, int threads) {
  if (val_count < 0 || val_count > static_cast<int>(seeds.size()))
    throw ConfigError("val_count out of range: " + std::to_string(val_count));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const size_t n = seeds.size();
  std::vector<ManifestEntry> entries(n);
  parallel_for(static_cast<std::int64_t>(n), threads, [&](std::int64_t i) {
    const std::uint64_t seed = seeds[static_cast<size_t>(i)];
    scenario::Scenario sc = scenario::sample_scenario(cfg, seed);
    SampleRecord rec = scenario::build_sample(sc);
    const std::string name = "sample_" + std::to_string(seed) + ".ofr";
    const std::string path = (fs::path(out_dir) / name).string();
    ofr::write_sample(path, rec);
    ManifestEntry& e = entries[static_cast<size_t>(i)];
    e.path = name;
    e.split = static_cast<size_t>(i) + static_cast<size_t>(val_count) >= n ? "val" : "train";
    e.seed = seed;
    e.sha256 = Sha256::of_file(path);
  });

  const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest_path);
  json head;
  head["config_hash"] = Sha256::of_string(cfg.canonical_string());
  head["count"] = n;
  const DatasetMeta meta = cfg.meta();
  head["frame_mode"] = frame_mode_name(meta.mode);
  head["height"] = meta.height;
  head["width"] = meta.width;
  head["meters_per_cell"] = meta.meters_per_cell;
  head["t_h"] = meta.t_h;
  head["t_f"] = meta.t_f;
  head["dt_history"] = meta.dt_history;
  head["dt_forecast"] = meta.dt_forecast;
  out << head.dump() << "\n";
  for (const ManifestEntry& e : entries) {
    json row;
    row["path"] = e.path;
    row["split"] = e.split;
    row["seed"] = e.seed;
    row["sha256"] = e.sha256;
    out << row.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + manifest_path);
  return manifest_path;
}

Manifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);
  Manifest m;
  m.dir = fs::path(manifest_path).parent_path().string();
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty manifest: " + manifest_path);
  json head = json::parse(line);
  m.config_hash = head.at("config_hash").get<std::string>();
  m.meta.mode = frame_mode_from(head.at("frame_mode").get<std::string>());
  m.meta.height = head.at("height").get<int>();
  m.meta.width = head.at("width").get<int>();
  m.meta.meters_per_cell = head.at("meters_per_cell").get<double>();
  m.meta.t_h = head.at("t_h").get<int>();
  m.meta.t_f = head.at("t_f").get<int>();
  m.meta.dt_history = head.at("dt_history").get<double>();
  m.meta.dt_forecast = head.at("dt_forecast").get<double>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    ManifestEntry e;
    e.path = row.at("path").get<std::string>();
    e.split = row.at("split").get<std::string>();
    e.seed = row.at("seed").get<std::uint64_t>();
    e.sha256 = row.at("sha256").get<std::string>();
    m.entries.push_back(std::move(e));
  }
  return m;
}

SampleRecord DatasetView::load(size_t i) const {
  const ManifestEntry& e = manifest->entries[indices[i]];
  return ofr::read_sample((fs::path(manifest->dir) / e.path).string());
}

DatasetView split_view(const Manifest& m, const std::string& split) {
  DatasetView v;
  v.manifest = &m;
  v.indices = m.split_indices(split);
  return v;
}

void accumulate_stats(StatsReport& rep, const SampleRecord& rec) {
  for (int k = 0; k < rec.targets.waypoints(); ++k) {
    const Grid<float>& obs = rec.targets.occ_observed[static_cast<size_t>(k)];
    const Grid<float>& occl = rec.targets.occ_occluded[static_cast<size_t>(k)];
    const Grid<float>& flow = rec.targets.flow[static_cast<size_t>(k)];
    const std::int64_t plane = static_cast<std::int64_t>(rec.meta.height) * rec.meta.width;
    for (std::int64_t j = 0; j < plane; ++j) {
      const bool occupied = obs.v[static_cast<size_t>(j)] > 0.5f || occl.v[static_cast<size_t>(j)] > 0.5f;
      if (!occupied) continue;
      rep.occupied_cells += 1;
      rep.density_observed.v[static_cast<size_t>(j)] += obs.v[static_cast<size_t>(j)];
      rep.density_occluded.v[static_cast<size_t>(j)] += occl.v[static_cast<size_t>(j)];
      const double fx = flow.plane(0, 0)[j];
      const double fy = flow.plane(0, 1)[j];
      const double mag = std::sqrt(fx * fx + fy * fy);
      size_t bin = StatsReport::kBinEdges.size() - 1;
      for (size_t bi = 0; bi + 1 < StatsReport::kBinEdges.size(); ++bi) {
        if (mag >= StatsReport::kBinEdges[bi] && mag < StatsReport::kBinEdges[bi + 1]) {
          bin = bi;
          break;
        }
      }
      rep.flow_hist[bin] += 1;
    }
  }
}

StatsReport dataset_stats(const Manifest& m) {
  StatsReport rep;
  rep.density_observed = Grid<float>(1, 1, m.meta.height, m.meta.width);
  rep.density_occluded = Grid<float>(1, 1, m.meta.height, m.meta.width);
  rep.sample_count = static_cast<std::int64_t>(m.entries.size());
  DatasetView all;
  all.manifest = &m;
  for (size_t i = 0; i < m.entries.size(); ++i) all.indices.push_back(i);
  for (size_t i = 0; i < all.size(); ++i) accumulate_stats(rep, all.load(i));
  return rep;
}

}  // namespace ccflow::dataset
