#include "ccflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ccflow/config.hpp"
#include "ccflow/dataset.hpp"
#include "ccflow/ofr.hpp"
#include "ccflow/sha256.hpp"
#include "ccflow/svg.hpp"
#include "ccflow/training.hpp"
#include "json.hpp"

namespace ccflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

config::Experiment resolve_experiment(const std::string& preset, const std::string& config_path) {
  config::Experiment e = config::preset(preset.empty() ? "cv-desk" : preset);
  if (!config_path.empty()) config::apply_kv(e, config::KvConfig::parse_file(config_path));
  return e;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

// Echoes the resolved configuration and input hashes into the run directory.
void write_run_manifest(const std::string& out_dir, const std::string& command, std::uint64_t seed,
                        const config::Experiment* exp, const std::vector<std::pair<std::string, std::string>>& inputs) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  json manifest;
  manifest["command"] = command;
  manifest["seed"] = seed;
  if (exp) {
    const std::string resolved = config::to_kv(*exp).serialize();
    const std::string cfg_path = (fs::path(out_dir) / "config_resolved.cfg").string();
    std::ofstream cf(cfg_path, std::ios::trunc);
    cf << resolved;
    if (!cf) throw IoError("cannot write " + cfg_path);
    manifest["config_hash"] = Sha256::of_string(resolved);
  }
  json in = json::object();
  for (const auto& [name, path] : inputs)
    if (!path.empty()) in[name] = Sha256::of_file(path);
  manifest["inputs"] = in;
  const std::string path = (fs::path(out_dir) / "run_manifest.json").string();
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path);
}

// Aligns the experiment's world (and therefore model geometry) with an
// existing dataset.
void sync_world_to_manifest(config::Experiment& e, const dataset::Manifest& m) {
  e.world.mode = m.meta.mode;
  e.world.height = m.meta.height;
  e.world.width = m.meta.width;
  e.world.meters_per_cell = m.meta.meters_per_cell;
  e.world.t_h = m.meta.t_h;
  e.world.t_f = m.meta.t_f;
  e.world.dt_history = m.meta.dt_history;
  e.world.dt_forecast = m.meta.dt_forecast;
  e.sync_model_to_world();
}

void write_report_csv(const std::string& path, const std::vector<std::string>& sample_names,
                      const std::vector<metrics::WaypointReport>& per_sample, const metrics::WaypointReport& mean) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << metrics::report_csv_header() << "\n";
  for (size_t i = 0; i < per_sample.size(); ++i) {
    for (size_t k = 0; k < per_sample[i].waypoints.size(); ++k)
      out << metrics::report_csv_row(sample_names[i], std::to_string(k + 1), per_sample[i].waypoints[k]) << "\n";
  }
  for (size_t k = 0; k < mean.waypoints.size(); ++k)
    out << metrics::report_csv_row("mean", std::to_string(k + 1), mean.waypoints[k]) << "\n";
  out << metrics::report_csv_row("mean", "mean", mean.mean) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void print_census(const model::ModelConfig& cfg) {
  const model::Census census = model::count_params(cfg);
  std::cout << "parameters: " << census.total;
  std::cout << " (";
  for (size_t i = 0; i < census.groups.size(); ++i) {
    if (i) std::cout << ", ";
    std::cout << census.groups[i].group << " " << census.groups[i].count;
  }
  std::cout << ")\n";
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < idx.size()) {
      size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (double(i) + double(j)) / 2.0 + 1.0;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  double mx = 0, my = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= double(rx.size());
  my /= double(ry.size());
  double num = 0, dx = 0, dy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return (dx > 0 && dy > 0) ? num / std::sqrt(dx * dy) : 0.0;
}

struct EvalRun {
  train::EvalResult result;
  std::vector<std::string> names;
};

EvalRun run_evaluation(model::ModelParams<float>* params, const dataset::Manifest& m, const std::string& split,
                       const train::EvalOptions& opts) {
  dataset::DatasetView view = dataset::split_view(m, split);
  if (view.size() == 0) throw IoError("split '" + split + "' is empty");
  EvalRun run;
  model::ModelParams<float> dummy;
  run.result = train::evaluate_model(params ? *params : dummy, view, opts);
  for (size_t i = 0; i < view.size(); ++i) run.names.push_back(std::to_string(view.seed(i)));
  return run;
}

}  // namespace

int run_gen(const GenArgs& args) {
  return guarded([&] {
    if (args.out_dir.empty()) throw ConfigError("gen: --out is required");
    if (args.count < 1) throw ConfigError("gen: --count must be >= 1");
    config::Experiment e = resolve_experiment(args.preset, args.config_path);
    const int val = args.val_count >= 0 ? args.val_count : std::max(1, args.count / 10);
    if (val > args.count) throw ConfigError("gen: val count exceeds total count");
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < args.count; ++i) seeds.push_back(args.seed + std::uint64_t(i));
    const std::string manifest = dataset::build_dataset(e.world, seeds, val, args.out_dir, args.threads);
    write_run_manifest(args.out_dir, "gen", args.seed, &e, {{"dataset_manifest", manifest}});
    std::cout << manifest << "\n";
  });
}

int run_train(const TrainArgs& args) {
  return guarded([&] {
    if (args.dataset_manifest.empty() || args.out_dir.empty())
      throw ConfigError("train: --dataset and --out are required");
    config::Experiment e = resolve_experiment(args.preset, args.config_path);
    dataset::Manifest m = dataset::load_manifest(args.dataset_manifest);
    sync_world_to_manifest(e, m);

    if (!args.ablate.empty()) {
      if (args.ablate == "no_accumulation") e.model.no_accumulation = true;
      else if (args.ablate == "direct_multiframe") e.model.direct_multiframe = true;
      else if (args.ablate == "no_input_flow") e.model.no_input_flow = true;
      else throw ConfigError("train: unknown ablation '" + args.ablate + "'");
    }
    e.train.seed = args.seed;
    if (args.epochs >= 0) e.train.epochs = args.epochs;
    if (args.max_steps >= 0) e.train.max_steps = args.max_steps;
    if (args.early_stop_auc >= 0) e.train.early_stop_auc = args.early_stop_auc;
    if (args.early_stop_epe >= 0) e.train.early_stop_epe = args.early_stop_epe;
    if (args.threads >= 0) e.train.threads = args.threads;

    write_run_manifest(args.out_dir, "train", args.seed, &e, {{"dataset_manifest", args.dataset_manifest}});
    print_census(e.model);

    dataset::DatasetView train_view = dataset::split_view(m, "train");
    dataset::DatasetView val_view = dataset::split_view(m, "val");
    train::TrainResult res = train::train(e.model, e.train, train_view, val_view, args.out_dir);
    std::cout << "steps " << res.steps << " best_val_auc " << fmt(res.best_auc) << " best_val_epe "
              << fmt(res.best_auc_epe) << "\n";
    std::cout << "log " << res.log_path << "\n";
    if (!res.best_checkpoint.empty()) std::cout << "checkpoint " << res.best_checkpoint << "\n";
  });
}

int run_eval(const EvalArgs& args) {
  return guarded([&] {
    if (args.dataset_manifest.empty() || args.out_dir.empty())
      throw ConfigError("eval: --dataset and --out are required");
    if (args.checkpoint.empty() && !args.oracle) throw ConfigError("eval: need --checkpoint or --oracle");
    dataset::Manifest m = dataset::load_manifest(args.dataset_manifest);
    if (args.input_len > m.meta.t_h) throw IoError("input_len exceeds available frames");

    train::EvalOptions opts;
    opts.crop = args.crop;
    opts.input_len = args.input_len;
    opts.threads = args.threads;
    opts.oracle = args.oracle;

    model::ModelParams<float> params;
    model::Checkpoint ck;
    if (!args.oracle) {
      ck = model::load_checkpoint(args.checkpoint);
      params = std::move(ck.params);
    }
    EvalRun run = run_evaluation(args.oracle ? nullptr : &params, m, args.split, opts);
    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    write_report_csv((fs::path(args.out_dir) / "report.csv").string(), run.names, run.result.per_sample,
                     run.result.mean);
    write_run_manifest(args.out_dir, "eval", 0, nullptr,
                       {{"dataset_manifest", args.dataset_manifest}, {"checkpoint", args.checkpoint}});
    const auto& mm = run.result.mean.mean;
    std::cout << "observed_auc " << fmt(mm.observed_auc) << " observed_soft_iou " << fmt(mm.observed_soft_iou)
              << " occluded_auc " << fmt(mm.occluded_auc) << " occluded_soft_iou " << fmt(mm.occluded_soft_iou)
              << " flow_epe " << fmt(mm.flow_epe) << " flow_grounded_auc " << fmt(mm.flow_grounded_auc)
              << " flow_grounded_soft_iou " << fmt(mm.flow_grounded_soft_iou) << "\n";
  });
}

int run_sweep(const SweepArgs& args) {
  return guarded([&] {
    if (args.dataset_manifest.empty() || args.checkpoint.empty() || args.out_dir.empty())
      throw ConfigError("sweep-seqlen: --dataset, --checkpoint and --out are required");
    dataset::Manifest m = dataset::load_manifest(args.dataset_manifest);
    std::vector<int> lengths = args.lengths;
    if (lengths.empty())
      for (int l = 1; l <= m.meta.t_h; ++l) lengths.push_back(l);
    for (int l : lengths)
      if (l < 1 || l > m.meta.t_h)
        throw IoError("requested input length " + std::to_string(l) + " exceeds available frames (" +
                      std::to_string(m.meta.t_h) + ")");
    const int window = args.reset_window > 0 ? args.reset_window : m.meta.t_h;

    model::Checkpoint ck = model::load_checkpoint(args.checkpoint);
    std::error_code ec;
    fs::create_directories(args.out_dir, ec);

    std::vector<double> ls, aucs;
    const std::string path = (fs::path(args.out_dir) / "sweep.csv").string();
    std::ofstream out(path, std::ios::trunc);
    out << "input_len,state_mode,observed_auc,observed_soft_iou,occluded_auc,occluded_soft_iou,flow_epe,"
           "flow_grounded_auc,flow_grounded_soft_iou\n";
    for (int l : lengths) {
      for (int mode = 0; mode < 2; ++mode) {
        train::EvalOptions opts;
        opts.crop = args.crop;
        opts.input_len = l;
        opts.reset_window = mode == 1 ? window : 0;
        opts.threads = args.threads;
        EvalRun run = run_evaluation(&ck.params, m, args.split, opts);
        const auto& mm = run.result.mean.mean;
        out << l << "," << (mode == 0 ? "carry" : "reset") << "," << fmt(mm.observed_auc) << ","
            << fmt(mm.observed_soft_iou) << "," << fmt(mm.occluded_auc) << "," << fmt(mm.occluded_soft_iou) << ","
            << fmt(mm.flow_epe) << "," << fmt(mm.flow_grounded_auc) << "," << fmt(mm.flow_grounded_soft_iou) << "\n";
        if (mode == 0) {
          ls.push_back(l);
          aucs.push_back(mm.observed_auc);
        }
      }
    }
    const double rho = spearman(ls, aucs);
    out << "# spearman_len_vs_observed_auc," << fmt(rho) << "\n";
    if (!out) throw IoError("write failed: " + path);
    out.close();
    write_run_manifest(args.out_dir, "sweep-seqlen", 0, nullptr,
                       {{"dataset_manifest", args.dataset_manifest}, {"checkpoint", args.checkpoint}});
    std::cout << "sweep " << path << " spearman " << fmt(rho) << "\n";
  });
}

int run_curves(const CurvesArgs& args) {
  return guarded([&] {
    if (args.dataset_manifest.empty() || args.out_dir.empty())
      throw ConfigError("curves: --dataset and --out are required");
    if (args.checkpoint.empty() && !args.oracle) throw ConfigError("curves: need --checkpoint or --oracle");
    dataset::Manifest m = dataset::load_manifest(args.dataset_manifest);
    train::EvalOptions opts;
    opts.crop = args.crop;
    opts.threads = args.threads;
    opts.oracle = args.oracle;
    model::ModelParams<float> params;
    if (!args.oracle) {
      model::Checkpoint ck = model::load_checkpoint(args.checkpoint);
      params = std::move(ck.params);
    }
    EvalRun run = run_evaluation(args.oracle ? nullptr : &params, m, args.split, opts);

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    const std::string csv_path = (fs::path(args.out_dir) / "curves.csv").string();
    std::ofstream out(csv_path, std::ios::trunc);
    out << "waypoint,observed_auc,observed_soft_iou,occluded_auc,occluded_soft_iou,flow_epe,"
           "flow_grounded_auc,flow_grounded_soft_iou\n";
    std::vector<double> xs;
    std::vector<std::vector<double>> cols(7);
    for (size_t k = 0; k < run.result.mean.waypoints.size(); ++k) {
      const auto& w = run.result.mean.waypoints[k];
      out << (k + 1) << "," << fmt(w.observed_auc) << "," << fmt(w.observed_soft_iou) << "," << fmt(w.occluded_auc)
          << "," << fmt(w.occluded_soft_iou) << "," << fmt(w.flow_epe) << "," << fmt(w.flow_grounded_auc) << ","
          << fmt(w.flow_grounded_soft_iou) << "\n";
      xs.push_back(double(k + 1));
      cols[0].push_back(w.observed_auc);
      cols[1].push_back(w.observed_soft_iou);
      cols[2].push_back(w.occluded_auc);
      cols[3].push_back(w.occluded_soft_iou);
      cols[4].push_back(w.flow_epe);
      cols[5].push_back(w.flow_grounded_auc);
      cols[6].push_back(w.flow_grounded_soft_iou);
    }
    if (!out) throw IoError("write failed: " + csv_path);
    out.close();
    const char* names[7] = {"observed_auc",      "observed_soft_iou", "occluded_auc", "occluded_soft_iou",
                            "flow_epe",          "flow_grounded_auc", "flow_grounded_soft_iou"};
    for (int i = 0; i < 7; ++i) {
      svg::write_line_chart((fs::path(args.out_dir) / (std::string(names[i]) + ".svg")).string(), names[i],
                            "forecast waypoint", names[i], xs, {{names[i], cols[size_t(i)]}});
    }
    write_run_manifest(args.out_dir, "curves", 0, nullptr,
                       {{"dataset_manifest", args.dataset_manifest}, {"checkpoint", args.checkpoint}});
    std::cout << "curves " << csv_path << "\n";
  });
}

int run_stats(const StatsArgs& args) {
  return guarded([&] {
    if (args.dataset_manifest.empty() || args.out_dir.empty())
      throw ConfigError("stats: --dataset and --out are required");
    dataset::Manifest m = dataset::load_manifest(args.dataset_manifest);
    dataset::StatsReport rep = dataset::dataset_stats(m);
    std::error_code ec;
    fs::create_directories(args.out_dir, ec);

    const std::string hist_path = (fs::path(args.out_dir) / "flow_histogram.csv").string();
    std::ofstream hist(hist_path, std::ios::trunc);
    hist << "bin_lo,bin_hi,count\n";
    std::int64_t total = 0;
    for (size_t i = 0; i < rep.flow_hist.size(); ++i) {
      const double lo = dataset::StatsReport::kBinEdges[i];
      const std::string hi =
          i + 1 < dataset::StatsReport::kBinEdges.size() ? fmt(dataset::StatsReport::kBinEdges[i + 1]) : "inf";
      hist << fmt(lo) << "," << hi << "," << rep.flow_hist[i] << "\n";
      total += rep.flow_hist[i];
    }
    hist << "# occupied_cells," << rep.occupied_cells << "\n";
    if (!hist) throw IoError("write failed: " + hist_path);
    hist.close();

    ofr::PlaneSet density;
    density.meta = m.meta;
    density.channels = {"density/observed", "density/occluded"};
    density.planes = {rep.density_observed, rep.density_occluded};
    const std::string density_path = (fs::path(args.out_dir) / "density.ofr").string();
    ofr::write_planes(density_path, density);

    write_run_manifest(args.out_dir, "stats", 0, nullptr, {{"dataset_manifest", args.dataset_manifest}});
    std::cout << "samples " << rep.sample_count << " occupied_cells " << rep.occupied_cells << " hist_total " << total
              << "\n";
    std::cout << hist_path << "\n" << density_path << "\n";
  });
}

}  // namespace ccflow::cli
