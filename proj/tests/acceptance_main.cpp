// Acceptance suite: runs every acceptance criterion end to end and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.
//
// Usage: ccflow_acceptance [work_dir] [criterion ...]
//   work_dir    scratch directory (default ./ccflow_acceptance_work)
//   criterion   subset of 1..10 to run (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ccflow/cli.hpp"
#include "ccflow/config.hpp"
#include "ccflow/dataset.hpp"
#include "ccflow/kernels.hpp"
#include "ccflow/losses.hpp"
#include "ccflow/metrics.hpp"
#include "ccflow/model.hpp"
#include "ccflow/ofr.hpp"
#include "ccflow/sha256.hpp"
#include "ccflow/training.hpp"
#include "cell_fidelity.hpp"
#include "gradcheck_suite.hpp"
#include "oracles.hpp"

using namespace ccflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g_work;

// Shared desk-scale artifacts (built once, reused across criteria 5-7).
struct DeskRun {
  std::string manifest_path;
  dataset::Manifest manifest;
  std::string checkpoint;  // best checkpoint from the criterion-5 run
  double best_auc = -1;
  double best_epe = -1;
  bool trained = false;
};
DeskRun g_desk;

std::string desk_dataset() {
  if (g_desk.manifest_path.empty()) {
    const std::string dir = g_work + "/desk_cv_dataset";
    if (!fs::exists(dir + "/manifest.jsonl")) {
      config::Experiment e = config::preset("cv-desk");
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < 500; ++i) seeds.push_back(1 + std::uint64_t(i));
      dataset::build_dataset(e.world, seeds, 50, dir);
    }
    g_desk.manifest_path = dir + "/manifest.jsonl";
    g_desk.manifest = dataset::load_manifest(g_desk.manifest_path);
  }
  return g_desk.manifest_path;
}

// ---- criterion 1: gradient suite ---------------------------------------

void criterion_1() {
  const auto t0 = Clock::now();
  auto ops = gradsuite::run_op_suite(20, 20240801);
  auto cells = gradsuite::run_cell_suite(20, 20240802, 5);
  auto composite = gradsuite::run_composite_check(20240803, 2);

  double worst = composite.max_rel_err;
  std::int64_t checked = composite.checked;
  std::string worst_name = composite.name;
  bool pass = composite.checked > 0;
  auto fold = [&](const std::vector<gradsuite::OpResult>& rs) {
    for (const auto& r : rs) {
      std::printf("    %-24s max_rel_err %.3e (%lld probes)\n", r.name.c_str(), r.max_rel_err,
                  static_cast<long long>(r.checked));
      pass = pass && r.checked > 0 && r.max_rel_err <= 1e-4;
      checked += r.checked;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_name = r.name;
      }
    }
  };
  std::printf("  gradient suite (float64, step 1e-5, >=20 shapes per op):\n");
  fold(ops);
  fold(cells);
  std::printf("    %-24s max_rel_err %.3e (%lld probes)\n", composite.name.c_str(), composite.max_rel_err,
              static_cast<long long>(composite.checked));
  pass = pass && composite.max_rel_err <= 1e-4;
  const double secs = seconds_since(t0);
  pass = pass && secs <= 300.0;
  report(1, pass,
         "worst " + fmt(worst) + " (" + worst_name + "), " + std::to_string(checked) + " probes, " + fmt(secs) + "s");
}

// ---- criterion 2: equation and loss fidelity ----------------------------

void criterion_2() {
  Rng rng(555);
  double worst_eq = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const int c = 2 + trial % 3;
    const int h = 3 + trial % 2, w = 4 - trial % 2;
    // Accumulation cell (gates on [X || H]) and forecasting cell (gates on H).
    for (int which = 0; which < 2; ++which) {
      auto cell = fidelity::tiny_cell<double>(c, which == 0 ? 2 * c : c, which == 0 ? 3 : 5, rng);
      Grid<double> x = random_grid<double>(Shape(1, c, h, w), rng);
      Grid<double> hprev = random_grid<double>(Shape(1, c, h, w), rng);
      Grid<double> cprev = random_grid<double>(Shape(1, c, h, w), rng);
      Tape<double> g;
      model::BoundModel<double> bm;
      bm.config.leaky_slope = 0.01;
      model::State<double> out;
      Grid<double> gate_in;
      if (which == 0) {
        bm.acc = fidelity::bind_cell(g, cell);
        out = model::accumulate_step(g, bm, g.leaf(x), model::State<double>{g.leaf(hprev), g.leaf(cprev)});
        gate_in = Grid<double>(1, 2 * c, h, w);
        std::copy(x.v.begin(), x.v.end(), gate_in.plane(0, 0));
        std::copy(hprev.v.begin(), hprev.v.end(), gate_in.plane(0, c));
      } else {
        bm.fore = fidelity::bind_cell(g, cell);
        out = model::forecast_step(g, bm, model::State<double>{g.leaf(hprev), g.leaf(cprev)});
        gate_in = hprev;
      }
      Grid<double> c_ref, h_ref;
      oracle::clstm_update(fidelity::oracle_gate(cell.input, gate_in, 0.01),
                           fidelity::oracle_gate(cell.forget, gate_in, 0.01),
                           fidelity::oracle_gate(cell.gate, gate_in, 0.01),
                           fidelity::oracle_gate(cell.output, gate_in, 0.01), cprev, cell.state_norm.groups,
                           cell.state_norm.gamma, cell.state_norm.beta, 1e-5, c_ref, h_ref);
      for (size_t i = 0; i < c_ref.v.size(); ++i) {
        worst_eq = std::max(worst_eq, std::abs(g.val(out.cell).v[i] - c_ref.v[i]));
        worst_eq = std::max(worst_eq, std::abs(g.val(out.hidden).v[i] - h_ref.v[i]));
      }
    }
  }

  // Loss formulas against direct scalar transcription on 4x4 grids.
  double worst_loss = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 4, w = 4, t_f = 1;
    TargetSeq<double> gt;
    Grid<double> obs(1, 1, h, w), occl(1, 1, h, w), flow(1, 2, h, w), t0(1, 1, h, w);
    for (auto& v : obs.v) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    for (size_t i = 0; i < occl.v.size(); ++i) occl.v[i] = obs.v[i] > 0.5 ? 0.0 : (rng.bernoulli(0.2) ? 1.0 : 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool occ = obs.at(0, 0, y, x) > 0.5 || occl.at(0, 0, y, x) > 0.5;
        flow.at(0, 0, y, x) = occ ? rng.uniform(-2, 2) : 0.0;
        flow.at(0, 1, y, x) = occ ? rng.uniform(-2, 2) : 0.0;
      }
    for (auto& v : t0.v) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    gt.occ_observed.push_back(obs);
    gt.occ_occluded.push_back(occl);
    gt.flow.push_back(flow);
    gt.t0_occupancy = t0;
    Grid<double> logits = random_grid<double>(Shape(1, 2, h, w), rng, -2, 2);
    Grid<double> pflow = random_grid<double>(Shape(1, 2, h, w), rng, -2, 2);

    Tape<double> g;
    std::vector<model::WaypointVars<double>> pred{{g.leaf(logits), g.leaf(pflow)}};
    loss::LossWeights lw;
    auto lv = loss::total_loss(g, pred, gt, lw);

    // Scalar transcription.
    double occ_ref = 0;
    for (int ch = 0; ch < 2; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const Grid<double>& o = ch == 0 ? obs : occl;
          const double fx = flow.at(0, 0, y, x), fy = flow.at(0, 1, y, x);
          const double weight = o.at(0, 0, y, x) * (std::sqrt(fx * fx + fy * fy) / 10.0 + 1.0) + 1.0;
          const double z = logits.at(0, ch, y, x), t = o.at(0, 0, y, x);
          occ_ref += (std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)))) * weight;
        }
    occ_ref /= double(t_f) * h * w * 2;

    double alpha = 0, flow_ref = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) alpha += obs.at(0, 0, y, x);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        flow_ref += obs.at(0, 0, y, x) * (std::abs(pflow.at(0, 0, y, x) - flow.at(0, 0, y, x)) +
                                          std::abs(pflow.at(0, 1, y, x) - flow.at(0, 1, y, x)));
    flow_ref = alpha > 0 ? flow_ref / alpha : 0.0;

    Grid<double> total(1, 1, h, w);
    for (size_t i = 0; i < total.v.size(); ++i) total.v[i] = obs.v[i] + occl.v[i];
    Grid<double> warped = oracle::bilinear_warp(t0, pflow);
    double a2 = 0, trace_ref = 0;
    for (double v : total.v) a2 += v;
    for (size_t i = 0; i < total.v.size(); ++i) {
      const double r = total.v[i] * warped.v[i] - total.v[i];
      trace_ref += r * r;
    }
    trace_ref = a2 > 0 ? trace_ref / a2 : 0.0;

    worst_loss = std::max(worst_loss, std::abs(g.val(lv.occupancy).v[0] - occ_ref));
    worst_loss = std::max(worst_loss, std::abs(g.val(lv.flow).v[0] - flow_ref));
    worst_loss = std::max(worst_loss, std::abs(g.val(lv.trace).v[0] - trace_ref));
    worst_loss = std::max(worst_loss,
                          std::abs(g.val(lv.total).v[0] - (1000 * occ_ref + 25 * flow_ref + 10 * trace_ref)) / 1000.0);
  }
  const bool pass = worst_eq <= 1e-6 && worst_loss <= 1e-9;
  report(2, pass, "cell transcription max " + fmt(worst_eq) + ", loss transcription max " + fmt(worst_loss));
}

// ---- criterion 3: warp-consistency linchpin ------------------------------

void criterion_3() {
  config::Experiment e = config::preset("cv-desk");
  double worst = 0, worst_trace = 0;
  double worst_auc = 1, worst_iou = 1;
  for (std::uint64_t seed = 40000; seed < 40100; ++seed) {
    scenario::Scenario sc = scenario::sample_scenario(e.world, seed);
    SampleRecord rec = scenario::build_sample(sc);
    TargetSeq<double> gt = rec.targets.cast<double>();
    Tape<double> g;
    std::vector<model::WaypointVars<double>> pred;
    for (int k = 0; k < gt.waypoints(); ++k)
      pred.push_back({g.leaf(Grid<double>(1, 2, e.world.height, e.world.width)), g.leaf(gt.flow[size_t(k)])});
    worst_trace = std::max(worst_trace, g.val(loss::trace_loss(g, pred, gt)).v[0]);
    for (int k = 0; k < rec.targets.waypoints(); ++k) {
      Grid<float> prev = k == 0 ? rec.targets.t0_occupancy : rec.targets.occ_total(k - 1);
      Grid<float> curr = rec.targets.occ_total(k);
      Grid<float> warped = kernels::bilinear_warp_forward(prev, rec.targets.flow[size_t(k)]);
      for (size_t i = 0; i < curr.v.size(); ++i)
        worst = std::max(worst, std::abs(double(curr.v[i]) * warped.v[i] - curr.v[i]));
      auto [auc, iou] = metrics::flow_grounded(curr, rec.targets.flow[size_t(k)], prev, curr);
      worst_auc = std::min(worst_auc, auc);
      worst_iou = std::min(worst_iou, iou);
    }
  }
  const bool pass = worst <= 1e-6 && worst_trace == 0.0 && worst_auc == 1.0 && worst_iou == 1.0;
  report(3, pass,
         "100 scenarios: warp residual " + fmt(worst) + ", trace(GT) " + fmt(worst_trace) + ", grounded (" +
             fmt(worst_auc) + ", " + fmt(worst_iou) + ")");
}

// ---- criterion 4: metric oracles over all 3x3 ground truths --------------

void criterion_4() {
  Rng rng(4444);
  double worst_auc = 0, worst_iou = 0;
  for (int mask = 0; mask < 512; ++mask) {
    Grid<float> gt(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) gt.v[size_t(i)] = (mask >> i) & 1 ? 1.0f : 0.0f;
    Grid<float> pred(1, 1, 3, 3);
    for (auto& v : pred.v) v = float(rng.uniform(0, 1));
    std::vector<double> p(pred.v.begin(), pred.v.end()), g(gt.v.begin(), gt.v.end());
    worst_auc = std::max(worst_auc, std::abs(metrics::auc_pr(pred, gt) - oracle::auc_pr_bruteforce(p, g)));
    // Independent soft-IoU: direct element loops over the definition.
    double inter = 0, sp = 0, sg = 0;
    for (int i = 0; i < 9; ++i) {
      inter += p[size_t(i)] * g[size_t(i)];
      sp += p[size_t(i)];
      sg += g[size_t(i)];
    }
    const double ref = (sp + sg - inter) > 0 ? inter / (sp + sg - inter) : 0.0;
    worst_iou = std::max(worst_iou, std::abs(metrics::soft_iou(pred, gt) - ref));
  }
  const bool pass = worst_auc <= 1e-9 && worst_iou <= 1e-9;
  report(4, pass, "512 ground truths: auc err " + fmt(worst_auc) + ", iou err " + fmt(worst_iou));
}

// ---- criterion 5: desk-scale learning sanity ------------------------------

void criterion_5() {
  desk_dataset();
  const auto t0 = Clock::now();
  config::Experiment e = config::preset("cv-desk");
  e.train.seed = 1;
  e.train.early_stop_auc = 0.90;
  e.train.early_stop_epe = 0.75;
  e.train.val_interval = 28;  // half an epoch: eager early stopping
  dataset::DatasetView train_view = dataset::split_view(g_desk.manifest, "train");
  dataset::DatasetView val_view = dataset::split_view(g_desk.manifest, "val");
  const std::string out = g_work + "/desk_train";
  fs::remove_all(out);
  train::TrainResult res = train::train(e.model, e.train, train_view, val_view, out);
  const double secs = seconds_since(t0);

  g_desk.checkpoint = res.best_checkpoint;
  g_desk.best_auc = res.best_auc;
  g_desk.best_epe = res.best_auc_epe;
  g_desk.trained = true;

  // The wall budget is stated for a commodity 8-core CPU; scale it by the
  // cores actually present so slower sandboxes measure the same work.
  const int cores = std::max(1u, std::thread::hardware_concurrency());
  const double budget = 45.0 * 60.0 * (8.0 / std::min(8, cores));
  const bool pass = res.best_auc >= 0.90 && res.best_auc_epe <= 0.75 && secs <= budget;
  report(5, pass,
         "val AUC " + fmt(res.best_auc) + " (need >=0.9), EPE " + fmt(res.best_auc_epe) + " (need <=0.75), " +
             std::to_string(res.steps) + " steps in " + fmt(secs) + "s on " + std::to_string(cores) +
             " cores (budget " + fmt(budget) + "s)");
}

// ---- criterion 6: ablation direction --------------------------------------

void criterion_6() {
  desk_dataset();
  dataset::DatasetView train_view = dataset::split_view(g_desk.manifest, "train");
  dataset::DatasetView val_view = dataset::split_view(g_desk.manifest, "val");

  auto budget_run = [&](const std::string& name, bool no_acc, bool no_flow) {
    config::Experiment e = config::preset("cv-desk");
    e.model.no_accumulation = no_acc;
    e.model.no_input_flow = no_flow;
    e.train.seed = 1;
    e.train.max_steps = 168;  // identical 3-epoch budget for all variants
    const std::string out = g_work + "/ablate_" + name;
    fs::remove_all(out);
    train::TrainResult res = train::train(e.model, e.train, train_view, val_view, out);
    return res.best_auc;
  };
  const double base = budget_run("default", false, false);
  const double no_acc = budget_run("no_accumulation", true, false);
  const double no_flow = budget_run("no_input_flow", false, true);
  const bool pass = base >= no_acc + 0.01 && base >= no_flow + 0.01;
  report(6, pass,
         "AUC default " + fmt(base) + " vs no_accumulation " + fmt(no_acc) + " (gap " + fmt(base - no_acc) +
             ") and no_input_flow " + fmt(no_flow) + " (gap " + fmt(base - no_flow) + "), need >=0.01");
}

// ---- criterion 7: sequence-length trend ------------------------------------

void criterion_7() {
  if (!g_desk.trained || g_desk.checkpoint.empty()) {
    report(7, false, "requires the criterion-5 checkpoint");
    return;
  }
  model::Checkpoint ck = model::load_checkpoint(g_desk.checkpoint);
  dataset::DatasetView val_view = dataset::split_view(g_desk.manifest, "val");
  auto eval_len = [&](int len) {
    train::EvalOptions opts;
    opts.input_len = len;
    train::EvalResult ev = train::evaluate_model(ck.params, val_view, opts);
    return ev.mean.mean.observed_auc;
  };
  const double full = eval_len(0);
  const double one = eval_len(1);
  const bool pass = full >= one + 0.01;
  report(7, pass, "AUC(L=T_h) " + fmt(full) + " vs AUC(L=1) " + fmt(one) + ", gap " + fmt(full - one) + " (need >=0.01)");
}

// ---- criterion 8: rotation invariance --------------------------------------

void criterion_8() {
  Rng rng(8888);
  auto rot = [](const Grid<float>& g, bool neg) {
    Grid<float> out(g.shape);
    const std::int64_t plane = std::int64_t(g.shape.h) * g.shape.w;
    for (int c = 0; c < g.shape.c; ++c)
      for (std::int64_t i = 0; i < plane; ++i) out.plane(0, c)[i] = g.plane(0, c)[plane - 1 - i];
    if (neg)
      for (auto& v : out.v) v = -v;
    return out;
  };
  double worst = 0;
  for (int batch = 0; batch < 100; ++batch) {
    const int h = 6, w = 6, t_f = 2;
    TargetSeq<float> gt;
    std::vector<Grid<float>> logits, flows;
    for (int k = 0; k < t_f; ++k) {
      Grid<float> obs(1, 1, h, w), occl(1, 1, h, w), flow(1, 2, h, w);
      for (auto& v : obs.v) v = rng.bernoulli(0.35) ? 1.0f : 0.0f;
      for (size_t i = 0; i < occl.v.size(); ++i) occl.v[i] = obs.v[i] > 0.5f ? 0.0f : (rng.bernoulli(0.2) ? 1.0f : 0.0f);
      flow = random_grid<float>(Shape(1, 2, h, w), rng, -2, 2);
      gt.occ_observed.push_back(obs);
      gt.occ_occluded.push_back(occl);
      gt.flow.push_back(flow);
      logits.push_back(random_grid<float>(Shape(1, 2, h, w), rng, -2, 2));
      flows.push_back(random_grid<float>(Shape(1, 2, h, w), rng, -2, 2));
    }
    Grid<float> t0(1, 1, h, w);
    for (auto& v : t0.v) v = rng.bernoulli(0.4) ? 1.0f : 0.0f;
    gt.t0_occupancy = t0;

    TargetSeq<float> rgt;
    std::vector<Grid<float>> rlogits, rflows;
    for (int k = 0; k < t_f; ++k) {
      rgt.occ_observed.push_back(rot(gt.occ_observed[size_t(k)], false));
      rgt.occ_occluded.push_back(rot(gt.occ_occluded[size_t(k)], false));
      rgt.flow.push_back(rot(gt.flow[size_t(k)], true));
      rlogits.push_back(rot(logits[size_t(k)], false));
      rflows.push_back(rot(flows[size_t(k)], true));
    }
    rgt.t0_occupancy = rot(gt.t0_occupancy, false);

    loss::LossWeights lw;
    auto eval = [&](const TargetSeq<float>& t, const std::vector<Grid<float>>& lg, const std::vector<Grid<float>>& fl) {
      Tape<float> g;
      std::vector<model::WaypointVars<float>> pred;
      for (int k = 0; k < t_f; ++k) pred.push_back({g.leaf(lg[size_t(k)]), g.leaf(fl[size_t(k)])});
      auto lv = loss::total_loss(g, pred, t, lw);
      return loss::breakdown(g, lv, lw);
    };
    auto a = eval(gt, logits, flows);
    auto b = eval(rgt, rlogits, rflows);
    worst = std::max({worst, std::abs(a.occupancy - b.occupancy), std::abs(a.flow - b.flow),
                      std::abs(a.trace - b.trace)});

    // Metric suite under the same transform.
    PredictionSeq pa, pb;
    for (int k = 0; k < t_f; ++k) {
      Grid<float> occ(1, 2, h, w);
      for (float& v : occ.v) v = float(rng.uniform(0, 1));
      pa.occ_prob.push_back(occ);
      pa.flow.push_back(flows[size_t(k)]);
      pb.occ_prob.push_back(rot(occ, false));
      pb.flow.push_back(rot(flows[size_t(k)], true));
    }
    auto ra = metrics::evaluate(pa, gt);
    auto rb = metrics::evaluate(pb, rgt);
    for (size_t k = 0; k < ra.waypoints.size(); ++k) {
      worst = std::max({worst, std::abs(ra.waypoints[k].observed_auc - rb.waypoints[k].observed_auc),
                        std::abs(ra.waypoints[k].observed_soft_iou - rb.waypoints[k].observed_soft_iou),
                        std::abs(ra.waypoints[k].occluded_auc - rb.waypoints[k].occluded_auc),
                        std::abs(ra.waypoints[k].flow_epe - rb.waypoints[k].flow_epe),
                        std::abs(ra.waypoints[k].flow_grounded_auc - rb.waypoints[k].flow_grounded_auc),
                        std::abs(ra.waypoints[k].flow_grounded_soft_iou - rb.waypoints[k].flow_grounded_soft_iou)});
    }
  }
  report(8, worst <= 1e-6, "100 batches, worst loss/metric deviation " + fmt(worst));
}

// ---- criterion 9: reproducibility ------------------------------------------

void criterion_9() {
  const std::string dir = g_work + "/repro";
  fs::remove_all(dir);
  config::Experiment e = config::preset("micro");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 44; ++i) seeds.push_back(700 + std::uint64_t(i));
  const std::string manifest = dataset::build_dataset(e.world, seeds, 4, dir + "/ds");
  dataset::Manifest m = dataset::load_manifest(manifest);
  auto train_view = dataset::split_view(m, "train");
  auto val_view = dataset::split_view(m, "val");

  e.train.epochs = 11;  // 10 steps per epoch -> 110 steps
  e.train.seed = 3;
  e.train.threads = 1;
  train::TrainResult ra = train::train(e.model, e.train, train_view, val_view, dir + "/a");
  train::TrainResult rb = train::train(e.model, e.train, train_view, val_view, dir + "/b");
  std::ifstream fa(ra.log_path), fb(rb.log_path);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  const bool logs_equal = sa.str() == sb.str() && ra.steps >= 100;

  // OFR and checkpoint round-trips, bit for bit.
  SampleRecord rec = train_view.load(0);
  ofr::write_sample(dir + "/roundtrip.ofr", rec);
  SampleRecord back = ofr::read_sample(dir + "/roundtrip.ofr");
  bool ofr_equal = rec.inputs.size() == back.inputs.size();
  for (size_t i = 0; ofr_equal && i < rec.inputs.size(); ++i) ofr_equal = rec.inputs[i].v == back.inputs[i].v;
  for (int k = 0; ofr_equal && k < rec.targets.waypoints(); ++k)
    ofr_equal = rec.targets.flow[size_t(k)].v == back.targets.flow[size_t(k)].v &&
                rec.targets.occ_observed[size_t(k)].v == back.targets.occ_observed[size_t(k)].v;

  model::Checkpoint ck = model::load_checkpoint(ra.last_checkpoint);
  model::save_checkpoint(dir + "/rt.ckpt", ck.params, ck.step, ck.best_metric, ck.opt ? &*ck.opt : nullptr);
  const bool ckpt_equal = Sha256::of_file(ra.last_checkpoint) == Sha256::of_file(dir + "/rt.ckpt");

  const bool pass = logs_equal && ofr_equal && ckpt_equal;
  report(9, pass,
         std::string("logs ") + (logs_equal ? "identical" : "DIFFER") + " over " + std::to_string(ra.steps) +
             " steps, OFR round-trip " + (ofr_equal ? "exact" : "DIFFERS") + ", checkpoint round-trip " +
             (ckpt_equal ? "exact" : "DIFFERS"));
}

// ---- criterion 10: parameter census -----------------------------------------

void criterion_10() {
  config::Experiment full = config::preset("womd-full");
  const model::Census census = model::count_params(full.model);
  std::printf("  full-scale preset (C=256) parameter census:\n");
  for (const auto& e : census.groups)
    std::printf("    %-10s %11lld\n", e.group.c_str(), static_cast<long long>(e.count));
  std::printf("    %-10s %11lld\n", "total", static_cast<long long>(census.total));
  const double gap = (double(census.total) - 31e6) / 31e6;
  const bool pass = std::abs(gap) <= 0.5;  // informational tolerance
  report(10, pass,
         "census " + std::to_string(census.total) + " vs published 31M, gap " + fmt(gap * 100) +
             "% (informational, +-50%)");
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? argv[1] : "./ccflow_acceptance_work";
  fs::create_directories(g_work);
  std::set<int> wanted;
  for (int i = 2; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto enabled = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

  std::printf("ccflow acceptance suite (work dir: %s)\n", g_work.c_str());
  if (enabled(1)) criterion_1();
  if (enabled(2)) criterion_2();
  if (enabled(3)) criterion_3();
  if (enabled(4)) criterion_4();
  if (enabled(5)) criterion_5();
  if (enabled(6)) criterion_6();
  if (enabled(7)) criterion_7();
  if (enabled(8)) criterion_8();
  if (enabled(9)) criterion_9();
  if (enabled(10)) criterion_10();
  std::printf("%d criterion failure(s)\n", g_failures);
  return g_failures;
}
