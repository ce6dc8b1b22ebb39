#include "ccflow/training.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ccflow/threading.hpp"

namespace ccflow::train {

namespace fs = std::filesystem;

namespace {

void rot180_plane(const float* src, float* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = src[n - 1 - i];
}

Grid<float> rot180_grid(const Grid<float>& g, bool negate = false) {
  Grid<float> out(g.shape);
  const std::int64_t plane = static_cast<std::int64_t>(g.shape.h) * g.shape.w;
  for (int b = 0; b < g.shape.b; ++b)
    for (int c = 0; c < g.shape.c; ++c) rot180_plane(g.plane(b, c), out.plane(b, c), plane);
  if (negate)
    for (float& x : out.v) x = -x;
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace

SampleRecord augment_rot180(const SampleRecord& rec) {
  SampleRecord out;
  out.meta = rec.meta;
  const auto schema = input_schema(rec.meta.mode);
  const std::int64_t plane = static_cast<std::int64_t>(rec.meta.height) * rec.meta.width;
  for (const Grid<float>& frame : rec.inputs) {
    Grid<float> rf(frame.shape);
    for (int b = 0; b < frame.shape.b; ++b) {
      for (int c = 0; c < frame.shape.c; ++c) {
        rot180_plane(frame.plane(b, c), rf.plane(b, c), plane);
        if (schema[static_cast<size_t>(c)].kind != ChannelKind::Scalar) {
          float* p = rf.plane(b, c);
          for (std::int64_t i = 0; i < plane; ++i) p[i] = -p[i];
        }
      }
    }
    out.inputs.push_back(std::move(rf));
  }
  out.targets.t0_occupancy = rot180_grid(rec.targets.t0_occupancy);
  for (int k = 0; k < rec.targets.waypoints(); ++k) {
    out.targets.occ_observed.push_back(rot180_grid(rec.targets.occ_observed[static_cast<size_t>(k)]));
    out.targets.occ_occluded.push_back(rot180_grid(rec.targets.occ_occluded[static_cast<size_t>(k)]));
    out.targets.flow.push_back(rot180_grid(rec.targets.flow[static_cast<size_t>(k)], true));
  }
  return out;
}

Grid<float> crop_center_grid(const Grid<float>& g, int h, int w) {
  if (h > g.shape.h || w > g.shape.w) throw ShapeError("crop larger than grid");
  const int y0 = (g.shape.h - h) / 2;
  const int x0 = (g.shape.w - w) / 2;
  Grid<float> out(g.shape.b, g.shape.c, h, w);
  for (int b = 0; b < g.shape.b; ++b)
    for (int c = 0; c < g.shape.c; ++c)
      for (int y = 0; y < h; ++y)
        std::copy(&g.at(b, c, y0 + y, x0), &g.at(b, c, y0 + y, x0) + w, &out.at(b, c, y, 0));
  return out;
}

TargetSeq<float> crop_targets(const TargetSeq<float>& t, int h, int w) {
  TargetSeq<float> out;
  for (const auto& g : t.occ_observed) out.occ_observed.push_back(crop_center_grid(g, h, w));
  for (const auto& g : t.occ_occluded) out.occ_occluded.push_back(crop_center_grid(g, h, w));
  for (const auto& g : t.flow) out.flow.push_back(crop_center_grid(g, h, w));
  out.t0_occupancy = crop_center_grid(t.t0_occupancy, h, w);
  return out;
}

EvalResult evaluate_model(model::ModelParams<float>& params, const dataset::DatasetView& view,
                          const EvalOptions& opts) {
  EvalResult res;
  res.per_sample.resize(view.size());
  parallel_for(static_cast<std::int64_t>(view.size()), opts.threads, [&](std::int64_t i) {
    SampleRecord rec = view.load(static_cast<size_t>(i));
    PredictionSeq pred;
    if (opts.oracle) {
      for (int k = 0; k < rec.targets.waypoints(); ++k) {
        Grid<float> occ(1, 2, rec.meta.height, rec.meta.width);
        const std::int64_t plane = static_cast<std::int64_t>(rec.meta.height) * rec.meta.width;
        std::copy(rec.targets.occ_observed[static_cast<size_t>(k)].v.begin(),
                  rec.targets.occ_observed[static_cast<size_t>(k)].v.end(), occ.plane(0, 0));
        std::copy(rec.targets.occ_occluded[static_cast<size_t>(k)].v.begin(),
                  rec.targets.occ_occluded[static_cast<size_t>(k)].v.end(), occ.plane(0, 1));
        pred.occ_prob.push_back(std::move(occ));
        pred.flow.push_back(rec.targets.flow[static_cast<size_t>(k)]);
        (void)plane;
      }
    } else {
      pred = model::infer(params, rec, opts.input_len, 0, opts.reset_window);
    }
    TargetSeq<float> gt = rec.targets;
    if (opts.crop > 0) {
      gt = crop_targets(gt, opts.crop, opts.crop);
      for (auto& g : pred.occ_prob) g = crop_center_grid(g, opts.crop, opts.crop);
      for (auto& g : pred.flow) g = crop_center_grid(g, opts.crop, opts.crop);
    }
    res.per_sample[static_cast<size_t>(i)] = metrics::evaluate(pred, gt);
  });

  // Per-waypoint means over samples, then the mean row across waypoints.
  if (!res.per_sample.empty()) {
    const size_t t_f = res.per_sample[0].waypoints.size();
    for (size_t k = 0; k < t_f; ++k) {
      std::vector<metrics::WaypointMetrics> column;
      for (const auto& rep : res.per_sample) column.push_back(rep.waypoints[k]);
      res.mean.waypoints.push_back(metrics::mean_of(column));
    }
    res.mean.mean = metrics::mean_of(res.mean.waypoints);
  }
  return res;
}

namespace {

struct SampleGrads {
  std::vector<Grid<float>> grads;
  loss::LossBreakdown breakdown;
};

SampleGrads run_sample(model::ModelParams<float>& params, const SampleRecord& rec, const TrainConfig& tcfg) {
  Tape<float> tape;
  model::BoundModel<float> bm = model::bind_params(tape, params, true);
  auto wps = model::forward(tape, bm, rec.inputs, rec.meta.t_f);
  TargetSeq<float> gt = rec.targets;
  if (tcfg.crop > 0) {
    gt = crop_targets(gt, tcfg.crop, tcfg.crop);
    for (auto& wp : wps) {
      wp.occ_logits = tape.crop_center(wp.occ_logits, tcfg.crop, tcfg.crop);
      wp.flow = tape.crop_center(wp.flow, tcfg.crop, tcfg.crop);
    }
  }
  loss::LossVars<float> lv = loss::total_loss(tape, wps, gt, tcfg.loss);
  tape.backward(lv.total);
  SampleGrads out;
  out.breakdown = loss::breakdown(tape, lv, tcfg.loss);
  out.grads.reserve(bm.order.size());
  for (Var v : bm.order) {
    if (tape.has_grad(v)) out.grads.push_back(tape.grad(v));
    else out.grads.emplace_back(tape.val(v).shape);  // parameter unused by this variant
  }
  return out;
}

}  // namespace

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg, const dataset::DatasetView& train_view,
                  const dataset::DatasetView& val_view, const std::string& out_dir) {
  mcfg.validate();
  if (tcfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (tcfg.lr <= 0 || tcfg.eta_min() <= 0 || tcfg.eta_min() >= tcfg.lr)
    throw ConfigError("require lr > eta_min > 0");
  if (train_view.size() == 0) throw ConfigError("empty training split");
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  model::ModelParams<float> params = model::init_params<float>(mcfg, tcfg.seed);
  std::vector<Grid<float>*> param_ptrs;
  visit_params(params, [&](const std::string&, Grid<float>& g, model::ParamKind) { param_ptrs.push_back(&g); });
  AdamWState<float> opt = AdamWState<float>::init_like(param_ptrs);

  const int batch = std::min<int>(tcfg.batch_size, static_cast<int>(train_view.size()));
  const std::int64_t steps_per_epoch = std::max<std::int64_t>(1, static_cast<std::int64_t>(train_view.size()) / batch);

  TrainResult result;
  result.log_path = (fs::path(out_dir) / "train_log.csv").string();
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + result.log_path);
  log << "step,epoch,lr,loss_total,loss_occ,loss_flow,loss_trace,val_observed_auc,val_observed_soft_iou,"
         "val_occluded_auc,val_occluded_soft_iou,val_flow_epe,val_flow_grounded_auc,val_flow_grounded_soft_iou,"
         "checkpoint\n";

  Rng rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<size_t> order(train_view.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
  const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
  std::int64_t global_step = 0;
  bool stop = false;

  auto validate = [&](int epoch) {
    if (val_view.size() == 0) return;
    EvalOptions eo;
    eo.crop = tcfg.crop;
    eo.threads = tcfg.threads;
    EvalResult ev = evaluate_model(params, val_view, eo);
    const auto& m = ev.mean.mean;
    bool saved = false;
    if (m.observed_auc > result.best_auc) {
      result.best_auc = m.observed_auc;
      result.best_auc_epe = m.flow_epe;
      model::save_checkpoint(best_path, params, global_step, result.best_auc);
      result.best_checkpoint = best_path;
      result.checkpoint_saves += 1;
      saved = true;
    }
    log << global_step << "," << epoch << ",,,,,," << fmt(m.observed_auc) << "," << fmt(m.observed_soft_iou) << ","
        << fmt(m.occluded_auc) << "," << fmt(m.occluded_soft_iou) << "," << fmt(m.flow_epe) << ","
        << fmt(m.flow_grounded_auc) << "," << fmt(m.flow_grounded_soft_iou) << "," << (saved ? 1 : 0) << "\n";
    log.flush();
    if (tcfg.early_stop_auc > 0 && m.observed_auc >= tcfg.early_stop_auc &&
        (tcfg.early_stop_epe <= 0 || m.flow_epe <= tcfg.early_stop_epe)) {
      stop = true;
      result.early_stopped = true;
    }
  };

  for (int epoch = 0; epoch < tcfg.epochs && !stop; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    bool validated_this_epoch = false;
    for (std::int64_t s = 0; s < steps_per_epoch && !stop; ++s) {
      std::vector<size_t> batch_idx(order.begin() + s * batch, order.begin() + (s + 1) * batch);
      std::vector<char> aug(batch_idx.size(), 0);
      if (tcfg.augment)
        for (auto& a : aug) a = rng.bernoulli(0.5) ? 1 : 0;

      std::vector<SampleGrads> per_sample(batch_idx.size());
      parallel_for(static_cast<std::int64_t>(batch_idx.size()), tcfg.threads, [&](std::int64_t i) {
        SampleRecord rec = train_view.load(batch_idx[static_cast<size_t>(i)]);
        if (aug[static_cast<size_t>(i)]) rec = augment_rot180(rec);
        per_sample[static_cast<size_t>(i)] = run_sample(params, rec, tcfg);
      });

      // Fixed-order reduction keeps results independent of thread count.
      std::vector<Grid<float>> grads;
      grads.reserve(param_ptrs.size());
      for (const Grid<float>* p : param_ptrs) grads.emplace_back(p->shape);
      loss::LossBreakdown mean_loss;
      for (size_t i = 0; i < per_sample.size(); ++i) {
        for (size_t j = 0; j < grads.size(); ++j) {
          const auto& src = per_sample[i].grads[j].v;
          auto& dst = grads[j].v;
          for (size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
        }
        mean_loss.occupancy += per_sample[i].breakdown.occupancy;
        mean_loss.flow += per_sample[i].breakdown.flow;
        mean_loss.trace += per_sample[i].breakdown.trace;
        mean_loss.total += per_sample[i].breakdown.total;
      }
      const float inv_b = 1.0f / static_cast<float>(batch_idx.size());
      for (auto& g : grads)
        for (float& x : g.v) x *= inv_b;
      mean_loss.occupancy /= static_cast<double>(batch_idx.size());
      mean_loss.flow /= static_cast<double>(batch_idx.size());
      mean_loss.trace /= static_cast<double>(batch_idx.size());
      mean_loss.total /= static_cast<double>(batch_idx.size());

      if (!std::isfinite(mean_loss.total)) {
        std::string seeds;
        for (size_t idx : batch_idx) seeds += std::to_string(train_view.seed(idx)) + " ";
        throw NumericError("non-finite loss at step " + std::to_string(global_step) + "; batch seeds: " + seeds);
      }

      if (tcfg.clip_norm > 0) {
        double norm_sq = 0;
        for (const auto& g : grads)
          for (float x : g.v) norm_sq += static_cast<double>(x) * x;
        const double norm = std::sqrt(norm_sq);
        if (norm > tcfg.clip_norm) {
          const float scale = static_cast<float>(tcfg.clip_norm / norm);
          for (auto& g : grads)
            for (float& x : g.v) x *= scale;
        }
      }

      const double lr = cosine_lr(global_step, steps_per_epoch, tcfg.lr, tcfg.eta_min());
      adamw_step(param_ptrs, grads, opt, lr, tcfg);

      log << global_step << "," << epoch << "," << fmt(lr) << "," << fmt(mean_loss.total) << ","
          << fmt(mean_loss.occupancy) << "," << fmt(mean_loss.flow) << "," << fmt(mean_loss.trace)
          << ",,,,,,,,\n";
      ++global_step;

      if (tcfg.max_steps > 0 && global_step >= tcfg.max_steps) {
        validate(epoch);
        validated_this_epoch = true;
        stop = true;
        break;
      }
      if (tcfg.val_interval > 0 && global_step % tcfg.val_interval == 0) {
        validate(epoch);
        validated_this_epoch = global_step % steps_per_epoch == 0 || stop;
      }
    }
    if (!stop && !validated_this_epoch) validate(epoch);
    else if (stop && !validated_this_epoch) validate(epoch);
  }

  model::OptimizerMoments moments;
  moments.m = opt.m;
  moments.v = opt.v;
  moments.step = opt.step;
  model::save_checkpoint(last_path, params, global_step, result.best_auc, &moments);
  result.last_checkpoint = last_path;
  result.steps = global_step;
  return result;
}

}  // namespace ccflow::train
