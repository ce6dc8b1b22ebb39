#include "ccflow/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ccflow/kernels.hpp"

namespace ccflow::metrics {

double auc_pr(const float* pred, const float* gt, std::int64_t n, int thresholds) {
  std::int64_t positives = 0;
  for (std::int64_t i = 0; i < n; ++i)
    if (gt[i] > 0.5f) ++positives;
  if (positives == 0) return 0.0;

  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  pts.reserve(static_cast<size_t>(thresholds) + 1);
  pts.emplace_back(0.0, 1.0);
  for (int j = 0; j < thresholds; ++j) {
    const double tau = static_cast<double>(j) / static_cast<double>(thresholds - 1);
    std::int64_t tp = 0, fp = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (static_cast<double>(pred[i]) >= tau) {
        if (gt[i] > 0.5f) ++tp;
        else ++fp;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    pts.emplace_back(recall, precision);
  }
  std::sort(pts.begin(), pts.end());
  for (size_t i = pts.size() - 1; i-- > 0;) pts[i].second = std::max(pts[i].second, pts[i + 1].second);
  double auc = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i)
    auc += (pts[i + 1].first - pts[i].first) * (pts[i].second + pts[i + 1].second) * 0.5;
  return auc;
}

double auc_pr(const Grid<float>& pred, const Grid<float>& gt) {
  if (pred.shape != gt.shape) throw ShapeError("auc_pr: " + pred.shape.str() + " vs " + gt.shape.str());
  return auc_pr(pred.v.data(), gt.v.data(), pred.numel());
}

double soft_iou(const float* pred, const float* gt, std::int64_t n) {
  double inter = 0, sp = 0, sg = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    inter += static_cast<double>(pred[i]) * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  const double denom = sp + sg - inter;
  return denom > 0 ? inter / denom : 0.0;
}

double soft_iou(const Grid<float>& pred, const Grid<float>& gt) {
  if (pred.shape != gt.shape) throw ShapeError("soft_iou: " + pred.shape.str() + " vs " + gt.shape.str());
  return soft_iou(pred.v.data(), gt.v.data(), pred.numel());
}

double flow_epe(const Grid<float>& pred_flow, const Grid<float>& gt_flow, const Grid<float>& gt_occ) {
  if (pred_flow.shape != gt_flow.shape) throw ShapeError("flow_epe: flow shape mismatch");
  if (gt_occ.shape.h != gt_flow.shape.h || gt_occ.shape.w != gt_flow.shape.w || gt_occ.shape.b != gt_flow.shape.b)
    throw ShapeError("flow_epe: occupancy shape mismatch");
  double sum = 0;
  std::int64_t count = 0;
  const std::int64_t plane = static_cast<std::int64_t>(gt_occ.shape.h) * gt_occ.shape.w;
  for (int b = 0; b < gt_occ.shape.b; ++b) {
    const float* occ = gt_occ.plane(b, 0);
    const float* px = pred_flow.plane(b, 0);
    const float* py = pred_flow.plane(b, 1);
    const float* gx = gt_flow.plane(b, 0);
    const float* gy = gt_flow.plane(b, 1);
    for (std::int64_t i = 0; i < plane; ++i) {
      if (occ[i] <= 0.0f) continue;
      const double dx = static_cast<double>(px[i]) - gx[i];
      const double dy = static_cast<double>(py[i]) - gy[i];
      sum += std::sqrt(dx * dx + dy * dy);
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

std::pair<double, double> flow_grounded(const Grid<float>& pred_occ, const Grid<float>& pred_flow,
                                        const Grid<float>& gt_occ_prev, const Grid<float>& gt_occ) {
  Grid<float> warped = kernels::bilinear_warp_forward(gt_occ_prev, pred_flow);
  Grid<float> grounded(pred_occ.shape);
  for (size_t i = 0; i < grounded.v.size(); ++i)
    grounded.v[i] = pred_occ.v[i] * std::clamp(warped.v[i], 0.0f, 1.0f);
  return {auc_pr(grounded, gt_occ), soft_iou(grounded, gt_occ)};
}

WaypointMetrics mean_of(const std::vector<WaypointMetrics>& ms) {
  WaypointMetrics mean;
  if (ms.empty()) return mean;
  for (const auto& m : ms) {
    mean.observed_auc += m.observed_auc;
    mean.observed_soft_iou += m.observed_soft_iou;
    mean.occluded_auc += m.occluded_auc;
    mean.occluded_soft_iou += m.occluded_soft_iou;
    mean.flow_epe += m.flow_epe;
    mean.flow_grounded_auc += m.flow_grounded_auc;
    mean.flow_grounded_soft_iou += m.flow_grounded_soft_iou;
  }
  const double n = static_cast<double>(ms.size());
  mean.observed_auc /= n;
  mean.observed_soft_iou /= n;
  mean.occluded_auc /= n;
  mean.occluded_soft_iou /= n;
  mean.flow_epe /= n;
  mean.flow_grounded_auc /= n;
  mean.flow_grounded_soft_iou /= n;
  return mean;
}

WaypointReport evaluate(const PredictionSeq& pred, const TargetSeq<float>& gt) {
  if (pred.waypoints() != gt.waypoints())
    throw ShapeError("evaluate: prediction waypoints " + std::to_string(pred.waypoints()) + " vs targets " +
                     std::to_string(gt.waypoints()));
  WaypointReport rep;
  for (int k = 0; k < pred.waypoints(); ++k) {
    const Grid<float>& occ = pred.occ_prob[static_cast<size_t>(k)];
    const Grid<float>& flow = pred.flow[static_cast<size_t>(k)];
    const Shape s(occ.shape.b, 1, occ.shape.h, occ.shape.w);
    Grid<float> pred_obs(s), pred_occl(s), pred_total(s);
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    for (int b = 0; b < s.b; ++b) {
      const float* po = occ.plane(b, 0);
      const float* pc = occ.plane(b, 1);
      for (std::int64_t i = 0; i < plane; ++i) {
        pred_obs.plane(b, 0)[i] = po[i];
        pred_occl.plane(b, 0)[i] = pc[i];
        pred_total.plane(b, 0)[i] = std::min(po[i] + pc[i], 1.0f);
      }
    }
    const Grid<float>& gt_obs = gt.occ_observed[static_cast<size_t>(k)];
    const Grid<float>& gt_occl = gt.occ_occluded[static_cast<size_t>(k)];
    Grid<float> gt_total = gt.occ_total(k);
    Grid<float> gt_prev_total = k == 0 ? gt.t0_occupancy : gt.occ_total(k - 1);

    WaypointMetrics m;
    m.observed_auc = auc_pr(pred_obs, gt_obs);
    m.observed_soft_iou = soft_iou(pred_obs, gt_obs);
    m.occluded_auc = auc_pr(pred_occl, gt_occl);
    m.occluded_soft_iou = soft_iou(pred_occl, gt_occl);
    m.flow_epe = flow_epe(flow, gt.flow[static_cast<size_t>(k)], gt_total);
    auto [ga, gi] = flow_grounded(pred_total, flow, gt_prev_total, gt_total);
    m.flow_grounded_auc = ga;
    m.flow_grounded_soft_iou = gi;
    rep.waypoints.push_back(m);
  }
  rep.mean = mean_of(rep.waypoints);
  return rep;
}

std::string report_csv_header() {
  return "sample,waypoint,observed_auc,observed_soft_iou,occluded_auc,occluded_soft_iou,"
         "flow_epe,flow_grounded_auc,flow_grounded_soft_iou";
}

static std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

std::string report_csv_row(const std::string& sample, const std::string& waypoint, const WaypointMetrics& m) {
  return sample + "," + waypoint + "," + fmt(m.observed_auc) + "," + fmt(m.observed_soft_iou) + "," +
         fmt(m.occluded_auc) + "," + fmt(m.occluded_soft_iou) + "," + fmt(m.flow_epe) + "," +
         fmt(m.flow_grounded_auc) + "," + fmt(m.flow_grounded_soft_iou);
}

}  // namespace ccflow::metrics
