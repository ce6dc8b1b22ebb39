#pragma once

// Challenge metric suite: PR-AUC, Soft-IoU, flow endpoint error and the
// flow-grounded occupancy metrics, per forecast waypoint.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccflow/sample.hpp"
#include "ccflow/tensor.hpp"

namespace ccflow::metrics {

// Number of linearly spaced score thresholds in [0,1] for the PR curve.
inline constexpr int kAucThresholds = 100;

// Precision-recall AUC: thresholds tau_j = j/(n-1); a cell is predicted
// positive when pred >= tau. Precision is monotonized (suffix max over
// increasing recall) and integrated by trapezoid over recall, with a
// (recall 0, precision 1) anchor. Empty ground truth scores 0.
double auc_pr(const float* pred, const float* gt, std::int64_t n, int thresholds = kAucThresholds);
double auc_pr(const Grid<float>& pred, const Grid<float>& gt);

// sum(p*g) / (sum(p) + sum(g) - sum(p*g)); 0/0 -> 0.
double soft_iou(const float* pred, const float* gt, std::int64_t n);
double soft_iou(const Grid<float>& pred, const Grid<float>& gt);

// Mean Euclidean endpoint error over cells with gt_occ > 0; empty mask -> 0.
double flow_epe(const Grid<float>& pred_flow, const Grid<float>& gt_flow, const Grid<float>& gt_occ);

// Occupancy metrics on pred_occ * clamp(warp(gt_occ_prev, pred_flow), 0, 1).
std::pair<double, double> flow_grounded(const Grid<float>& pred_occ, const Grid<float>& pred_flow,
                                        const Grid<float>& gt_occ_prev, const Grid<float>& gt_occ);

struct WaypointMetrics {
  double observed_auc = 0;
  double observed_soft_iou = 0;
  double occluded_auc = 0;
  double occluded_soft_iou = 0;
  double flow_epe = 0;
  double flow_grounded_auc = 0;
  double flow_grounded_soft_iou = 0;
};

struct WaypointReport {
  std::vector<WaypointMetrics> waypoints;
  WaypointMetrics mean;
};

WaypointReport evaluate(const PredictionSeq& pred, const TargetSeq<float>& gt);

// Column order of the report CSV (the published table order).
std::string report_csv_header();
std::string report_csv_row(const std::string& sample, const std::string& waypoint, const WaypointMetrics& m);

WaypointMetrics mean_of(const std::vector<WaypointMetrics>& ms);

}  // namespace ccflow::metrics
