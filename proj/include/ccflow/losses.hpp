#pragma once

// The three training losses and their weighted sum. All three are built on
// the tape so gradients flow back through the model (including through the
// warp in the trace term).

#include <cmath>
#include <vector>

#include "ccflow/model.hpp"
#include "ccflow/sample.hpp"
#include "ccflow/tape.hpp"

namespace ccflow::loss {

struct LossWeights {
  double occupancy = 1000.0;
  double flow = 25.0;
  double trace = 10.0;
  double alpha_occ = 10.0;       // flow-magnitude scaling in the occupancy weight
  bool flow_squared_error = false;  // study toggle; the printed formula is L1
};

struct LossBreakdown {
  double occupancy = 0;
  double flow = 0;
  double trace = 0;
  double total = 0;
};

template <typename T>
struct LossVars {
  Var occupancy, flow, trace, total;
};

// Per-cell occupancy weight W + 1 = O * (|F|/alpha + 1) + 1.
template <typename T>
Grid<T> occupancy_weight_plus_one(const Grid<T>& occ, const Grid<T>& gt_flow, double alpha) {
  Grid<T> out(occ.shape);
  const std::int64_t plane = static_cast<std::int64_t>(occ.shape.h) * occ.shape.w;
  for (int b = 0; b < occ.shape.b; ++b) {
    const T* o = occ.plane(b, 0);
    const T* fx = gt_flow.plane(b, 0);
    const T* fy = gt_flow.plane(b, 1);
    T* w = out.plane(b, 0);
    for (std::int64_t i = 0; i < plane; ++i) {
      const T norm = std::sqrt(fx[i] * fx[i] + fy[i] * fy[i]);
      w[i] = o[i] * (norm / static_cast<T>(alpha) + T(1)) + T(1);
    }
  }
  return out;
}

// Flow-weighted BCE, mean over (t,h,w), averaged over the observed and
// occluded channels.
template <typename T>
Var occupancy_loss(Tape<T>& g, const std::vector<model::WaypointVars<T>>& pred, const TargetSeq<T>& gt,
                   double alpha_occ) {
  const int t_f = static_cast<int>(pred.size());
  if (t_f == 0) return g.leaf(Grid<T>(1, 1, 1, 1, T(0)));
  Var acc;
  for (int k = 0; k < t_f; ++k) {
    const Grid<T>& flow_k = gt.flow[static_cast<size_t>(k)];
    for (int ch = 0; ch < 2; ++ch) {
      const Grid<T>& occ_k = ch == 0 ? gt.occ_observed[static_cast<size_t>(k)] : gt.occ_occluded[static_cast<size_t>(k)];
      Var logits = g.slice_channels(pred[static_cast<size_t>(k)].occ_logits, ch, 1);
      Var bce = g.bce_with_logits(logits, g.leaf(occ_k));
      Var weighted = g.mul(bce, g.leaf(occupancy_weight_plus_one(occ_k, flow_k, alpha_occ)));
      Var s = g.sum(weighted);
      acc = acc.valid() ? g.add(acc, s) : s;
    }
  }
  const Shape s0 = gt.occ_observed[0].shape;
  const T denom = static_cast<T>(t_f) * static_cast<T>(s0.numel());
  return g.scale(acc, T(1) / denom / T(2));
}

// Observed-occupancy weighted L1 over flow components, normalized by the
// observed-cell count; zero when nothing is observed.
template <typename T>
Var flow_loss(Tape<T>& g, const std::vector<model::WaypointVars<T>>& pred, const TargetSeq<T>& gt,
              bool squared_error = false) {
  const int t_f = static_cast<int>(pred.size());
  T alpha = 0;
  for (int k = 0; k < t_f; ++k)
    for (const T& o : gt.occ_observed[static_cast<size_t>(k)].v) alpha += o;
  if (t_f == 0 || alpha == T(0)) return g.leaf(Grid<T>(1, 1, 1, 1, T(0)));

  Var acc;
  for (int k = 0; k < t_f; ++k) {
    const Grid<T>& obs = gt.occ_observed[static_cast<size_t>(k)];
    Grid<T> mask2(obs.shape.b, 2, obs.shape.h, obs.shape.w);
    const std::int64_t plane = static_cast<std::int64_t>(obs.shape.h) * obs.shape.w;
    for (int b = 0; b < obs.shape.b; ++b) {
      std::copy(obs.plane(b, 0), obs.plane(b, 0) + plane, mask2.plane(b, 0));
      std::copy(obs.plane(b, 0), obs.plane(b, 0) + plane, mask2.plane(b, 1));
    }
    Var diff = g.sub(pred[static_cast<size_t>(k)].flow, g.leaf(gt.flow[static_cast<size_t>(k)]));
    Var err = squared_error ? g.square(diff) : g.abs_(diff);
    Var s = g.sum(g.mul(err, g.leaf(std::move(mask2))));
    acc = acc.valid() ? g.add(acc, s) : s;
  }
  return g.scale(acc, T(1) / alpha);
}

// Warps the previous total occupancy by the predicted flow and penalizes
// mismatch on currently occupied cells; per-waypoint sums normalized by the
// occupied-cell count and averaged over waypoints.
template <typename T>
Var trace_loss(Tape<T>& g, const std::vector<model::WaypointVars<T>>& pred, const TargetSeq<T>& gt) {
  const int t_f = static_cast<int>(pred.size());
  if (t_f == 0) return g.leaf(Grid<T>(1, 1, 1, 1, T(0)));
  Var acc;
  bool any = false;
  for (int k = 0; k < t_f; ++k) {
    Grid<T> curr = gt.occ_total(k);
    T alpha = 0;
    for (const T& o : curr.v) alpha += o;
    if (alpha == T(0)) continue;
    Grid<T> prev = k == 0 ? gt.t0_occupancy : gt.occ_total(k - 1);
    Var warped = g.bilinear_warp(g.leaf(std::move(prev)), pred[static_cast<size_t>(k)].flow);
    Var curr_v = g.leaf(std::move(curr));
    Var resid = g.sub(g.mul(curr_v, warped), curr_v);
    Var s = g.scale(g.sum(g.square(resid)), T(1) / alpha);
    acc = any ? g.add(acc, s) : s;
    any = true;
  }
  if (!any) return g.leaf(Grid<T>(1, 1, 1, 1, T(0)));
  return g.scale(acc, T(1) / static_cast<T>(t_f));
}

template <typename T>
LossVars<T> total_loss(Tape<T>& g, const std::vector<model::WaypointVars<T>>& pred, const TargetSeq<T>& gt,
                       const LossWeights& w) {
  LossVars<T> out;
  out.occupancy = occupancy_loss(g, pred, gt, w.alpha_occ);
  out.flow = flow_loss(g, pred, gt, w.flow_squared_error);
  out.trace = trace_loss(g, pred, gt);
  out.total = g.add(g.add(g.scale(out.occupancy, static_cast<T>(w.occupancy)), g.scale(out.flow, static_cast<T>(w.flow))),
                    g.scale(out.trace, static_cast<T>(w.trace)));
  return out;
}

inline double weighted_total(const LossWeights& w, double occupancy, double flow, double trace) {
  return w.occupancy * occupancy + w.flow * flow + w.trace * trace;
}

// Reported breakdown; the total is recomposed in double so the weighted-sum
// identity holds exactly in logs regardless of the tape dtype.
template <typename T>
LossBreakdown breakdown(const Tape<T>& g, const LossVars<T>& lv, const LossWeights& w) {
  LossBreakdown b;
  b.occupancy = static_cast<double>(g.val(lv.occupancy).v[0]);
  b.flow = static_cast<double>(g.val(lv.flow).v[0]);
  b.trace = static_cast<double>(g.val(lv.trace).v[0]);
  b.total = weighted_total(w, b.occupancy, b.flow, b.trace);
  return b;
}

}  // namespace ccflow::loss
