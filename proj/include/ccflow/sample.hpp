#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccflow/tensor.hpp"

namespace ccflow {

enum class FrameMode { Static, EgoCentric };

inline std::string frame_mode_name(FrameMode m) { return m == FrameMode::Static ? "static" : "ego_centric"; }
inline FrameMode frame_mode_from(const std::string& s) {
  if (s == "static") return FrameMode::Static;
  if (s == "ego_centric") return FrameMode::EgoCentric;
  throw ConfigError("unknown frame_mode '" + s + "'");
}

enum class ChannelKind { Scalar, FlowX, FlowY };

struct ChannelDesc {
  std::string name;  // per-frame name, e.g. "occupancy", "flow_dx"
  ChannelKind kind = ChannelKind::Scalar;
};

// Channel stacking order of one input frame, fixed per mode.
std::vector<ChannelDesc> input_schema(FrameMode mode);

struct DatasetMeta {
  FrameMode mode = FrameMode::Static;
  int height = 64;
  int width = 64;
  double meters_per_cell = 0.5;
  int t_h = 5;
  int t_f = 4;
  double dt_history = 0.1;
  double dt_forecast = 1.0;

  int input_channels() const { return static_cast<int>(input_schema(mode).size()); }
};

// Ground truth for the forecast span. Grids are (1,*,H,W); waypoint k is
// index k-1. t0_occupancy is the total (observed + occluded) occupancy at
// t = 0 rendered in the target frame of reference; it acts as the k = 0
// predecessor for trace and flow-grounded computations.
template <typename T>
struct TargetSeq {
  std::vector<Grid<T>> occ_observed;
  std::vector<Grid<T>> occ_occluded;
  std::vector<Grid<T>> flow;
  Grid<T> t0_occupancy;

  int waypoints() const { return static_cast<int>(occ_observed.size()); }

  Grid<T> occ_total(int k) const {
    Grid<T> out = occ_observed[k];
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += occ_occluded[k].v[i];
    return out;
  }

  template <typename U>
  TargetSeq<U> cast() const {
    TargetSeq<U> out;
    for (const auto& g : occ_observed) out.occ_observed.push_back(g.template cast<U>());
    for (const auto& g : occ_occluded) out.occ_occluded.push_back(g.template cast<U>());
    for (const auto& g : flow) out.flow.push_back(g.template cast<U>());
    out.t0_occupancy = t0_occupancy.template cast<U>();
    return out;
  }
};

// One training/evaluation record: T_h channel-stacked input frames plus
// the target sequence. Input frame i covers time (i - T_h + 1) * dt_history.
struct SampleRecord {
  DatasetMeta meta;
  std::vector<Grid<float>> inputs;  // each (1,C_in,H,W)
  TargetSeq<float> targets;
};

// Model output after inference post-processing (sigmoid on occupancy).
struct PredictionSeq {
  std::vector<Grid<float>> occ_prob;  // (1,2,H,W): observed, occluded
  std::vector<Grid<float>> flow;      // (1,2,H,W)
  int waypoints() const { return static_cast<int>(occ_prob.size()); }
};

}  // namespace ccflow
