#pragma once

// Synthetic BEV world: agents with closed-form kinematics, lane polylines,
// an ego observer, and the rasterizer producing occupancy / flow / map /
// egomotion planes in either a static or an ego-centric frame of reference.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccflow/sample.hpp"
#include "ccflow/tensor.hpp"

namespace ccflow::scenario {

enum class Behavior { Stationary, ConstantVelocity, ConstantTurn };

struct Pose {
  double x = 0, y = 0, heading = 0;
};

struct Agent {
  double length = 4.0, width = 2.0;  // meters
  Behavior behavior = Behavior::Stationary;
  Pose start;            // pose at t = 0
  double speed = 0;      // m/s along heading
  double yaw_rate = 0;   // rad/s, constant_turn only

  Pose pose_at(double t) const;
};

struct Lane {
  std::array<double, 3> color{1, 1, 1};
  std::vector<std::array<double, 2>> points;  // world meters
};

struct ScenarioConfig {
  FrameMode mode = FrameMode::Static;
  int height = 64, width = 64;
  double meters_per_cell = 0.5;
  int t_h = 5, t_f = 4;
  double dt_history = 0.1, dt_forecast = 1.0;

  int min_agents = 3, max_agents = 6;
  double stationary_fraction = 0.5;
  double min_speed = 0.5, max_speed = 1.5;  // m/s, continuous mode
  double turn_fraction = 0.0;               // share of moving agents that turn
  double max_yaw_rate = 0.25;               // rad/s
  bool integer_flow = false;                // velocities snapped to whole cells per forecast step
  int max_integer_cells = 3;                // per axis, integer mode
  bool keep_in_bounds = true;               // reject agents whose footprint leaves the grid
  double agent_min_length = 3.0, agent_max_length = 5.0;
  double agent_min_width = 1.6, agent_max_width = 2.4;
  int min_lanes = 2, max_lanes = 4;
  double ego_speed_max = 1.0;  // m/s; ego is stationary in static mode when 0
  int placement_retries = 200;

  DatasetMeta meta() const {
    DatasetMeta m;
    m.mode = mode;
    m.height = height;
    m.width = width;
    m.meters_per_cell = meters_per_cell;
    m.t_h = t_h;
    m.t_f = t_f;
    m.dt_history = dt_history;
    m.dt_forecast = dt_forecast;
    return m;
  }

  std::string canonical_string() const;  // all fields, fixed order (hashing)
};

struct Scenario {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  std::vector<Agent> agents;  // ego included; ego is never rasterized
  int ego_index = 0;
  std::vector<Lane> lanes;
};

// Deterministic per seed; agents do not overlap at t = 0.
Scenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// One rasterized timestep. Planes are (1,*,H,W); unused planes are empty.
struct RasterFrame {
  int t_index = 0;
  Grid<float> occ_observed;
  Grid<float> occ_occluded;
  Grid<float> occ_total;
  Grid<float> flow;       // (1,2,H,W), backward, cells per frame interval
  Grid<float> map_rgb;    // static (womd-style) mode
  Grid<float> lane_occ;   // ego-centric (av2-style) mode
  Grid<float> egomotion;  // ego-centric mode, (1,2,H,W)
};

// Renders the scenario at time t. ref_t / prev_ref_t pick the ego poses
// that define the current and previous raster frames (ignored in static
// mode); prev_t is the timestep the backward flow points to.
RasterFrame rasterize(const Scenario& sc, double t, double prev_t, double ref_t, double prev_ref_t);

// Visibility split of the occupancy at time t: a cell is occluded when the
// segment from the ego center to the cell center crosses another agent.
std::pair<Grid<float>, Grid<float>> occlusion_split(const Scenario& sc, double t, double ref_t);

// Assembles the full input/target record for one scenario.
SampleRecord build_sample(const Scenario& sc);

}  // namespace ccflow::scenario
