#include "ccflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ccflow::scenario {

namespace {

struct Vec2 {
  double x = 0, y = 0;
};

Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// World point expressed in the frame anchored at `ref`.
Vec2 world_to_frame(const Pose& ref, Vec2 p) {
  return rotate({p.x - ref.x, p.y - ref.y}, -ref.heading);
}

Vec2 frame_to_world(const Pose& ref, Vec2 p) {
  Vec2 r = rotate(p, ref.heading);
  return {r.x + ref.x, r.y + ref.y};
}

// Oriented box centered on a pose.
bool point_in_box(const Pose& pose, double length, double width, Vec2 p) {
  const Vec2 q = world_to_frame(pose, p);
  return std::abs(q.x) <= length * 0.5 && std::abs(q.y) <= width * 0.5;
}

// Segment-vs-oriented-box intersection via slab clipping in box frame.
bool segment_hits_box(const Pose& pose, double length, double width, Vec2 a, Vec2 b) {
  const Vec2 p0 = world_to_frame(pose, a);
  const Vec2 p1 = world_to_frame(pose, b);
  const double hx = length * 0.5, hy = width * 0.5;
  double t0 = 0.0, t1 = 1.0;
  const double d[2] = {p1.x - p0.x, p1.y - p0.y};
  const double o[2] = {p0.x, p0.y};
  const double h[2] = {hx, hy};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(d[i]) < 1e-12) {
      if (o[i] < -h[i] || o[i] > h[i]) return false;
      continue;
    }
    double ta = (-h[i] - o[i]) / d[i];
    double tb = (h[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

// Separating-axis test for two oriented boxes.
bool boxes_overlap(const Pose& pa, double la, double wa, const Pose& pb, double lb, double wb) {
  auto corners = [](const Pose& p, double l, double w) {
    std::array<Vec2, 4> c;
    const Vec2 ex = rotate({l * 0.5, 0}, p.heading);
    const Vec2 ey = rotate({0, w * 0.5}, p.heading);
    c[0] = {p.x + ex.x + ey.x, p.y + ex.y + ey.y};
    c[1] = {p.x + ex.x - ey.x, p.y + ex.y - ey.y};
    c[2] = {p.x - ex.x - ey.x, p.y - ex.y - ey.y};
    c[3] = {p.x - ex.x + ey.x, p.y - ex.y + ey.y};
    return c;
  };
  const auto ca = corners(pa, la, wa);
  const auto cb = corners(pb, lb, wb);
  const double axes[4] = {pa.heading, pa.heading + M_PI_2, pb.heading, pb.heading + M_PI_2};
  for (double ang : axes) {
    const Vec2 axis{std::cos(ang), std::sin(ang)};
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& c : ca) {
      const double d = c.x * axis.x + c.y * axis.y;
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const Vec2& c : cb) {
      const double d = c.x * axis.x + c.y * axis.y;
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (amax < bmin || bmax < amin) return false;  // separating axis: disjoint
  }
  return true;
}

constexpr std::array<std::array<double, 3>, 5> kLanePalette = {{
    {0.2, 0.8, 0.2},
    {0.8, 0.2, 0.2},
    {0.2, 0.4, 0.9},
    {0.9, 0.8, 0.2},
    {0.7, 0.3, 0.8},
}};

}  // namespace

Pose Agent::pose_at(double t) const {
  switch (behavior) {
    case Behavior::Stationary:
      return start;
    case Behavior::ConstantVelocity: {
      Pose p = start;
      p.x += speed * std::cos(start.heading) * t;
      p.y += speed * std::sin(start.heading) * t;
      return p;
    }
    case Behavior::ConstantTurn: {
      Pose p = start;
      p.heading = start.heading + yaw_rate * t;
      const double r = speed / yaw_rate;
      p.x = start.x + r * (std::sin(p.heading) - std::sin(start.heading));
      p.y = start.y - r * (std::cos(p.heading) - std::cos(start.heading));
      return p;
    }
  }
  return start;
}

std::string ScenarioConfig::canonical_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "mode=" << frame_mode_name(mode) << ";h=" << height << ";w=" << width << ";mpc=" << meters_per_cell
     << ";t_h=" << t_h << ";t_f=" << t_f << ";dt_h=" << dt_history << ";dt_f=" << dt_forecast
     << ";agents=" << min_agents << "-" << max_agents << ";stationary=" << stationary_fraction
     << ";speed=" << min_speed << "-" << max_speed << ";turn=" << turn_fraction << ";yaw=" << max_yaw_rate
     << ";int_flow=" << integer_flow << ";int_cells=" << max_integer_cells << ";bounds=" << keep_in_bounds
     << ";len=" << agent_min_length << "-" << agent_max_length << ";wid=" << agent_min_width << "-"
     << agent_max_width << ";lanes=" << min_lanes << "-" << max_lanes << ";ego_v=" << ego_speed_max
     << ";retries=" << placement_retries;
  return os.str();
}

namespace {

// All timesteps whose rendering must stay inside the target-frame grid.
std::vector<double> containment_times(const ScenarioConfig& cfg) {
  std::vector<double> ts;
  for (int i = -cfg.t_h; i <= 0; ++i) ts.push_back(i * cfg.dt_history);
  for (int k = 1; k <= cfg.t_f; ++k) ts.push_back(k * cfg.dt_forecast);
  return ts;
}

bool agent_inside_grid(const Agent& a, const ScenarioConfig& cfg, const Agent* ego, const std::vector<double>& times) {
  const double half_w = cfg.width * cfg.meters_per_cell * 0.5;
  const double half_h = cfg.height * cfg.meters_per_cell * 0.5;
  for (double t : times) {
    const Pose p = a.pose_at(t);
    // Target frames are all anchored at the ego pose at t = 0 in
    // ego-centric mode, identity in static mode.
    Pose ref{0, 0, 0};
    if (cfg.mode == FrameMode::EgoCentric && ego) ref = ego->pose_at(0.0);
    const Vec2 ex = rotate({a.length * 0.5, 0}, p.heading);
    const Vec2 ey = rotate({0, a.width * 0.5}, p.heading);
    const Vec2 cs[4] = {{p.x + ex.x + ey.x, p.y + ex.y + ey.y},
                        {p.x + ex.x - ey.x, p.y + ex.y - ey.y},
                        {p.x - ex.x - ey.x, p.y - ex.y - ey.y},
                        {p.x - ex.x + ey.x, p.y - ex.y + ey.y}};
    for (const Vec2& c : cs) {
      const Vec2 f = world_to_frame(ref, c);
      if (std::abs(f.x) > half_w || std::abs(f.y) > half_h) return false;
    }
  }
  return true;
}

}  // namespace

namespace {

Scenario sample_scenario_attempt(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t stream) {
  Scenario sc;
  sc.config = cfg;
  sc.seed = seed;
  Rng rng(stream);

  const double half_w = cfg.width * cfg.meters_per_cell * 0.5;
  const double half_h = cfg.height * cfg.meters_per_cell * 0.5;
  const std::vector<double> times = containment_times(cfg);

  // Ego first: the observer. Never rasterized, so only overlap at t=0
  // against real agents matters (checked as agents are placed).
  Agent ego;
  ego.length = 4.0;
  ego.width = 2.0;
  ego.start.x = rng.uniform(-half_w * 0.5, half_w * 0.5);
  ego.start.y = rng.uniform(-half_h * 0.5, half_h * 0.5);
  ego.start.heading = rng.uniform(0, 2 * M_PI);
  if (cfg.ego_speed_max > 0) {
    ego.behavior = Behavior::ConstantVelocity;
    ego.speed = rng.uniform(cfg.ego_speed_max * 0.3, cfg.ego_speed_max);
  }
  sc.agents.push_back(ego);
  sc.ego_index = 0;

  const int n_agents = static_cast<int>(rng.uniform_int(cfg.min_agents, cfg.max_agents));
  for (int i = 0; i < n_agents; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
      Agent a;
      a.length = rng.uniform(cfg.agent_min_length, cfg.agent_max_length);
      a.width = rng.uniform(cfg.agent_min_width, cfg.agent_max_width);
      const bool stationary = rng.bernoulli(cfg.stationary_fraction);
      if (stationary) {
        a.behavior = Behavior::Stationary;
        a.start.heading = rng.uniform(0, 2 * M_PI);
      } else if (cfg.integer_flow) {
        a.behavior = Behavior::ConstantVelocity;
        int nx = 0, ny = 0;
        while (nx == 0 && ny == 0) {
          nx = static_cast<int>(rng.uniform_int(-cfg.max_integer_cells, cfg.max_integer_cells));
          ny = static_cast<int>(rng.uniform_int(-cfg.max_integer_cells, cfg.max_integer_cells));
        }
        const double vx = nx * cfg.meters_per_cell / cfg.dt_forecast;
        const double vy = ny * cfg.meters_per_cell / cfg.dt_forecast;
        a.speed = std::hypot(vx, vy);
        a.start.heading = std::atan2(vy, vx);
      } else if (rng.bernoulli(cfg.turn_fraction)) {
        a.behavior = Behavior::ConstantTurn;
        a.speed = rng.uniform(cfg.min_speed, cfg.max_speed);
        a.start.heading = rng.uniform(0, 2 * M_PI);
        a.yaw_rate = rng.uniform(0.05, cfg.max_yaw_rate) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      } else {
        a.behavior = Behavior::ConstantVelocity;
        a.speed = rng.uniform(cfg.min_speed, cfg.max_speed);
        a.start.heading = rng.uniform(0, 2 * M_PI);
      }
      const double margin = std::max(a.length, a.width);
      a.start.x = rng.uniform(-half_w + margin, half_w - margin);
      a.start.y = rng.uniform(-half_h + margin, half_h - margin);

      bool ok = true;
      for (const Agent& other : sc.agents) {
        if (boxes_overlap(a.start, a.length, a.width, other.start, other.length, other.width)) {
          ok = false;
          break;
        }
      }
      if (ok && cfg.keep_in_bounds && !agent_inside_grid(a, cfg, &sc.agents[0], times)) ok = false;
      if (ok) {
        sc.agents.push_back(a);
        placed = true;
      }
    }
    if (!placed)
      throw GenerationError("could not place agent " + std::to_string(i) + " after " +
                            std::to_string(cfg.placement_retries) + " retries (seed " + std::to_string(seed) + ")");
  }

  const int n_lanes = static_cast<int>(rng.uniform_int(cfg.min_lanes, cfg.max_lanes));
  for (int i = 0; i < n_lanes; ++i) {
    Lane lane;
    lane.color = kLanePalette[static_cast<size_t>(i) % kLanePalette.size()];
    // Straight lane crossing the region: a point near the center plus a
    // direction; endpoints pushed past the grid so clipping happens at
    // raster time.
    const double angle = rng.uniform(0, 2 * M_PI);
    const double off_x = rng.uniform(-half_w * 0.8, half_w * 0.8);
    const double off_y = rng.uniform(-half_h * 0.8, half_h * 0.8);
    const double reach = 2.0 * std::max(half_w, half_h);
    const int segments = 8;
    for (int s = 0; s <= segments; ++s) {
      const double u = -reach + 2.0 * reach * s / segments;
      lane.points.push_back({off_x + std::cos(angle) * u, off_y + std::sin(angle) * u});
    }
    sc.lanes.push_back(std::move(lane));
  }
  return sc;
}

}  // namespace

Scenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.t_h < 1 || cfg.t_f < 0) throw ConfigError("scenario: t_h must be >= 1, t_f >= 0");
  // Cramped worlds can draw an ego or early agents that leave no room for
  // the rest; retry the whole placement with a derived stream before giving
  // up. Deterministic per seed.
  constexpr int kWorldAttempts = 20;
  std::string last_error;
  for (int attempt = 0; attempt < kWorldAttempts; ++attempt) {
    const std::uint64_t stream = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(attempt + 1);
    try {
      return sample_scenario_attempt(cfg, seed, stream);
    } catch (const GenerationError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError(last_error + " (after " + std::to_string(kWorldAttempts) + " world attempts)");
}

namespace {

struct CellGeom {
  int height, width;
  double mpc;

  Vec2 center(int row, int col) const {
    return {(col + 0.5 - width * 0.5) * mpc, (row + 0.5 - height * 0.5) * mpc};
  }
};

// Occupancy plus the claiming agent per cell (-1 when empty). Agents claim
// in index order, so overlaps resolve deterministically.
void rasterize_occupancy(const Scenario& sc, double t, const Pose& ref, Grid<float>& occ, std::vector<int>& claims) {
  const ScenarioConfig& cfg = sc.config;
  const CellGeom geom{cfg.height, cfg.width, cfg.meters_per_cell};
  claims.assign(static_cast<size_t>(cfg.height) * cfg.width, -1);
  occ = Grid<float>(1, 1, cfg.height, cfg.width);
  for (int ai = 0; ai < static_cast<int>(sc.agents.size()); ++ai) {
    if (ai == sc.ego_index) continue;
    const Agent& a = sc.agents[static_cast<size_t>(ai)];
    const Pose pw = a.pose_at(t);
    // Agent pose expressed in the raster frame.
    const Vec2 cf = world_to_frame(ref, {pw.x, pw.y});
    const double hf = pw.heading - ref.heading;
    const double radius = 0.5 * std::hypot(a.length, a.width);
    const int r0 = std::max(0, static_cast<int>(std::floor((cf.y - radius) / geom.mpc + cfg.height * 0.5)));
    const int r1 = std::min(cfg.height - 1, static_cast<int>(std::ceil((cf.y + radius) / geom.mpc + cfg.height * 0.5)));
    const int c0 = std::max(0, static_cast<int>(std::floor((cf.x - radius) / geom.mpc + cfg.width * 0.5)));
    const int c1 = std::min(cfg.width - 1, static_cast<int>(std::ceil((cf.x + radius) / geom.mpc + cfg.width * 0.5)));
    const Pose pose_f{cf.x, cf.y, hf};
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const size_t idx = static_cast<size_t>(r) * cfg.width + c;
        if (claims[idx] >= 0) continue;
        if (point_in_box(pose_f, a.length, a.width, geom.center(r, c))) {
          claims[idx] = ai;
          occ.v[idx] = 1.0f;
        }
      }
    }
  }
}

void split_visibility(const Scenario& sc, double t, const Pose& ref, const std::vector<int>& claims,
                      Grid<float>& observed, Grid<float>& occluded) {
  const ScenarioConfig& cfg = sc.config;
  const CellGeom geom{cfg.height, cfg.width, cfg.meters_per_cell};
  observed = Grid<float>(1, 1, cfg.height, cfg.width);
  occluded = Grid<float>(1, 1, cfg.height, cfg.width);
  const Pose ego = sc.agents[static_cast<size_t>(sc.ego_index)].pose_at(t);
  const Vec2 eye{ego.x, ego.y};
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const size_t idx = static_cast<size_t>(r) * cfg.width + c;
      const int owner = claims[idx];
      if (owner < 0) continue;
      const Vec2 cell_world = frame_to_world(ref, geom.center(r, c));
      bool blocked = false;
      for (int ai = 0; ai < static_cast<int>(sc.agents.size()) && !blocked; ++ai) {
        if (ai == sc.ego_index || ai == owner) continue;
        const Agent& o = sc.agents[static_cast<size_t>(ai)];
        const Pose po = o.pose_at(t);
        blocked = segment_hits_box(po, o.length, o.width, eye, cell_world);
      }
      (blocked ? occluded : observed).v[idx] = 1.0f;
    }
  }
}

void draw_polyline(const std::vector<std::array<double, 2>>& pts, const Pose& ref, const CellGeom& geom,
                   const std::function<void(int, int)>& plot) {
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = world_to_frame(ref, {pts[i][0], pts[i][1]});
    const Vec2 b = world_to_frame(ref, {pts[i + 1][0], pts[i + 1][1]});
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (geom.mpc * 0.25))));
    for (int s = 0; s <= steps; ++s) {
      const double u = static_cast<double>(s) / steps;
      const double x = a.x + (b.x - a.x) * u;
      const double y = a.y + (b.y - a.y) * u;
      const int col = static_cast<int>(std::floor(x / geom.mpc + geom.width * 0.5));
      const int row = static_cast<int>(std::floor(y / geom.mpc + geom.height * 0.5));
      if (row >= 0 && row < geom.height && col >= 0 && col < geom.width) plot(row, col);
    }
  }
}

}  // namespace

RasterFrame rasterize(const Scenario& sc, double t, double prev_t, double ref_t, double prev_ref_t) {
  const ScenarioConfig& cfg = sc.config;
  const CellGeom geom{cfg.height, cfg.width, cfg.meters_per_cell};
  const bool ego_frame = cfg.mode == FrameMode::EgoCentric;
  const Pose ref = ego_frame ? sc.agents[static_cast<size_t>(sc.ego_index)].pose_at(ref_t) : Pose{};
  const Pose prev_ref = ego_frame ? sc.agents[static_cast<size_t>(sc.ego_index)].pose_at(prev_ref_t) : Pose{};

  RasterFrame f;
  std::vector<int> claims;
  rasterize_occupancy(sc, t, ref, f.occ_total, claims);
  split_visibility(sc, t, ref, claims, f.occ_observed, f.occ_occluded);

  // Backward flow: where a cell's material point sat in the previous
  // raster, minus where it sits now, in cells. Zero on empty cells.
  f.flow = Grid<float>(1, 2, cfg.height, cfg.width);
  const bool frames_match = !ego_frame || (ref.x == prev_ref.x && ref.y == prev_ref.y && ref.heading == prev_ref.heading);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const size_t idx = static_cast<size_t>(r) * cfg.width + c;
      const int owner = claims[idx];
      if (owner < 0) continue;
      const Agent& a = sc.agents[static_cast<size_t>(owner)];
      const Pose cur = a.pose_at(t);
      const Pose prev = a.pose_at(prev_t);
      // A pose that did not move in a frame that did not move carries
      // exactly zero flow; skip the transform round-trip and its roundoff.
      if (frames_match && cur.x == prev.x && cur.y == prev.y && cur.heading == prev.heading) continue;
      const Vec2 p_cur_f = geom.center(r, c);
      const Vec2 p_world = frame_to_world(ref, p_cur_f);
      // Material point in the agent body frame, then its previous world
      // position, then into the previous raster frame.
      const Vec2 body = world_to_frame(cur, p_world);
      const Vec2 prev_world = frame_to_world(prev, body);
      const Vec2 p_prev_f = world_to_frame(prev_ref, prev_world);
      f.flow.at(0, 0, r, c) = static_cast<float>((p_prev_f.x - p_cur_f.x) / cfg.meters_per_cell);
      f.flow.at(0, 1, r, c) = static_cast<float>((p_prev_f.y - p_cur_f.y) / cfg.meters_per_cell);
    }
  }

  if (cfg.mode == FrameMode::Static) {
    f.map_rgb = Grid<float>(1, 3, cfg.height, cfg.width);
    for (const Lane& lane : sc.lanes) {
      draw_polyline(lane.points, ref, geom, [&](int r, int c) {
        for (int ch = 0; ch < 3; ++ch) f.map_rgb.at(0, ch, r, c) = static_cast<float>(lane.color[static_cast<size_t>(ch)]);
      });
    }
  } else {
    f.lane_occ = Grid<float>(1, 1, cfg.height, cfg.width);
    for (const Lane& lane : sc.lanes)
      draw_polyline(lane.points, ref, geom, [&](int r, int c) { f.lane_occ.at(0, 0, r, c) = 1.0f; });
    // Egomotion: the backward flow ego displacement induces on every cell.
    f.egomotion = Grid<float>(1, 2, cfg.height, cfg.width);
    for (int r = 0; r < cfg.height; ++r) {
      for (int c = 0; c < cfg.width; ++c) {
        const Vec2 p_cur_f = geom.center(r, c);
        const Vec2 world = frame_to_world(ref, p_cur_f);
        const Vec2 p_prev_f = world_to_frame(prev_ref, world);
        f.egomotion.at(0, 0, r, c) = static_cast<float>((p_prev_f.x - p_cur_f.x) / cfg.meters_per_cell);
        f.egomotion.at(0, 1, r, c) = static_cast<float>((p_prev_f.y - p_cur_f.y) / cfg.meters_per_cell);
      }
    }
  }
  return f;
}

std::pair<Grid<float>, Grid<float>> occlusion_split(const Scenario& sc, double t, double ref_t) {
  const bool ego_frame = sc.config.mode == FrameMode::EgoCentric;
  const Pose ref = ego_frame ? sc.agents[static_cast<size_t>(sc.ego_index)].pose_at(ref_t) : Pose{};
  Grid<float> occ;
  std::vector<int> claims;
  rasterize_occupancy(sc, t, ref, occ, claims);
  Grid<float> observed, occluded;
  split_visibility(sc, t, ref, claims, observed, occluded);
  return {std::move(observed), std::move(occluded)};
}

SampleRecord build_sample(const Scenario& sc) {
  const ScenarioConfig& cfg = sc.config;
  SampleRecord rec;
  rec.meta = cfg.meta();
  const auto schema = input_schema(cfg.mode);
  const int c_in = static_cast<int>(schema.size());
  const std::int64_t plane = static_cast<std::int64_t>(cfg.height) * cfg.width;

  for (int i = 0; i < cfg.t_h; ++i) {
    const double t = (i - (cfg.t_h - 1)) * cfg.dt_history;
    const double prev = t - cfg.dt_history;
    RasterFrame f = rasterize(sc, t, prev, t, prev);
    Grid<float> stacked(1, c_in, cfg.height, cfg.width);
    if (cfg.mode == FrameMode::Static) {
      std::copy(f.occ_observed.v.begin(), f.occ_observed.v.end(), stacked.plane(0, 0));
      for (int ch = 0; ch < 3; ++ch)
        std::copy(f.map_rgb.plane(0, ch), f.map_rgb.plane(0, ch) + plane, stacked.plane(0, 1 + ch));
      // Input flow travels with the input occupancy channel: masked to
      // what is actually observed at this timestep.
      for (std::int64_t j = 0; j < plane; ++j) {
        const float m = f.occ_observed.v[static_cast<size_t>(j)];
        stacked.plane(0, 4)[j] = f.flow.plane(0, 0)[j] * m;
        stacked.plane(0, 5)[j] = f.flow.plane(0, 1)[j] * m;
      }
    } else {
      std::copy(f.occ_observed.v.begin(), f.occ_observed.v.end(), stacked.plane(0, 0));
      std::copy(f.lane_occ.v.begin(), f.lane_occ.v.end(), stacked.plane(0, 1));
      std::copy(f.egomotion.plane(0, 0), f.egomotion.plane(0, 0) + plane, stacked.plane(0, 2));
      std::copy(f.egomotion.plane(0, 1), f.egomotion.plane(0, 1) + plane, stacked.plane(0, 3));
    }
    rec.inputs.push_back(std::move(stacked));
  }

  // Targets share one frame of reference: ego at t = 0 (or the static grid).
  RasterFrame t0 = rasterize(sc, 0.0, -cfg.dt_forecast, 0.0, 0.0);
  rec.targets.t0_occupancy = t0.occ_total;
  for (int k = 1; k <= cfg.t_f; ++k) {
    const double t = k * cfg.dt_forecast;
    const double prev = (k - 1) * cfg.dt_forecast;
    RasterFrame f = rasterize(sc, t, prev, 0.0, 0.0);
    rec.targets.occ_observed.push_back(std::move(f.occ_observed));
    rec.targets.occ_occluded.push_back(std::move(f.occ_occluded));
    rec.targets.flow.push_back(std::move(f.flow));
  }
  return rec;
}

}  // namespace ccflow::scenario
