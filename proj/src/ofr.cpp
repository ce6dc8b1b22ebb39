#include "ccflow/ofr.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ccflow::ofr {

using nlohmann::json;

void write_planes(const std::string& path, const PlaneSet& ps) {
  if (ps.channels.size() != ps.planes.size()) throw ContractError("ofr: channel/plane count mismatch");
  json header;
  header["height"] = ps.meta.height;
  header["width"] = ps.meta.width;
  header["dtype"] = "f32";
  header["frame_mode"] = frame_mode_name(ps.meta.mode);
  header["t_h"] = ps.meta.t_h;
  header["t_f"] = ps.meta.t_f;
  header["meters_per_cell"] = ps.meta.meters_per_cell;
  header["dt_history"] = ps.meta.dt_history;
  header["dt_forecast"] = ps.meta.dt_forecast;
  header["channels"] = ps.channels;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  unsigned char len_le[4] = {static_cast<unsigned char>(len & 0xff), static_cast<unsigned char>((len >> 8) & 0xff),
                             static_cast<unsigned char>((len >> 16) & 0xff),
                             static_cast<unsigned char>((len >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(len_le), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  const std::int64_t plane = static_cast<std::int64_t>(ps.meta.height) * ps.meta.width;
  for (const Grid<float>& g : ps.planes) {
    if (g.numel() != plane) throw ShapeError("ofr: plane size mismatch for " + path);
    // Raw little-endian f32; this implementation targets little-endian hosts.
    out.write(reinterpret_cast<const char*>(g.v.data()), static_cast<std::streamsize>(plane * 4));
  }
  if (!out) throw IoError("write failed: " + path);
}

PlaneSet read_planes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad OFR magic in " + path);
  unsigned char len_le[4];
  in.read(reinterpret_cast<char*>(len_le), 4);
  if (!in) throw IoError("truncated OFR header in " + path);
  const std::uint32_t len = std::uint32_t(len_le[0]) | (std::uint32_t(len_le[1]) << 8) |
                            (std::uint32_t(len_le[2]) << 16) | (std::uint32_t(len_le[3]) << 24);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw IoError("truncated OFR header in " + path);
  json header = json::parse(hs);
  if (header.at("dtype").get<std::string>() != "f32") throw IoError("unsupported OFR dtype in " + path);

  PlaneSet ps;
  ps.meta.height = header.at("height").get<int>();
  ps.meta.width = header.at("width").get<int>();
  ps.meta.mode = frame_mode_from(header.at("frame_mode").get<std::string>());
  ps.meta.t_h = header.at("t_h").get<int>();
  ps.meta.t_f = header.at("t_f").get<int>();
  ps.meta.meters_per_cell = header.at("meters_per_cell").get<double>();
  ps.meta.dt_history = header.at("dt_history").get<double>();
  ps.meta.dt_forecast = header.at("dt_forecast").get<double>();
  ps.channels = header.at("channels").get<std::vector<std::string>>();

  const std::int64_t plane = static_cast<std::int64_t>(ps.meta.height) * ps.meta.width;
  for (size_t i = 0; i < ps.channels.size(); ++i) {
    Grid<float> g(1, 1, ps.meta.height, ps.meta.width);
    in.read(reinterpret_cast<char*>(g.v.data()), static_cast<std::streamsize>(plane * 4));
    if (!in) throw IoError("truncated OFR planes in " + path);
    ps.planes.push_back(std::move(g));
  }
  return ps;
}

namespace {

Grid<float> channel_of(const Grid<float>& stacked, int ch) {
  Grid<float> out(1, 1, stacked.shape.h, stacked.shape.w);
  const std::int64_t plane = static_cast<std::int64_t>(stacked.shape.h) * stacked.shape.w;
  std::copy(stacked.plane(0, ch), stacked.plane(0, ch) + plane, out.v.begin());
  return out;
}

}  // namespace

void write_sample(const std::string& path, const SampleRecord& rec) {
  PlaneSet ps;
  ps.meta = rec.meta;
  const auto schema = input_schema(rec.meta.mode);
  for (size_t i = 0; i < rec.inputs.size(); ++i) {
    for (size_t c = 0; c < schema.size(); ++c) {
      ps.channels.push_back("in/" + std::to_string(i) + "/" + schema[c].name);
      ps.planes.push_back(channel_of(rec.inputs[i], static_cast<int>(c)));
    }
  }
  ps.channels.push_back("t0/occupancy");
  ps.planes.push_back(rec.targets.t0_occupancy);
  for (int k = 0; k < rec.targets.waypoints(); ++k) {
    const std::string base = "gt/" + std::to_string(k + 1) + "/";
    ps.channels.push_back(base + "occupancy_observed");
    ps.planes.push_back(rec.targets.occ_observed[static_cast<size_t>(k)]);
    ps.channels.push_back(base + "occupancy_occluded");
    ps.planes.push_back(rec.targets.occ_occluded[static_cast<size_t>(k)]);
    ps.channels.push_back(base + "flow_dx");
    ps.planes.push_back(channel_of(rec.targets.flow[static_cast<size_t>(k)], 0));
    ps.channels.push_back(base + "flow_dy");
    ps.planes.push_back(channel_of(rec.targets.flow[static_cast<size_t>(k)], 1));
  }
  write_planes(path, ps);
}

SampleRecord read_sample(const std::string& path) {
  PlaneSet ps = read_planes(path);
  SampleRecord rec;
  rec.meta = ps.meta;
  const auto schema = input_schema(ps.meta.mode);
  const int c_in = static_cast<int>(schema.size());
  const std::int64_t plane = static_cast<std::int64_t>(ps.meta.height) * ps.meta.width;

  size_t idx = 0;
  auto expect = [&](const std::string& name) -> const Grid<float>& {
    if (idx >= ps.channels.size() || ps.channels[idx] != name)
      throw IoError("OFR channel order mismatch in " + path + ": expected " + name);
    return ps.planes[idx++];
  };

  for (int i = 0; i < ps.meta.t_h; ++i) {
    Grid<float> stacked(1, c_in, ps.meta.height, ps.meta.width);
    for (int c = 0; c < c_in; ++c) {
      const Grid<float>& g = expect("in/" + std::to_string(i) + "/" + schema[static_cast<size_t>(c)].name);
      std::copy(g.v.begin(), g.v.end(), stacked.plane(0, c));
    }
    rec.inputs.push_back(std::move(stacked));
  }
  rec.targets.t0_occupancy = expect("t0/occupancy");
  for (int k = 1; k <= ps.meta.t_f; ++k) {
    const std::string base = "gt/" + std::to_string(k) + "/";
    rec.targets.occ_observed.push_back(expect(base + "occupancy_observed"));
    rec.targets.occ_occluded.push_back(expect(base + "occupancy_occluded"));
    Grid<float> flow(1, 2, ps.meta.height, ps.meta.width);
    const Grid<float>& fx = expect(base + "flow_dx");
    std::copy(fx.v.begin(), fx.v.end(), flow.plane(0, 0));
    const Grid<float>& fy = expect(base + "flow_dy");
    std::copy(fy.v.begin(), fy.v.end(), flow.plane(0, 1));
    rec.targets.flow.push_back(std::move(flow));
    (void)plane;
  }
  return rec;
}

}  // namespace ccflow::ofr
