#pragma once

// OFR on-disk raster format (bit-exact):
//   8-byte magic "OFRASTR1"
//   4-byte little-endian unsigned header length
//   UTF-8 JSON header: grid dims, channel names in order, dtype "f32",
//     frame_mode, T_h, T_f, meters-per-cell, dt values
//   raw little-endian float32 planes in header order, C-contiguous.

#include <string>
#include <vector>

#include "ccflow/sample.hpp"
#include "ccflow/tensor.hpp"

namespace ccflow::ofr {

inline constexpr char kMagic[9] = "OFRASTR1";

struct PlaneSet {
  DatasetMeta meta;
  std::vector<std::string> channels;   // plane names, in file order
  std::vector<Grid<float>> planes;     // each (1,1,H,W)
};

void write_planes(const std::string& path, const PlaneSet& ps);
PlaneSet read_planes(const std::string& path);

// SampleRecord <-> plane-set mapping. Input frame i contributes its schema
// channels as "in/<i>/<name>"; "t0/occupancy" holds the total occupancy at
// t = 0; waypoint k contributes "gt/<k>/..." planes.
void write_sample(const std::string& path, const SampleRecord& rec);
SampleRecord read_sample(const std::string& path);

}  // namespace ccflow::ofr
