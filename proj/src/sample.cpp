#include "ccflow/sample.hpp"

namespace ccflow {

std::vector<ChannelDesc> input_schema(FrameMode mode) {
  if (mode == FrameMode::Static) {
    return {{"occupancy", ChannelKind::Scalar}, {"map_r", ChannelKind::Scalar},  {"map_g", ChannelKind::Scalar},
            {"map_b", ChannelKind::Scalar},     {"flow_dx", ChannelKind::FlowX}, {"flow_dy", ChannelKind::FlowY}};
  }
  return {{"occupancy", ChannelKind::Scalar},
          {"lane", ChannelKind::Scalar},
          {"ego_dx", ChannelKind::FlowX},
          {"ego_dy", ChannelKind::FlowY}};
}

}  // namespace ccflow
