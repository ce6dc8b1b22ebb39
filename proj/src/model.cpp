#include "ccflow/model.hpp"

#include <cstring>
#include <fstream>

#include "ccflow/kernels.hpp"
#include "json.hpp"

namespace ccflow::model {

using nlohmann::json;

Census count_params(const ModelConfig& cfg) {
  ModelParams<float> p = build_params<float>(cfg);
  Census census;
  visit_params(p, [&](const std::string& name, Grid<float>& g, ParamKind) {
    const std::string group = name.substr(0, name.find('.'));
    if (census.groups.empty() || census.groups.back().group != group) census.groups.push_back({group, 0});
    census.groups.back().count += g.numel();
    census.total += g.numel();
  });
  // Collapse the per-layer encoder entries into one group each.
  std::vector<CensusEntry> merged;
  for (const auto& e : census.groups) {
    if (!merged.empty() && merged.back().group == e.group) merged.back().count += e.count;
    else merged.push_back(e);
  }
  census.groups = std::move(merged);
  return census;
}

PredictionSeq infer(ModelParams<float>& params, const SampleRecord& sample, int input_len, int t_f,
                    int reset_window) {
  Tape<float> g;
  g.set_recording(false);
  BoundModel<float> bm = bind_params(g, params, false);
  const int tf = t_f > 0 ? t_f : sample.meta.t_f;

  std::vector<WaypointVars<float>> wps;
  const int total = static_cast<int>(sample.inputs.size());
  const int len = input_len > 0 ? input_len : total;
  if (reset_window > 0 && len > reset_window && !bm.config.no_accumulation) {
    // Windowed accumulation: state zero-resets on boundaries counted back
    // from the final frame, so the last window always ends at t = 0.
    if (len > total) throw ShapeError("input_len exceeds available frames");
    const Shape s = sample.inputs[0].shape;
    const int lh = s.h / 4, lw = s.w / 4;
    State<float> state{g.leaf(Grid<float>(s.b, bm.config.latent_channels, lh, lw)),
                       g.leaf(Grid<float>(s.b, bm.config.latent_channels, lh, lw))};
    for (int i = 0; i < len; ++i) {
      if (i > 0 && (len - i) % reset_window == 0) {
        state = State<float>{g.leaf(Grid<float>(s.b, bm.config.latent_channels, lh, lw)),
                             g.leaf(Grid<float>(s.b, bm.config.latent_channels, lh, lw))};
      }
      Grid<float> frame = sample.inputs[static_cast<size_t>(total - len + i)];
      if (bm.config.no_input_flow) frame = strip_input_flow(bm.config, std::move(frame));
      state = accumulate_step(g, bm, encode(g, bm, g.leaf(std::move(frame))), state);
    }
    for (int k = 0; k < tf; ++k) {
      state = forecast_step(g, bm, state);
      auto [occ, flow] = decode(g, bm, state.hidden);
      wps.push_back(WaypointVars<float>{occ, flow});
    }
  } else {
    wps = forward(g, bm, sample.inputs, tf, input_len);
  }

  PredictionSeq out;
  for (const auto& wp : wps) {
    Grid<float> occ = g.val(wp.occ_logits);
    for (float& x : occ.v) x = kernels::stable_sigmoid(x);
    out.occ_prob.push_back(std::move(occ));
    out.flow.push_back(g.val(wp.flow));
  }
  return out;
}

namespace {

constexpr char kMagic[9] = "CCLSTMCK";

json config_to_json(const ModelConfig& c) {
  json j;
  j["input_channels"] = c.input_channels;
  j["latent_channels"] = c.latent_channels;
  j["height"] = c.height;
  j["width"] = c.width;
  j["channels_per_group"] = c.channels_per_group;
  j["leaky_slope"] = c.leaky_slope;
  j["forecast_steps"] = c.forecast_steps;
  j["no_accumulation"] = c.no_accumulation;
  j["direct_multiframe"] = c.direct_multiframe;
  j["no_input_flow"] = c.no_input_flow;
  j["flow_input_channels"] = c.flow_input_channels;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_channels = j.at("input_channels").get<int>();
  c.latent_channels = j.at("latent_channels").get<int>();
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.channels_per_group = j.at("channels_per_group").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.forecast_steps = j.at("forecast_steps").get<int>();
  c.no_accumulation = j.at("no_accumulation").get<bool>();
  c.direct_multiframe = j.at("direct_multiframe").get<bool>();
  c.no_input_flow = j.at("no_input_flow").get<bool>();
  c.flow_input_channels = j.at("flow_input_channels").get<std::vector<int>>();
  return c;
}

struct NamedTensor {
  std::string name;
  Grid<float>* grid;
};

}  // namespace

void save_checkpoint(const std::string& path, ModelParams<float>& params, std::int64_t step, double best_metric,
                     const OptimizerMoments* opt) {
  std::vector<NamedTensor> tensors;
  std::vector<std::string> names;
  visit_params(params, [&](const std::string& name, Grid<float>& g, ParamKind) {
    tensors.push_back({name, &g});
    names.push_back(name);
  });
  std::vector<Grid<float>> opt_copies;
  if (opt) {
    if (opt->m.size() != names.size() || opt->v.size() != names.size())
      throw ContractError("optimizer moment count mismatch");
    opt_copies.reserve(names.size() * 2);
    for (size_t i = 0; i < names.size(); ++i) opt_copies.push_back(opt->m[i]);
    for (size_t i = 0; i < names.size(); ++i) opt_copies.push_back(opt->v[i]);
    for (size_t i = 0; i < names.size(); ++i) tensors.push_back({"opt.m." + names[i], &opt_copies[i]});
    for (size_t i = 0; i < names.size(); ++i) tensors.push_back({"opt.v." + names[i], &opt_copies[names.size() + i]});
  }

  json header;
  header["config"] = config_to_json(params.config);
  header["step"] = step;
  header["best_metric"] = best_metric;
  header["has_optimizer"] = opt != nullptr;
  if (opt) header["optimizer_step"] = opt->step;
  json manifest = json::array();
  std::int64_t offset = 0;
  for (const auto& t : tensors) {
    json entry;
    entry["name"] = t.name;
    entry["shape"] = {t.grid->shape.b, t.grid->shape.c, t.grid->shape.h, t.grid->shape.w};
    entry["offset"] = offset;
    manifest.push_back(entry);
    offset += t.grid->numel() * 4;
  }
  header["tensors"] = manifest;
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
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.grid->v.data()), static_cast<std::streamsize>(t.grid->numel() * 4));
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad checkpoint magic in " + path);
  unsigned char len_le[4];
  in.read(reinterpret_cast<char*>(len_le), 4);
  const std::uint32_t len = std::uint32_t(len_le[0]) | (std::uint32_t(len_le[1]) << 8) |
                            (std::uint32_t(len_le[2]) << 16) | (std::uint32_t(len_le[3]) << 24);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw IoError("truncated checkpoint header in " + path);
  json header = json::parse(hs);

  Checkpoint ck;
  ck.params = build_params<float>(config_from_json(header.at("config")));
  ck.step = header.at("step").get<std::int64_t>();
  ck.best_metric = header.at("best_metric").get<double>();
  const bool has_opt = header.at("has_optimizer").get<bool>();

  std::vector<NamedTensor> tensors;
  std::vector<std::string> names;
  visit_params(ck.params, [&](const std::string& name, Grid<float>& g, ParamKind) {
    tensors.push_back({name, &g});
    names.push_back(name);
  });
  OptimizerMoments opt;
  if (has_opt) {
    opt.step = header.at("optimizer_step").get<std::int64_t>();
    for (const auto& t : tensors) {
      opt.m.emplace_back(t.grid->shape);
      opt.v.emplace_back(t.grid->shape);
    }
    const size_t n = names.size();
    for (size_t i = 0; i < n; ++i) tensors.push_back({"opt.m." + names[i], &opt.m[i]});
    for (size_t i = 0; i < n; ++i) tensors.push_back({"opt.v." + names[i], &opt.v[i]});
  }

  const json& manifest = header.at("tensors");
  if (manifest.size() != tensors.size())
    throw IoError("checkpoint tensor count mismatch in " + path + ": " + std::to_string(manifest.size()) + " vs " +
                  std::to_string(tensors.size()));
  for (size_t i = 0; i < tensors.size(); ++i) {
    const json& entry = manifest[i];
    if (entry.at("name").get<std::string>() != tensors[i].name)
      throw IoError("checkpoint tensor order mismatch: " + entry.at("name").get<std::string>() + " vs " +
                    tensors[i].name);
    in.read(reinterpret_cast<char*>(tensors[i].grid->v.data()),
            static_cast<std::streamsize>(tensors[i].grid->numel() * 4));
    if (!in) throw IoError("truncated checkpoint tensors in " + path);
  }
  if (has_opt) ck.opt = std::move(opt);
  return ck;
}

}  // namespace ccflow::model
