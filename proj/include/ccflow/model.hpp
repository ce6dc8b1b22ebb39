#pragma once

// The coupled convolutional LSTM forecaster: per-frame encoder, an
// accumulation cell that fuses the encoded history, a forecasting cell
// unrolled autoregressively with no external input, and two decoder
// branches (occupancy logits, reverse flow).

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccflow/sample.hpp"
#include "ccflow/tape.hpp"
#include "ccflow/tensor.hpp"

namespace ccflow::model {

struct ModelConfig {
  int input_channels = 6;
  int latent_channels = 64;  // C
  int height = 64;
  int width = 64;
  int channels_per_group = 8;
  double leaky_slope = 0.01;
  int forecast_steps = 4;  // T_f; fixes output widths in direct_multiframe mode

  // Ablation variants.
  bool no_accumulation = false;    // encode only the last input frame
  bool direct_multiframe = false;  // single decode, waypoints stacked on channels
  bool no_input_flow = false;      // zero the flow-typed input channels

  // Input channel indices zeroed by no_input_flow (from the dataset schema).
  std::vector<int> flow_input_channels;

  void validate() const {
    if (latent_channels < 8 || latent_channels % 8 != 0)
      throw ConfigError("latent_channels must be a positive multiple of 8, got " + std::to_string(latent_channels));
    if (latent_channels % channels_per_group != 0)
      throw ConfigError("latent_channels " + std::to_string(latent_channels) + " not divisible by channels_per_group " +
                        std::to_string(channels_per_group));
    if (height % 4 != 0 || width % 4 != 0)
      throw ConfigError("grid dims must be divisible by 4, got " + std::to_string(height) + "x" + std::to_string(width));
    if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
    if (forecast_steps < 0) throw ConfigError("forecast_steps must be >= 0");
    if (no_accumulation && direct_multiframe)
      throw ConfigError("no_accumulation and direct_multiframe are mutually exclusive ablations");
  }

  // Group count for a given layer width: channels_per_group channels per
  // group, collapsing to a single group for narrow layers.
  int groups_for(int channels) const {
    if (channels < channels_per_group) return 1;
    if (channels % channels_per_group != 0)
      throw ConfigError("layer width " + std::to_string(channels) + " not divisible by channels_per_group");
    return channels / channels_per_group;
  }

  int occ_out_channels() const { return direct_multiframe ? 2 * forecast_steps : 2; }
  int flow_out_channels() const { return direct_multiframe ? 2 * forecast_steps : 2; }
};

enum class ParamKind { ConvWeight, TConvWeight, Bias, Gamma, Beta };

template <typename T>
struct ConvP {
  Grid<T> w;  // conv: (c_out,c_in,k,k); transposed: (c_in,c_out,k,k)
  Grid<T> b;  // empty when bias-free
  int stride = 1;
  bool transposed = false;
};

template <typename T>
struct NormP {
  Grid<T> gamma, beta;  // (1,C,1,1) stored flat as (1,1,1,C)? kept (1,C,1,1)
  int groups = 1;
};

template <typename T>
struct GateNetP {
  ConvP<T> c1, c2, c3;
  NormP<T> n1, n2;
};

template <typename T>
struct CellP {
  GateNetP<T> input, forget, gate, output;
  NormP<T> state_norm;
};

template <typename T>
struct DecoderP {
  ConvP<T> t1, t2, t3;  // transposed convs, strides 2,2,1
  NormP<T> n1, n2, n3;
  ConvP<T> smooth;  // final plain conv
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::array<ConvP<T>, 4> enc;
  std::array<NormP<T>, 4> enc_norm;
  CellP<T> acc;
  CellP<T> fore;
  DecoderP<T> dec_occ;
  DecoderP<T> dec_flow;
};

// Visits every parameter tensor in canonical order. This order pins the
// checkpoint manifest, optimizer-state layout and gradient reduction.
template <typename T, typename F>
void visit_params(ModelParams<T>& p, F&& f) {
  auto conv = [&](const std::string& base, ConvP<T>& c) {
    f(base + ".w", c.w, c.transposed ? ParamKind::TConvWeight : ParamKind::ConvWeight);
    if (!c.b.empty()) f(base + ".b", c.b, ParamKind::Bias);
  };
  auto norm = [&](const std::string& base, NormP<T>& n) {
    f(base + ".gamma", n.gamma, ParamKind::Gamma);
    f(base + ".beta", n.beta, ParamKind::Beta);
  };
  auto gatenet = [&](const std::string& base, GateNetP<T>& g) {
    conv(base + ".c1", g.c1);
    norm(base + ".n1", g.n1);
    conv(base + ".c2", g.c2);
    norm(base + ".n2", g.n2);
    conv(base + ".c3", g.c3);
  };
  auto cell = [&](const std::string& base, CellP<T>& c) {
    gatenet(base + ".i", c.input);
    gatenet(base + ".f", c.forget);
    gatenet(base + ".g", c.gate);
    gatenet(base + ".o", c.output);
    norm(base + ".state_norm", c.state_norm);
  };
  auto decoder = [&](const std::string& base, DecoderP<T>& d) {
    conv(base + ".t1", d.t1);
    norm(base + ".n1", d.n1);
    conv(base + ".t2", d.t2);
    norm(base + ".n2", d.n2);
    conv(base + ".t3", d.t3);
    norm(base + ".n3", d.n3);
    conv(base + ".smooth", d.smooth);
  };
  for (int i = 0; i < 4; ++i) {
    conv("encoder." + std::to_string(i), p.enc[i]);
    norm("encoder." + std::to_string(i) + ".gn", p.enc_norm[i]);
  }
  cell("acc", p.acc);
  cell("fore", p.fore);
  decoder("dec_occ", p.dec_occ);
  decoder("dec_flow", p.dec_flow);
}

// Allocates all parameter tensors with the shapes implied by the config
// (values zero).
template <typename T>
ModelParams<T> build_params(const ModelConfig& cfg) {
  cfg.validate();
  const int c = cfg.latent_channels;
  ModelParams<T> p;
  p.config = cfg;

  auto conv = [](int c_out, int c_in, int k, int stride, bool bias) {
    ConvP<T> l;
    l.w = Grid<T>(c_out, c_in, k, k);
    if (bias) l.b = Grid<T>(1, c_out, 1, 1);
    l.stride = stride;
    return l;
  };
  auto tconv = [](int c_in, int c_out, int k, int stride) {
    ConvP<T> l;
    l.w = Grid<T>(c_in, c_out, k, k);
    l.b = Grid<T>(1, c_out, 1, 1);
    l.stride = stride;
    l.transposed = true;
    return l;
  };
  auto norm = [&](int ch) {
    NormP<T> n;
    n.gamma = Grid<T>(1, ch, 1, 1);
    n.beta = Grid<T>(1, ch, 1, 1);
    n.groups = cfg.groups_for(ch);
    return n;
  };

  // Encoder: kernel 5 then three kernel 3, bias-free, x4 downsample via
  // strides [2,1,2,1], width ramp [C/4, C/2, C, C].
  const int e0 = c / 4, e1 = c / 2;
  p.enc[0] = conv(e0, cfg.input_channels, 5, 2, false);
  p.enc[1] = conv(e1, e0, 3, 1, false);
  p.enc[2] = conv(c, e1, 3, 2, false);
  p.enc[3] = conv(c, c, 3, 1, false);
  for (int i = 0; i < 4; ++i) p.enc_norm[i] = norm(p.enc[i].w.shape.b);

  auto gatenet = [&](int in_ch, int k) {
    GateNetP<T> g;
    g.c1 = conv(c, in_ch, k, 1, true);
    g.n1 = norm(c);
    g.c2 = conv(c, c, k, 1, true);
    g.n2 = norm(c);
    g.c3 = conv(c, c, k, 1, true);
    return g;
  };
  auto cell = [&](int in_ch, int k) {
    CellP<T> cl;
    cl.input = gatenet(in_ch, k);
    cl.forget = gatenet(in_ch, k);
    cl.gate = gatenet(in_ch, k);
    cl.output = gatenet(in_ch, k);
    cl.state_norm = norm(c);
    return cl;
  };
  p.acc = cell(2 * c, 3);  // gates see [X_t || H_{t-1}]
  p.fore = cell(c, 5);     // gates see H_{t-1} only

  auto decoder = [&](int out_ch) {
    DecoderP<T> d;
    d.t1 = tconv(c, c / 2, 3, 2);
    d.n1 = norm(c / 2);
    d.t2 = tconv(c / 2, c / 4, 3, 2);
    d.n2 = norm(c / 4);
    d.t3 = tconv(c / 4, c / 8, 3, 1);
    d.n3 = norm(c / 8);
    d.smooth = conv(out_ch, c / 8, 3, 1, true);
    return d;
  };
  p.dec_occ = decoder(cfg.occ_out_channels());
  p.dec_flow = decoder(cfg.flow_out_channels());
  return p;
}

// Weights uniform in +-sqrt(1/fan_in), biases zero except the forget-gate
// nets' final-layer bias at 1.0, gamma 1, beta 0. Deterministic per seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<T> p = build_params<T>(cfg);
  Rng rng(seed);
  visit_params(p, [&](const std::string& name, Grid<T>& g, ParamKind kind) {
    switch (kind) {
      case ParamKind::ConvWeight:
      case ParamKind::TConvWeight: {
        const int in_ch = kind == ParamKind::TConvWeight ? g.shape.b : g.shape.c;
        const double bound = std::sqrt(1.0 / (static_cast<double>(in_ch) * g.shape.h * g.shape.w));
        for (auto& x : g.v) x = static_cast<T>(rng.uniform(-bound, bound));
        break;
      }
      case ParamKind::Bias:
        g.fill(T(0));
        break;
      case ParamKind::Gamma:
        g.fill(T(1));
        break;
      case ParamKind::Beta:
        g.fill(T(0));
        break;
    }
    (void)name;
  });
  p.acc.forget.c3.b.fill(T(1));
  p.fore.forget.c3.b.fill(T(1));
  return p;
}

struct CensusEntry {
  std::string group;
  std::int64_t count;
};

struct Census {
  std::vector<CensusEntry> groups;
  std::int64_t total = 0;
};

Census count_params(const ModelConfig& cfg);

// ---- Tape-bound forward pass ----------------------------------------------

template <typename T>
struct BoundConv {
  Var w, b;
  int stride = 1;
  bool transposed = false;
};
template <typename T>
struct BoundNorm {
  Var gamma, beta;
  int groups = 1;
};
template <typename T>
struct BoundGateNet {
  BoundConv<T> c1, c2, c3;
  BoundNorm<T> n1, n2;
};
template <typename T>
struct BoundCell {
  BoundGateNet<T> input, forget, gate, output;
  BoundNorm<T> state_norm;
};
template <typename T>
struct BoundDecoder {
  BoundConv<T> t1, t2, t3;
  BoundNorm<T> n1, n2, n3;
  BoundConv<T> smooth;
};

template <typename T>
struct BoundModel {
  ModelConfig config;
  std::array<BoundConv<T>, 4> enc;
  std::array<BoundNorm<T>, 4> enc_norm;
  BoundCell<T> acc, fore;
  BoundDecoder<T> dec_occ, dec_flow;
  std::vector<Var> order;  // all parameter Vars in visit order
};

// Registers every parameter as a tape leaf. Gradient extraction after
// backward() follows `order`, which matches visit_params order.
template <typename T>
BoundModel<T> bind_params(Tape<T>& g, ModelParams<T>& p, bool trainable) {
  BoundModel<T> b;
  b.config = p.config;
  std::map<std::string, Var> by_name;
  visit_params(p, [&](const std::string& name, Grid<T>& grid, ParamKind) {
    Var v = g.leaf(grid, trainable);
    by_name[name] = v;
    b.order.push_back(v);
  });
  // Re-walk the structure to wire the bound mirror.
  auto conv = [&](const std::string& base, ConvP<T>& c) {
    BoundConv<T> bc;
    bc.w = by_name.at(base + ".w");
    if (!c.b.empty()) bc.b = by_name.at(base + ".b");
    bc.stride = c.stride;
    bc.transposed = c.transposed;
    return bc;
  };
  auto norm = [&](const std::string& base, NormP<T>& n) {
    BoundNorm<T> bn;
    bn.gamma = by_name.at(base + ".gamma");
    bn.beta = by_name.at(base + ".beta");
    bn.groups = n.groups;
    return bn;
  };
  auto gatenet = [&](const std::string& base, GateNetP<T>& gn) {
    BoundGateNet<T> bg;
    bg.c1 = conv(base + ".c1", gn.c1);
    bg.n1 = norm(base + ".n1", gn.n1);
    bg.c2 = conv(base + ".c2", gn.c2);
    bg.n2 = norm(base + ".n2", gn.n2);
    bg.c3 = conv(base + ".c3", gn.c3);
    return bg;
  };
  auto cell = [&](const std::string& base, CellP<T>& c) {
    BoundCell<T> bc;
    bc.input = gatenet(base + ".i", c.input);
    bc.forget = gatenet(base + ".f", c.forget);
    bc.gate = gatenet(base + ".g", c.gate);
    bc.output = gatenet(base + ".o", c.output);
    bc.state_norm = norm(base + ".state_norm", c.state_norm);
    return bc;
  };
  auto decoder = [&](const std::string& base, DecoderP<T>& d) {
    BoundDecoder<T> bd;
    bd.t1 = conv(base + ".t1", d.t1);
    bd.n1 = norm(base + ".n1", d.n1);
    bd.t2 = conv(base + ".t2", d.t2);
    bd.n2 = norm(base + ".n2", d.n2);
    bd.t3 = conv(base + ".t3", d.t3);
    bd.n3 = norm(base + ".n3", d.n3);
    bd.smooth = conv(base + ".smooth", d.smooth);
    return bd;
  };
  for (int i = 0; i < 4; ++i) {
    b.enc[i] = conv("encoder." + std::to_string(i), p.enc[i]);
    b.enc_norm[i] = norm("encoder." + std::to_string(i) + ".gn", p.enc_norm[i]);
  }
  b.acc = cell("acc", p.acc);
  b.fore = cell("fore", p.fore);
  b.dec_occ = decoder("dec_occ", p.dec_occ);
  b.dec_flow = decoder("dec_flow", p.dec_flow);
  return b;
}

template <typename T>
struct State {
  Var hidden, cell;
};

template <typename T>
Var apply_conv(Tape<T>& g, const BoundConv<T>& c, Var x) {
  return c.transposed ? g.conv_transpose2d(x, c.w, c.b, c.stride) : g.conv2d(x, c.w, c.b, c.stride);
}

template <typename T>
Var encode(Tape<T>& g, const BoundModel<T>& m, Var frame) {
  const T slope = static_cast<T>(m.config.leaky_slope);
  Var x = frame;
  for (int i = 0; i < 4; ++i) {
    x = apply_conv(g, m.enc[i], x);
    x = g.leaky_relu(x, slope);
    x = g.group_norm(x, m.enc_norm[i].groups, m.enc_norm[i].gamma, m.enc_norm[i].beta);
  }
  return x;
}

template <typename T>
Var gate_net(Tape<T>& g, const ModelConfig& cfg, const BoundGateNet<T>& gn, Var x) {
  const T slope = static_cast<T>(cfg.leaky_slope);
  Var a = apply_conv(g, gn.c1, x);
  a = g.leaky_relu(a, slope);
  a = g.group_norm(a, gn.n1.groups, gn.n1.gamma, gn.n1.beta);
  a = apply_conv(g, gn.c2, a);
  a = g.leaky_relu(a, slope);
  a = g.group_norm(a, gn.n2.groups, gn.n2.gamma, gn.n2.beta);
  return apply_conv(g, gn.c3, a);
}

// One accumulation step: gates from [X_t || H_{t-1}],
// C_t = f*C_{t-1} + i*g, H_t = o * tanh(GroupNorm(C_t)).
template <typename T>
State<T> accumulate_step(Tape<T>& g, const BoundModel<T>& m, Var latent, const State<T>& prev) {
  Var xc = g.concat_channels({latent, prev.hidden});
  Var i = g.sigmoid(gate_net(g, m.config, m.acc.input, xc));
  Var f = g.sigmoid(gate_net(g, m.config, m.acc.forget, xc));
  Var gg = g.tanh_(gate_net(g, m.config, m.acc.gate, xc));
  Var o = g.sigmoid(gate_net(g, m.config, m.acc.output, xc));
  State<T> out;
  out.cell = g.add(g.mul(f, prev.cell), g.mul(i, gg));
  Var cn = g.group_norm(out.cell, m.acc.state_norm.groups, m.acc.state_norm.gamma, m.acc.state_norm.beta);
  out.hidden = g.mul(o, g.tanh_(cn));
  return out;
}

// One forecasting step: gates from H_{t-1} alone.
template <typename T>
State<T> forecast_step(Tape<T>& g, const BoundModel<T>& m, const State<T>& prev) {
  Var i = g.sigmoid(gate_net(g, m.config, m.fore.input, prev.hidden));
  Var f = g.sigmoid(gate_net(g, m.config, m.fore.forget, prev.hidden));
  Var gg = g.tanh_(gate_net(g, m.config, m.fore.gate, prev.hidden));
  Var o = g.sigmoid(gate_net(g, m.config, m.fore.output, prev.hidden));
  State<T> out;
  out.cell = g.add(g.mul(f, prev.cell), g.mul(i, gg));
  Var cn = g.group_norm(out.cell, m.fore.state_norm.groups, m.fore.state_norm.gamma, m.fore.state_norm.beta);
  out.hidden = g.mul(o, g.tanh_(cn));
  return out;
}

template <typename T>
Var decode_branch(Tape<T>& g, const ModelConfig& cfg, const BoundDecoder<T>& d, Var hidden) {
  const T slope = static_cast<T>(cfg.leaky_slope);
  Var x = apply_conv(g, d.t1, hidden);
  x = g.leaky_relu(x, slope);
  x = g.group_norm(x, d.n1.groups, d.n1.gamma, d.n1.beta);
  x = apply_conv(g, d.t2, x);
  x = g.leaky_relu(x, slope);
  x = g.group_norm(x, d.n2.groups, d.n2.gamma, d.n2.beta);
  x = apply_conv(g, d.t3, x);
  x = g.leaky_relu(x, slope);
  x = g.group_norm(x, d.n3.groups, d.n3.gamma, d.n3.beta);
  return apply_conv(g, d.smooth, x);
}

// Raw logits for occupancy; the flow branch has no output activation.
template <typename T>
std::pair<Var, Var> decode(Tape<T>& g, const BoundModel<T>& m, Var hidden) {
  return {decode_branch(g, m.config, m.dec_occ, hidden), decode_branch(g, m.config, m.dec_flow, hidden)};
}

template <typename T>
struct WaypointVars {
  Var occ_logits;  // (B,2,H,W)
  Var flow;        // (B,2,H,W)
};

// Zeroes the configured flow channels of an input frame (no_input_flow).
template <typename T>
Grid<T> strip_input_flow(const ModelConfig& cfg, Grid<T> frame) {
  const std::int64_t plane = static_cast<std::int64_t>(frame.shape.h) * frame.shape.w;
  for (int b = 0; b < frame.shape.b; ++b)
    for (int ch : cfg.flow_input_channels) {
      T* p = frame.plane(b, ch);
      std::fill(p, p + plane, T(0));
    }
  return frame;
}

// Full unroll: T_h accumulate steps then T_f forecast/decode steps.
// `input_len` (when > 0) keeps only that many trailing frames.
template <typename T>
std::vector<WaypointVars<T>> forward(Tape<T>& g, const BoundModel<T>& m, const std::vector<Grid<T>>& input_frames,
                                     int t_f, int input_len = 0) {
  const ModelConfig& cfg = m.config;
  if (input_frames.empty()) throw ShapeError("forward: no input frames");
  if (input_len > static_cast<int>(input_frames.size()))
    throw ShapeError("forward: input_len " + std::to_string(input_len) + " exceeds available frames " +
                     std::to_string(input_frames.size()));

  size_t first = input_len > 0 ? input_frames.size() - static_cast<size_t>(input_len) : 0;
  if (cfg.no_accumulation) first = input_frames.size() - 1;

  const Shape in_shape = input_frames[first].shape;
  if (in_shape.c != cfg.input_channels)
    throw ShapeError("forward: frame channels " + std::to_string(in_shape.c) + " != configured " +
                     std::to_string(cfg.input_channels));

  const int lh = in_shape.h / 4, lw = in_shape.w / 4;
  State<T> state;
  state.hidden = g.leaf(Grid<T>(in_shape.b, cfg.latent_channels, lh, lw));
  state.cell = g.leaf(Grid<T>(in_shape.b, cfg.latent_channels, lh, lw));

  for (size_t i = first; i < input_frames.size(); ++i) {
    Grid<T> frame = input_frames[i];
    if (cfg.no_input_flow) frame = strip_input_flow(cfg, std::move(frame));
    Var x = encode(g, m, g.leaf(std::move(frame)));
    state = accumulate_step(g, m, x, state);
  }

  std::vector<WaypointVars<T>> out;
  if (t_f == 0) return out;
  if (cfg.direct_multiframe) {
    if (t_f != cfg.forecast_steps)
      throw ShapeError("direct_multiframe decoder is built for T_f = " + std::to_string(cfg.forecast_steps));
    auto [occ_all, flow_all] = decode(g, m, state.hidden);
    for (int k = 0; k < t_f; ++k) {
      WaypointVars<T> wp;
      wp.occ_logits = g.slice_channels(occ_all, 2 * k, 2);
      wp.flow = g.slice_channels(flow_all, 2 * k, 2);
      out.push_back(wp);
    }
    return out;
  }
  for (int k = 0; k < t_f; ++k) {
    state = forecast_step(g, m, state);
    auto [occ, flow] = decode(g, m, state.hidden);
    out.push_back(WaypointVars<T>{occ, flow});
  }
  return out;
}

// Inference: forward without recording, sigmoid applied to occupancy.
// input_len keeps only that many trailing frames; reset_window > 0
// zero-resets the accumulator state on window boundaries aligned to the
// final frame (long-sequence analysis mode).
PredictionSeq infer(ModelParams<float>& params, const SampleRecord& sample, int input_len = 0, int t_f = 0,
                    int reset_window = 0);

// ---- Checkpoint format ------------------------------------------------
// "CCLSTMCK" magic, little-endian u32 header length, JSON header (config,
// tensor manifest with shapes and byte offsets, step counter, optimizer
// presence flag), then raw little-endian float32 tensors in manifest order.

struct OptimizerMoments {
  std::vector<Grid<float>> m, v;  // visit order
  std::int64_t step = 0;
};

void save_checkpoint(const std::string& path, ModelParams<float>& params, std::int64_t step, double best_metric,
                     const OptimizerMoments* opt = nullptr);

struct Checkpoint {
  ModelParams<float> params;
  std::int64_t step = 0;
  double best_metric = 0;
  std::optional<OptimizerMoments> opt;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ccflow::model
