#pragma once

// Finite-difference verification of every differentiable op and of the two
// recurrent cells, over randomized shapes. Shared by the unit tests and the
// acceptance suite (which runs it at the full shape count).

#include <string>
#include <vector>

#include "ccflow/losses.hpp"
#include "ccflow/model.hpp"
#include "oracles.hpp"

namespace gradsuite {

using ccflow::Grid;
using ccflow::Rng;
using ccflow::Shape;
using ccflow::Tape;
using ccflow::Var;

struct OpResult {
  std::string name;
  double max_rel_err = 0;
  std::int64_t checked = 0;
};

inline Shape random_small_shape(Rng& rng, int max_c = 4, int max_hw = 8) {
  return Shape(static_cast<int>(rng.uniform_int(1, 2)), static_cast<int>(rng.uniform_int(1, max_c)),
               static_cast<int>(rng.uniform_int(2, max_hw)), static_cast<int>(rng.uniform_int(2, max_hw)));
}

// Every elementary op, `shapes` random shapes each.
inline std::vector<OpResult> run_op_suite(int shapes, std::uint64_t seed) {
  std::vector<OpResult> results;
  auto record = [&](const std::string& name, const oracle::GradCheckResult& r) {
    for (auto& e : results)
      if (e.name == name) {
        e.max_rel_err = std::max(e.max_rel_err, r.max_rel_err);
        e.checked += r.checked;
        return;
      }
    results.push_back({name, r.max_rel_err, r.checked});
  };
  Rng rng(seed);

  for (int s = 0; s < shapes; ++s) {
    {  // conv2d: input, weights and bias all differentiable
      const Shape xs = random_small_shape(rng);
      const int c_out = static_cast<int>(rng.uniform_int(1, 3));
      const int k = rng.bernoulli(0.5) ? 3 : 5;
      const int stride = rng.bernoulli(0.5) ? 1 : 2;
      auto x = ccflow::random_grid<double>(xs, rng);
      auto w = ccflow::random_grid<double>(Shape(c_out, xs.c, k, k), rng);
      auto b = ccflow::random_grid<double>(Shape(1, c_out, 1, 1), rng);
      auto build = [stride](Tape<double>& g, const std::vector<Var>& in) {
        Var y = g.conv2d(in[0], in[1], in[2], stride);
        return g.sum(g.mul(y, y));
      };
      record("conv2d", oracle::grad_check(build, {x, w, b}, {true, true, true}));
    }
    {  // conv_transpose2d
      const Shape xs = random_small_shape(rng, 3, 5);
      const int c_out = static_cast<int>(rng.uniform_int(1, 3));
      const int k = rng.bernoulli(0.5) ? 3 : 5;
      const int stride = rng.bernoulli(0.5) ? 1 : 2;
      auto x = ccflow::random_grid<double>(xs, rng);
      auto w = ccflow::random_grid<double>(Shape(xs.c, c_out, k, k), rng);
      auto b = ccflow::random_grid<double>(Shape(1, c_out, 1, 1), rng);
      auto build = [stride](Tape<double>& g, const std::vector<Var>& in) {
        Var y = g.conv_transpose2d(in[0], in[1], in[2], stride);
        return g.sum(g.mul(y, y));
      };
      record("conv_transpose2d", oracle::grad_check(build, {x, w, b}, {true, true, true}));
    }
    {  // group_norm
      const int groups = static_cast<int>(rng.uniform_int(1, 2));
      const int c = groups * static_cast<int>(rng.uniform_int(1, 3));
      const Shape xs(static_cast<int>(rng.uniform_int(1, 2)), c, static_cast<int>(rng.uniform_int(2, 6)),
                     static_cast<int>(rng.uniform_int(2, 6)));
      auto x = ccflow::random_grid<double>(xs, rng);
      auto gamma = ccflow::random_grid<double>(Shape(1, c, 1, 1), rng, 0.5, 1.5);
      auto beta = ccflow::random_grid<double>(Shape(1, c, 1, 1), rng);
      auto build = [groups](Tape<double>& g, const std::vector<Var>& in) {
        Var y = g.group_norm(in[0], groups, in[1], in[2]);
        return g.sum(g.mul(y, y));
      };
      record("group_norm", oracle::grad_check(build, {x, gamma, beta}, {true, true, true}));
    }
    {  // elementwise activations; inputs kept away from the leaky kink
      Shape xs = random_small_shape(rng);
      auto x = ccflow::random_grid<double>(xs, rng, 0.05, 2.0);
      for (auto& v : x.v)
        if (rng.bernoulli(0.5)) v = -v;
      auto lrelu = [](Tape<double>& g, const std::vector<Var>& in) { return g.sum(g.mul(g.leaky_relu(in[0]), g.leaky_relu(in[0]))); };
      auto sig = [](Tape<double>& g, const std::vector<Var>& in) { return g.sum(g.mul(g.sigmoid(in[0]), g.sigmoid(in[0]))); };
      auto th = [](Tape<double>& g, const std::vector<Var>& in) { return g.sum(g.mul(g.tanh_(in[0]), g.tanh_(in[0]))); };
      record("leaky_relu", oracle::grad_check(lrelu, {x}, {true}));
      record("sigmoid", oracle::grad_check(sig, {x}, {true}));
      record("tanh", oracle::grad_check(th, {x}, {true}));
    }
    {  // bilinear_warp: source and flow both differentiable
      const Shape xs = random_small_shape(rng, 3, 6);
      auto src = ccflow::random_grid<double>(xs, rng);
      auto flow = ccflow::random_grid<double>(Shape(xs.b, 2, xs.h, xs.w), rng, -1.2, 1.2);
      // Keep flows off the bilinear lattice so FD stays two-sided smooth.
      for (auto& v : flow.v) {
        const double frac = v - std::floor(v);
        if (frac < 0.05) v += 0.1;
        if (frac > 0.95) v -= 0.1;
      }
      auto build = [](Tape<double>& g, const std::vector<Var>& in) {
        Var y = g.bilinear_warp(in[0], in[1]);
        return g.sum(g.mul(y, y));
      };
      record("bilinear_warp", oracle::grad_check(build, {src, flow}, {true, true}));
    }
    {  // concat + slice + arithmetic + reductions
      const Shape xs = random_small_shape(rng, 3, 5);
      auto a = ccflow::random_grid<double>(xs, rng);
      auto b = ccflow::random_grid<double>(Shape(xs.b, 2, xs.h, xs.w), rng);
      auto build = [](Tape<double>& g, const std::vector<Var>& in) {
        Var cat = g.concat_channels({in[0], in[1]});
        Var left = g.slice_channels(cat, 0, g.val(in[0]).shape.c);
        Var mixed = g.add(g.scale(left, 0.7), g.sub(left, g.mul(left, left)));
        return g.add(g.sum(g.square(mixed)), g.mean(g.abs_(cat)));
      };
      record("concat_slice_arith", oracle::grad_check(build, {a, b}, {true, true}));
    }
    {  // bce_with_logits against a constant binary target
      const Shape xs = random_small_shape(rng, 2, 5);
      auto logits = ccflow::random_grid<double>(xs, rng, -2.0, 2.0);
      Grid<double> target(xs);
      for (auto& v : target.v) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
      auto build = [](Tape<double>& g, const std::vector<Var>& in) { return g.mean(g.bce_with_logits(in[0], in[1])); };
      record("bce_with_logits", oracle::grad_check(build, {logits, target}, {true, false}));
    }
    {  // crop_center
      const Shape xs(1, 2, 6, 6);
      auto x = ccflow::random_grid<double>(xs, rng);
      auto build = [](Tape<double>& g, const std::vector<Var>& in) {
        Var y = g.crop_center(in[0], 4, 4);
        return g.sum(g.mul(y, y));
      };
      record("crop_center", oracle::grad_check(build, {x}, {true}));
    }
  }
  return results;
}

// Both recurrent cells, parameters and incoming state all differentiable.
// `entries_cap` bounds the FD probes per tensor.
inline std::vector<OpResult> run_cell_suite(int shapes, std::uint64_t seed, int entries_cap = 6) {
  std::vector<OpResult> results{{"accumulation_cell", 0, 0}, {"forecasting_cell", 0, 0}};
  Rng rng(seed);
  for (int s = 0; s < shapes; ++s) {
    ccflow::model::ModelConfig cfg;
    cfg.latent_channels = 8;
    cfg.channels_per_group = rng.bernoulli(0.5) ? 4 : 8;
    cfg.input_channels = 3;
    cfg.height = 8;
    cfg.width = 8;
    cfg.forecast_steps = 1;
    auto params = ccflow::model::init_params<double>(cfg, rng.raw());
    const int lh = static_cast<int>(rng.uniform_int(2, 4));
    const int lw = static_cast<int>(rng.uniform_int(2, 4));
    const Shape latent(1, cfg.latent_channels, lh, lw);
    auto x = ccflow::random_grid<double>(latent, rng, -0.8, 0.8);
    auto h0 = ccflow::random_grid<double>(latent, rng, -0.8, 0.8);
    auto c0 = ccflow::random_grid<double>(latent, rng, -0.8, 0.8);

    for (int which = 0; which < 2; ++which) {
      // Leaves: all cell parameters (in visit order) plus x, h0, c0.
      std::vector<Grid<double>> inputs;
      std::vector<bool> diff;
      ccflow::model::visit_params(params, [&](const std::string& name, Grid<double>& g, ccflow::model::ParamKind) {
        const char* prefix = which == 0 ? "acc." : "fore.";
        if (name.rfind(prefix, 0) == 0) {
          inputs.push_back(g);
          diff.push_back(true);
        }
      });
      const size_t n_params = inputs.size();
      inputs.push_back(x);
      inputs.push_back(h0);
      inputs.push_back(c0);
      diff.push_back(which == 0);  // x feeds the accumulation cell only
      diff.push_back(true);
      diff.push_back(true);

      auto build = [&, which, n_params](Tape<double>& g, const std::vector<Var>& in) {
        // Rebind just the relevant cell from the leaf list.
        size_t at = 0;
        auto conv = [&](int stride) {
          ccflow::model::BoundConv<double> c;
          c.w = in[at++];
          c.b = in[at++];
          c.stride = stride;
          return c;
        };
        auto norm = [&](int groups) {
          ccflow::model::BoundNorm<double> n;
          n.gamma = in[at++];
          n.beta = in[at++];
          n.groups = groups;
          return n;
        };
        const int groups = cfg.groups_for(cfg.latent_channels);
        auto gate = [&]() {
          ccflow::model::BoundGateNet<double> gn;
          gn.c1 = conv(1);
          gn.n1 = norm(groups);
          gn.c2 = conv(1);
          gn.n2 = norm(groups);
          gn.c3 = conv(1);
          return gn;
        };
        ccflow::model::BoundCell<double> cell;
        cell.input = gate();
        cell.forget = gate();
        cell.gate = gate();
        cell.output = gate();
        cell.state_norm = norm(groups);
        (void)n_params;
        ccflow::model::BoundModel<double> bm;
        bm.config = cfg;
        ccflow::model::State<double> prev{in[in.size() - 2], in[in.size() - 1]};
        ccflow::model::State<double> out;
        if (which == 0) {
          bm.acc = cell;
          out = ccflow::model::accumulate_step(g, bm, in[in.size() - 3], prev);
        } else {
          bm.fore = cell;
          out = ccflow::model::forecast_step(g, bm, prev);
        }
        return g.add(g.sum(g.mul(out.hidden, out.hidden)), g.sum(g.mul(out.cell, out.cell)));
      };
      auto r = oracle::grad_check(build, inputs, diff, 1e-5, entries_cap, rng.raw(), true);
      auto& slot = results[static_cast<size_t>(which)];
      slot.max_rel_err = std::max(slot.max_rel_err, r.max_rel_err);
      slot.checked += r.checked;
    }
  }
  return results;
}

// End-to-end: full model forward plus the three-term loss, all parameters
// differentiable, FD on a few entries per tensor.
inline OpResult run_composite_check(std::uint64_t seed, int entries_cap = 3) {
  Rng rng(seed);
  ccflow::model::ModelConfig cfg;
  cfg.latent_channels = 8;
  cfg.channels_per_group = 8;
  cfg.input_channels = 4;
  cfg.height = 8;
  cfg.width = 8;
  cfg.forecast_steps = 2;
  auto params = ccflow::model::init_params<double>(cfg, seed);
  // Central differencing at a fixed step needs a smooth evaluation point:
  // bias the predicted flow off the bilinear lattice and keep ground-truth
  // flow magnitudes bounded away from the prediction so the L1 kink and the
  // warp corner points stay outside the FD interval.
  params.dec_flow.smooth.b.fill(0.37);
  auto off_kink_flow = [&](Rng& r) {
    const double mag = r.uniform(0.6, 1.4);
    return r.bernoulli(0.5) ? mag : -mag;
  };

  std::vector<Grid<double>> frames;
  for (int i = 0; i < 2; ++i) frames.push_back(ccflow::random_grid<double>(Shape(1, 4, 8, 8), rng, -0.5, 0.5));
  ccflow::TargetSeq<double> gt;
  for (int k = 0; k < 2; ++k) {
    Grid<double> obs(1, 1, 8, 8), occl(1, 1, 8, 8), flow(1, 2, 8, 8);
    for (auto& v : obs.v) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
    for (size_t i = 0; i < occl.v.size(); ++i) occl.v[i] = obs.v[i] > 0.5 ? 0.0 : (rng.bernoulli(0.15) ? 1.0 : 0.0);
    for (int b = 0; b < 1; ++b)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const bool occ = obs.at(0, 0, y, x) > 0.5 || occl.at(0, 0, y, x) > 0.5;
          flow.at(0, 0, y, x) = occ ? off_kink_flow(rng) : 0.0;
          flow.at(0, 1, y, x) = occ ? off_kink_flow(rng) : 0.0;
        }
    gt.occ_observed.push_back(obs);
    gt.occ_occluded.push_back(occl);
    gt.flow.push_back(flow);
  }
  Grid<double> t0(1, 1, 8, 8);
  for (auto& v : t0.v) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  gt.t0_occupancy = t0;

  std::vector<Grid<double>> inputs;
  ccflow::model::visit_params(params, [&](const std::string&, Grid<double>& g, ccflow::model::ParamKind) {
    inputs.push_back(g);
  });
  std::vector<bool> diff(inputs.size(), true);

  ccflow::loss::LossWeights weights;
  weights.occupancy = 1.0;  // O(1) loss scale keeps FD roundoff benign
  weights.flow = 1.0;
  weights.trace = 1.0;

  auto build = [&](Tape<double>& g, const std::vector<Var>& in) {
    // Rebuild the parameter struct around the provided leaves.
    auto local = params;
    size_t at = 0;
    ccflow::model::BoundModel<double> bm;
    bm.config = cfg;
    std::vector<Var> order(in.begin(), in.end());
    // bind_params assigns leaves in visit order; mirror that here.
    ccflow::model::ModelParams<double>& lp = local;
    std::vector<Var> vars = order;
    size_t idx = 0;
    auto conv = [&](ccflow::model::ConvP<double>& c) {
      ccflow::model::BoundConv<double> b;
      b.w = vars[idx++];
      if (!c.b.empty()) b.b = vars[idx++];
      b.stride = c.stride;
      b.transposed = c.transposed;
      return b;
    };
    auto norm = [&](ccflow::model::NormP<double>& n) {
      ccflow::model::BoundNorm<double> b;
      b.gamma = vars[idx++];
      b.beta = vars[idx++];
      b.groups = n.groups;
      return b;
    };
    auto gate = [&](ccflow::model::GateNetP<double>& gn) {
      ccflow::model::BoundGateNet<double> b;
      b.c1 = conv(gn.c1);
      b.n1 = norm(gn.n1);
      b.c2 = conv(gn.c2);
      b.n2 = norm(gn.n2);
      b.c3 = conv(gn.c3);
      return b;
    };
    auto cell = [&](ccflow::model::CellP<double>& c) {
      ccflow::model::BoundCell<double> b;
      b.input = gate(c.input);
      b.forget = gate(c.forget);
      b.gate = gate(c.gate);
      b.output = gate(c.output);
      b.state_norm = norm(c.state_norm);
      return b;
    };
    auto dec = [&](ccflow::model::DecoderP<double>& d) {
      ccflow::model::BoundDecoder<double> b;
      b.t1 = conv(d.t1);
      b.n1 = norm(d.n1);
      b.t2 = conv(d.t2);
      b.n2 = norm(d.n2);
      b.t3 = conv(d.t3);
      b.n3 = norm(d.n3);
      b.smooth = conv(d.smooth);
      return b;
    };
    for (int i = 0; i < 4; ++i) {
      bm.enc[static_cast<size_t>(i)] = conv(lp.enc[static_cast<size_t>(i)]);
      bm.enc_norm[static_cast<size_t>(i)] = norm(lp.enc_norm[static_cast<size_t>(i)]);
    }
    bm.acc = cell(lp.acc);
    bm.fore = cell(lp.fore);
    bm.dec_occ = dec(lp.dec_occ);
    bm.dec_flow = dec(lp.dec_flow);
    (void)at;
    auto wps = ccflow::model::forward(g, bm, frames, 2);
    auto lv = ccflow::loss::total_loss(g, wps, gt, weights);
    return lv.total;
  };
  auto r = oracle::grad_check(build, inputs, diff, 1e-5, entries_cap, seed ^ 0xabcdef, true);
  return {"model_and_losses_composite", r.max_rel_err, r.checked};
}

}  // namespace gradsuite
