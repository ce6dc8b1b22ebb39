#pragma once

// Optimization loop: AdamW with decoupled weight decay, cosine annealing
// with warm restarts (T_mult = 1), full BPTT through the accumulation and
// forecasting unroll, 180-degree rotation augmentation and
// performance-based checkpointing on validation observed AUC.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ccflow/dataset.hpp"
#include "ccflow/losses.hpp"
#include "ccflow/metrics.hpp"
#include "ccflow/model.hpp"
#include "ccflow/sample.hpp"

namespace ccflow::train {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 0.002;
  double eta_min_scale = 0.01;  // eta_min = lr / 100
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  bool augment = true;
  double clip_norm = 0;  // 0 = off
  int crop = 0;          // center-crop losses/metrics to crop x crop; 0 = off
  int max_steps = 0;     // hard cap on optimizer steps; 0 = unlimited
  int val_interval = 0;  // steps between validations; 0 = once per epoch
  double early_stop_auc = 0;  // stop once val AUC >= this and EPE <= early_stop_epe
  double early_stop_epe = 0;
  int threads = 0;  // 0 = auto; CCFLOW_THREADS caps
  loss::LossWeights loss;

  double eta_min() const { return lr * eta_min_scale; }
};

// lr = eta_min + (lr0 - eta_min)/2 * (1 + cos(pi * (step mod cycle)/cycle)).
inline double cosine_lr(std::int64_t step, std::int64_t steps_per_cycle, double lr0, double eta_min) {
  if (steps_per_cycle < 1) throw ConfigError("cosine_lr: steps_per_cycle must be >= 1");
  const double phase = static_cast<double>(step % steps_per_cycle) / static_cast<double>(steps_per_cycle);
  return eta_min + 0.5 * (lr0 - eta_min) * (1.0 + std::cos(M_PI * phase));
}

template <typename T>
struct AdamWState {
  std::vector<Grid<T>> m, v;
  std::int64_t step = 0;

  static AdamWState init_like(const std::vector<Grid<T>*>& params) {
    AdamWState s;
    for (const Grid<T>* p : params) {
      s.m.emplace_back(p->shape);
      s.v.emplace_back(p->shape);
    }
    return s;
  }
};

// Decoupled AdamW: weights decay directly, then the bias-corrected moment
// update is applied.
template <typename T>
void adamw_step(const std::vector<Grid<T>*>& params, const std::vector<Grid<T>>& grads, AdamWState<T>& state,
                double lr, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractError("adamw_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.adam_eps);
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T lrt = static_cast<T>(lr);
  for (size_t j = 0; j < params.size(); ++j) {
    Grid<T>& w = *params[j];
    const Grid<T>& g = grads[j];
    if (g.shape != w.shape) throw ContractError("adamw_step: gradient shape mismatch at index " + std::to_string(j));
    Grid<T>& m = state.m[j];
    Grid<T>& v = state.v[j];
    for (size_t i = 0; i < w.v.size(); ++i) {
      m.v[i] = b1 * m.v[i] + (T(1) - b1) * g.v[i];
      v.v[i] = b2 * v.v[i] + (T(1) - b2) * g.v[i] * g.v[i];
      const T mhat = m.v[i] / bc1;
      const T vhat = v.v[i] / bc2;
      w.v[i] = w.v[i] * decay - lrt * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// 180-degree rotation of every spatial plane with negation of both flow
// components; an exact involution.
SampleRecord augment_rot180(const SampleRecord& rec);

struct EvalOptions {
  int crop = 0;
  int input_len = 0;     // 0 = all frames
  int reset_window = 0;  // windowed accumulator reset for long sweeps
  int threads = 0;
  bool oracle = false;  // feed ground truth back as the prediction
};

struct EvalResult {
  metrics::WaypointReport mean;                     // per-waypoint means over samples
  std::vector<metrics::WaypointReport> per_sample;  // sample order
};

EvalResult evaluate_model(model::ModelParams<float>& params, const dataset::DatasetView& view,
                          const EvalOptions& opts);

struct TrainResult {
  std::string log_path;
  std::string best_checkpoint;  // empty when never validated
  std::string last_checkpoint;
  double best_auc = -1;
  double best_auc_epe = -1;  // EPE at the best-AUC validation
  std::int64_t steps = 0;
  int checkpoint_saves = 0;
  bool early_stopped = false;
};

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg, const dataset::DatasetView& train_view,
                  const dataset::DatasetView& val_view, const std::string& out_dir);

// Center crop helpers shared by losses and evaluation.
Grid<float> crop_center_grid(const Grid<float>& g, int h, int w);
TargetSeq<float> crop_targets(const TargetSeq<float>& t, int h, int w);

}  // namespace ccflow::train
