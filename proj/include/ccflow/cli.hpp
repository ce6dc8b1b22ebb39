#pragma once

// Command implementations behind the ccflow tool. Factored out of main()
// so tests can drive them directly; every command returns a process exit
// code (0 ok, 1 usage, 2 data, 3 numerical).

#include <cstdint>
#include <string>
#include <vector>

namespace ccflow::cli {

struct GenArgs {
  std::string preset = "cv-desk";
  std::string config_path;
  std::string out_dir;
  int count = 100;
  int val_count = -1;  // -1: count/10
  std::uint64_t seed = 1;
  int threads = 0;
};

struct TrainArgs {
  std::string preset = "cv-desk";
  std::string config_path;
  std::string dataset_manifest;
  std::string out_dir;
  std::string ablate;  // "", no_accumulation, direct_multiframe, no_input_flow
  std::uint64_t seed = 1;
  int epochs = -1;     // -1: preset value
  int max_steps = -1;  // -1: preset value
  double early_stop_auc = -1;
  double early_stop_epe = -1;
  int threads = -1;
};

struct EvalArgs {
  std::string dataset_manifest;
  std::string checkpoint;  // empty with oracle = ground-truth passthrough
  std::string out_dir;
  std::string split = "val";
  bool oracle = false;
  int input_len = 0;
  int crop = 0;
  int threads = 0;
};

struct SweepArgs {
  std::string dataset_manifest;
  std::string checkpoint;
  std::string out_dir;
  std::string split = "val";
  std::vector<int> lengths;  // empty: 1..T_h
  int reset_window = 0;      // 0: dataset T_h
  int crop = 0;
  int threads = 0;
};

struct CurvesArgs {
  std::string dataset_manifest;
  std::string checkpoint;
  std::string out_dir;
  std::string split = "val";
  bool oracle = false;
  int crop = 0;
  int threads = 0;
};

struct StatsArgs {
  std::string dataset_manifest;
  std::string out_dir;
};

int run_gen(const GenArgs& args);
int run_train(const TrainArgs& args);
int run_eval(const EvalArgs& args);
int run_sweep(const SweepArgs& args);
int run_curves(const CurvesArgs& args);
int run_stats(const StatsArgs& args);

}  // namespace ccflow::cli
