// ccflow: synthetic occupancy-flow forecasting experiments.
//   gen           build a synthetic OFR dataset
//   train         train the recurrent forecaster (with ablation variants)
//   eval          challenge-metric report on a split
//   sweep-seqlen  metrics as a function of input sequence length
//   curves        per-waypoint metric curves (CSV + SVG)
//   stats         dataset distribution report

#include <iostream>

#include "CLI11.hpp"
#include "ccflow/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ccflow: occupancy flow forecasting on synthetic BEV worlds"};
  app.require_subcommand(1);

  ccflow::cli::GenArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "generate a dataset of OFR samples");
  cmd_gen->add_option("--preset", gen.preset, "configuration preset")->default_val("cv-desk");
  cmd_gen->add_option("--config", gen.config_path, "key-value config file overriding the preset");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--count", gen.count, "number of scenarios")->default_val(100);
  cmd_gen->add_option("--val", gen.val_count, "validation split size (default count/10)");
  cmd_gen->add_option("--seed", gen.seed, "first scenario seed")->default_val(1);
  cmd_gen->add_option("--threads", gen.threads, "worker threads (0 = auto)");

  ccflow::cli::TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train", "train the forecaster");
  cmd_train->add_option("--preset", tr.preset, "configuration preset")->default_val("cv-desk");
  cmd_train->add_option("--config", tr.config_path, "key-value config file overriding the preset");
  cmd_train->add_option("--dataset", tr.dataset_manifest, "dataset manifest path")->required();
  cmd_train->add_option("--out", tr.out_dir, "output directory")->required();
  cmd_train->add_option("--ablate", tr.ablate, "no_accumulation | direct_multiframe | no_input_flow");
  cmd_train->add_option("--seed", tr.seed, "training seed")->default_val(1);
  cmd_train->add_option("--epochs", tr.epochs, "override preset epochs");
  cmd_train->add_option("--max-steps", tr.max_steps, "hard cap on optimizer steps");
  cmd_train->add_option("--early-stop-auc", tr.early_stop_auc, "stop when val observed AUC reaches this");
  cmd_train->add_option("--early-stop-epe", tr.early_stop_epe, "and val flow EPE is at most this");
  cmd_train->add_option("--threads", tr.threads, "worker threads (0 = auto)");

  ccflow::cli::EvalArgs ev;
  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint with the challenge metrics");
  cmd_eval->add_option("--dataset", ev.dataset_manifest, "dataset manifest path")->required();
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
  cmd_eval->add_option("--out", ev.out_dir, "output directory")->required();
  cmd_eval->add_option("--split", ev.split, "dataset split")->default_val("val");
  cmd_eval->add_flag("--oracle", ev.oracle, "feed ground truth as the prediction");
  cmd_eval->add_option("--input-len", ev.input_len, "use only the last N input frames");
  cmd_eval->add_option("--crop", ev.crop, "center-crop metrics to N x N");
  cmd_eval->add_option("--threads", ev.threads, "worker threads (0 = auto)");

  ccflow::cli::SweepArgs sw;
  CLI::App* cmd_sweep = app.add_subcommand("sweep-seqlen", "metrics vs input sequence length");
  cmd_sweep->add_option("--dataset", sw.dataset_manifest, "dataset manifest path")->required();
  cmd_sweep->add_option("--checkpoint", sw.checkpoint, "model checkpoint")->required();
  cmd_sweep->add_option("--out", sw.out_dir, "output directory")->required();
  cmd_sweep->add_option("--split", sw.split, "dataset split")->default_val("val");
  cmd_sweep->add_option("--lengths", sw.lengths, "input lengths (default 1..T_h)");
  cmd_sweep->add_option("--reset-window", sw.reset_window, "reset-mode window (default dataset T_h)");
  cmd_sweep->add_option("--crop", sw.crop, "center-crop metrics to N x N");
  cmd_sweep->add_option("--threads", sw.threads, "worker threads (0 = auto)");

  ccflow::cli::CurvesArgs cu;
  CLI::App* cmd_curves = app.add_subcommand("curves", "per-waypoint metric curves");
  cmd_curves->add_option("--dataset", cu.dataset_manifest, "dataset manifest path")->required();
  cmd_curves->add_option("--checkpoint", cu.checkpoint, "model checkpoint");
  cmd_curves->add_option("--out", cu.out_dir, "output directory")->required();
  cmd_curves->add_option("--split", cu.split, "dataset split")->default_val("val");
  cmd_curves->add_flag("--oracle", cu.oracle, "feed ground truth as the prediction");
  cmd_curves->add_option("--crop", cu.crop, "center-crop metrics to N x N");
  cmd_curves->add_option("--threads", cu.threads, "worker threads (0 = auto)");

  ccflow::cli::StatsArgs st;
  CLI::App* cmd_stats = app.add_subcommand("stats", "dataset distribution report");
  cmd_stats->add_option("--dataset", st.dataset_manifest, "dataset manifest path")->required();
  cmd_stats->add_option("--out", st.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors exit 1, help exits 0
  }

  if (app.got_subcommand(cmd_gen)) return ccflow::cli::run_gen(gen);
  if (app.got_subcommand(cmd_train)) return ccflow::cli::run_train(tr);
  if (app.got_subcommand(cmd_eval)) return ccflow::cli::run_eval(ev);
  if (app.got_subcommand(cmd_sweep)) return ccflow::cli::run_sweep(sw);
  if (app.got_subcommand(cmd_curves)) return ccflow::cli::run_curves(cu);
  if (app.got_subcommand(cmd_stats)) return ccflow::cli::run_stats(st);
  return 1;
}
