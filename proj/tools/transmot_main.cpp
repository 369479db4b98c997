#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>

#include <CLI11.hpp>

#include "transmot/metrics.hpp"
#include "transmot/synth.hpp"
#include "transmot/tracker.hpp"
#include "transmot/training.hpp"

namespace fs = std::filesystem;
using namespace transmot;

namespace {

struct CommandError : std::runtime_error {
  std::string category;
  CommandError(std::string cat, const std::string& what)
      : std::runtime_error(what), category(std::move(cat)) {}
};

TrackerConfig tracker_config_from(const std::string& config_path) {
  TrackerConfig cfg;
  if (!config_path.empty()) cfg = TrackerConfig::from_config(KeyValueConfig::parse_file(config_path));
  return cfg;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw CommandError("missing-input", what + " not found: " + path);
}

int cmd_track(const std::string& seq_dir, const std::string& checkpoint,
              const std::string& config_path, const std::string& out_path) {
  require_file(seq_dir, "sequence directory");
  require_file(checkpoint, "checkpoint");
  TrackerConfig cfg = tracker_config_from(config_path);

  auto model = std::make_shared<TransMOTModel>(TransMOTModel::load(checkpoint));
  cfg.window = model->config().window;  // the checkpoint owns the history length

  const SequenceBundle seq = load_sequence(seq_dir, model->config().appearance_dim);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<TrackEntry> tracks = track_sequence(seq, cfg, make_model_scorer(model));
  const auto stop = std::chrono::steady_clock::now();
  write_results(tracks, out_path);

  const double seconds = std::chrono::duration<double>(stop - start).count();
  std::printf("tracked %s: %d frames, %zu rows, %.1f fps\n", seq.name.c_str(), seq.frame_count,
              tracks.size(), seq.frame_count / std::max(seconds, 1e-9));
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_checkpoint,
              const std::string& loss_csv, int epochs, int max_steps, double lr, double lambda,
              int embed_dim, int heads, int window, int appearance_dim, int spatial_layers,
              int temporal_layers, std::uint64_t seed, bool no_detector_noise, int lr_decay_every,
              double lr_decay_factor) {
  require_file(data_dir, "dataset directory");
  ModelConfig mcfg;
  mcfg.appearance_dim = appearance_dim;
  mcfg.embed_dim = embed_dim;
  mcfg.heads = heads;
  mcfg.window = window;
  mcfg.spatial_layers = spatial_layers;
  mcfg.temporal_layers = temporal_layers;

  std::vector<TrainingSample> dataset;
  std::vector<fs::path> seq_dirs;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "seqinfo.ini")) {
      seq_dirs.push_back(entry.path());
    }
  }
  std::sort(seq_dirs.begin(), seq_dirs.end());
  if (seq_dirs.empty()) throw CommandError("empty-dataset", "no sequences under " + data_dir);
  for (const auto& dir : seq_dirs) {
    const SequenceBundle seq = load_sequence(dir.string(), appearance_dim);
    if (seq.ground_truth.empty()) continue;
    for (auto& s : samples_from_sequence(seq, window, !no_detector_noise)) {
      dataset.push_back(std::move(s));
    }
  }
  if (dataset.empty()) throw CommandError("empty-dataset", "no training samples with ground truth");

  TransMOTModel model(mcfg, seed);
  TrainOptions opt;
  opt.lr = lr;
  opt.lambda_weight = lambda;
  opt.epochs = epochs;
  opt.max_steps = max_steps;
  opt.seed = seed;
  opt.lr_decay_every = lr_decay_every;
  opt.lr_decay_factor = lr_decay_factor;
  const auto records = train(model, dataset, opt);
  model.save(out_checkpoint);
  if (!loss_csv.empty()) write_loss_csv(records, loss_csv);
  std::printf("trained %zu steps over %zu samples; final loss %.6f\n", records.size(),
              dataset.size(), records.empty() ? 0.0 : records.back().total);
  return 0;
}

int cmd_eval(const std::string& gt_path, const std::string& results_path, double iou_threshold,
             const std::string& csv_out) {
  require_file(gt_path, "gt file");
  require_file(results_path, "results file");
  const auto gt = parse_mot_gt(gt_path);
  const auto pred = parse_results(results_path);
  const MetricsReport report = evaluate(gt, pred, iou_threshold);
  std::cout << report.table();
  if (!csv_out.empty()) {
    std::ofstream out(csv_out);
    out << report.csv();
  }
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::uint64_t seed_override,
              bool has_seed) {
  ScenarioConfig cfg;
  if (!config_path.empty()) {
    require_file(config_path, "scenario config");
    cfg = ScenarioConfig::from_config(KeyValueConfig::parse_file(config_path));
  }
  if (has_seed) cfg.seed = seed_override;
  const SequenceBundle bundle = synth_generate(cfg);
  write_sequence(bundle, out_dir);
  std::size_t dets = 0, gts = 0;
  for (const auto& f : bundle.detections) dets += f.size();
  for (const auto& f : bundle.ground_truth) gts += f.size();
  std::printf("wrote %s: %d frames, %zu gt boxes, %zu detections\n", out_dir.c_str(),
              bundle.frame_count, gts, dets);
  return 0;
}

int cmd_gradcheck(int num_candidates, int num_tracklets, int window, int embed_dim, int heads,
                  int appearance_dim, std::uint64_t seed, bool corrupt) {
  ModelConfig cfg;
  cfg.appearance_dim = appearance_dim;
  cfg.embed_dim = embed_dim;
  cfg.heads = heads;
  cfg.window = window;
  TransMOTModel model(cfg, seed);
  const TrainingSample sample =
      random_training_sample(num_candidates, num_tracklets, window, appearance_dim, seed + 1);
  const GradCheckReport report =
      gradcheck_model(model, sample, /*samples_per_tensor=*/6, /*step=*/1e-5,
                      /*tolerance=*/1e-4, seed + 2, corrupt);
  for (const auto& e : report.entries) {
    std::printf("%s %-28s max_rel_err %.3e\n", e.pass ? "PASS" : "FAIL", e.name.c_str(),
                e.max_rel_err);
  }
  std::printf("%s: %zu parameter tensors checked\n", report.all_pass ? "PASS" : "FAIL",
              report.entries.size());
  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TransMOT spatial-temporal graph transformer tracker"};
  app.require_subcommand(1);

  // track
  auto* track = app.add_subcommand("track", "Run the tracker on a sequence directory");
  std::string seq_dir, checkpoint, config_path, out_path = "results.txt";
  track->add_option("--seq", seq_dir, "sequence directory (seqinfo.ini, det/det.txt)")->required();
  track->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  track->add_option("--config", config_path, "tracker key=value config");
  track->add_option("--out", out_path, "output results file");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on sequence directories");
  std::string data_dir, out_checkpoint = "model.ckpt", loss_csv;
  int epochs = 1, max_steps = 0, embed_dim = 32, heads = 4, window = 5, appearance_dim = 8;
  int spatial_layers = 1, temporal_layers = 1;
  double lr = 0.0015, lambda = 1.0;
  std::uint64_t seed = 1;
  bool no_detector_noise = false;
  int lr_decay_every = 0;
  double lr_decay_factor = 1.0;
  train_cmd->add_option("--data", data_dir, "directory of sequence subdirectories")->required();
  train_cmd->add_option("--out", out_checkpoint, "output checkpoint path");
  train_cmd->add_option("--loss-csv", loss_csv, "per-step loss curve CSV");
  train_cmd->add_option("--epochs", epochs, "passes over the dataset");
  train_cmd->add_option("--max-steps", max_steps, "cap on SGD steps (0 = none)");
  train_cmd->add_option("--lr", lr, "learning rate");
  train_cmd->add_option("--lambda", lambda, "sink-loss weight");
  train_cmd->add_option("--embed-dim", embed_dim, "model embedding width D");
  train_cmd->add_option("--heads", heads, "attention heads H");
  train_cmd->add_option("--window", window, "history length T");
  train_cmd->add_option("--appearance-dim", appearance_dim, "appearance feature length F");
  train_cmd->add_option("--spatial-layers", spatial_layers, "spatial encoder layer count");
  train_cmd->add_option("--temporal-layers", temporal_layers, "temporal encoder layer count");
  train_cmd->add_option("--seed", seed, "rng seed");
  train_cmd->add_flag("--no-detector-noise", no_detector_noise, "train on clean gt boxes");
  train_cmd->add_option("--lr-decay-every", lr_decay_every, "steps between lr decays (0 = off)");
  train_cmd->add_option("--lr-decay-factor", lr_decay_factor, "multiplier applied at each decay");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score results against ground truth");
  std::string gt_path, results_path, csv_out;
  double iou_threshold = 0.5;
  eval_cmd->add_option("--gt", gt_path, "gt.txt file")->required();
  eval_cmd->add_option("--results", results_path, "tracker results file")->required();
  eval_cmd->add_option("--iou", iou_threshold, "matching IoU threshold");
  eval_cmd->add_option("--csv", csv_out, "also write the report as CSV");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sequence");
  std::string scenario_path, synth_out = "synth_seq";
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--config", scenario_path, "scenario key=value config");
  synth_cmd->add_option("--out", synth_out, "output sequence directory")->required();
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed, "override the scenario seed");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  int gc_m = 5, gc_n = 4, gc_t = 3, gc_d = 16, gc_h = 4, gc_f = 8;
  std::uint64_t gc_seed = 7;
  bool gc_corrupt = false;
  grad_cmd->add_option("--candidates", gc_m, "candidate count M");
  grad_cmd->add_option("--tracklets", gc_n, "tracklet count N");
  grad_cmd->add_option("--window", gc_t, "history length T");
  grad_cmd->add_option("--embed-dim", gc_d, "embedding width D");
  grad_cmd->add_option("--heads", gc_h, "attention heads H");
  grad_cmd->add_option("--appearance-dim", gc_f, "appearance length F");
  grad_cmd->add_option("--seed", gc_seed, "rng seed");
  grad_cmd->add_flag("--corrupt", gc_corrupt, "inject a gradient error (negative control)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(track)) return cmd_track(seq_dir, checkpoint, config_path, out_path);
    if (app.got_subcommand(train_cmd)) {
      return cmd_train(data_dir, out_checkpoint, loss_csv, epochs, max_steps, lr, lambda, embed_dim,
                       heads, window, appearance_dim, spatial_layers, temporal_layers, seed,
                       no_detector_noise, lr_decay_every, lr_decay_factor);
    }
    if (app.got_subcommand(eval_cmd)) return cmd_eval(gt_path, results_path, iou_threshold, csv_out);
    if (app.got_subcommand(synth_cmd)) {
      return cmd_synth(scenario_path, synth_out, synth_seed, seed_opt->count() > 0);
    }
    if (app.got_subcommand(grad_cmd)) {
      return cmd_gradcheck(gc_m, gc_n, gc_t, gc_d, gc_h, gc_f, gc_seed, gc_corrupt);
    }
  } catch (const CommandError& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.category.c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 3;
  }
  return 0;
}
