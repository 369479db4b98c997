#include "transmot/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace transmot {

LabeledFrame inject_detector_noise(const LabeledFrame& gt_frame,
                                   const std::vector<Detection>& detections) {
  constexpr double kMatchIou = 0.5;

  // All candidate (gt, det) pairs above the gate, best IoU first, each
  // side used once.
  struct Pair {
    double iou;
    int gi;
    int di;
  };
  std::vector<Pair> pairs;
  for (std::size_t gi = 0; gi < gt_frame.size(); ++gi) {
    for (std::size_t di = 0; di < detections.size(); ++di) {
      const double v = iou(gt_frame[gi].box, detections[di].bbox);
      if (v > kMatchIou) pairs.push_back({v, static_cast<int>(gi), static_cast<int>(di)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.iou > b.iou; });

  std::vector<int> det_of_gt(gt_frame.size(), -1);
  std::vector<char> det_used(detections.size(), 0);
  for (const auto& p : pairs) {
    if (det_of_gt[p.gi] >= 0 || det_used[p.di]) continue;
    det_of_gt[p.gi] = p.di;
    det_used[p.di] = 1;
  }

  LabeledFrame out;
  for (std::size_t gi = 0; gi < gt_frame.size(); ++gi) {
    LabeledBox b = gt_frame[gi];
    if (det_of_gt[gi] >= 0) {
      b.box = detections[det_of_gt[gi]].bbox;
      b.appearance = detections[det_of_gt[gi]].appearance;
      b.from_detection = true;
    }
    out.push_back(std::move(b));
  }
  for (std::size_t di = 0; di < detections.size(); ++di) {
    if (det_used[di]) continue;
    LabeledBox b;
    b.id = -1;
    b.box = detections[di].bbox;
    b.appearance = detections[di].appearance;
    b.from_detection = true;
    out.push_back(std::move(b));
  }
  return out;
}

TrainingSample make_training_sample(const SequenceBundle& seq, int start_frame, int window,
                                    bool detector_noise) {
  if (seq.ground_truth.empty()) {
    throw std::invalid_argument("training sample needs a sequence with ground truth");
  }
  // History frames before the sequence begins stay empty, mirroring the
  // partially filled windows the tracker sees right after it starts.
  const int cand_frame = start_frame + window;
  if (cand_frame < 2 || cand_frame > seq.frame_count) {
    throw std::out_of_range("training window [" + std::to_string(start_frame) + "," +
                            std::to_string(cand_frame) + "] exceeds sequence length " +
                            std::to_string(seq.frame_count));
  }

  TrainingSample sample;
  sample.img_w = seq.img_w;
  sample.img_h = seq.img_h;
  for (int f = start_frame; f <= cand_frame; ++f) {
    LabeledFrame frame;
    if (f >= 1 && f <= static_cast<int>(seq.ground_truth.size())) {
      for (const auto& e : seq.ground_truth[f - 1]) {
        frame.push_back({e.id, e.box, e.appearance, false});
      }
      if (detector_noise && f - 1 < static_cast<int>(seq.detections.size())) {
        frame = inject_detector_noise(frame, seq.detections[f - 1]);
        // Keep what the tracker would actually see: detections only.
        frame.erase(std::remove_if(frame.begin(), frame.end(),
                                   [](const LabeledBox& b) { return !b.from_detection; }),
                    frame.end());
      }
    }
    sample.frames.push_back(std::move(frame));
  }

  // Tracklets: identities present anywhere in the history frames, indexed
  // by first appearance.
  for (int t = 0; t < window; ++t) {
    for (const auto& b : sample.frames[t]) {
      if (b.id < 0) continue;
      if (std::find(sample.tracklet_ids.begin(), sample.tracklet_ids.end(), b.id) ==
          sample.tracklet_ids.end()) {
        sample.tracklet_ids.push_back(b.id);
      }
    }
  }

  const int n = sample.num_tracklets();
  sample.sink_row_labels.assign(n, 1);
  for (const auto& b : sample.frames.back()) {
    const auto it = std::find(sample.tracklet_ids.begin(), sample.tracklet_ids.end(), b.id);
    if (b.id >= 0 && it != sample.tracklet_ids.end()) {
      const int idx = static_cast<int>(it - sample.tracklet_ids.begin());
      sample.target_row_labels.push_back(idx);
      sample.sink_row_labels[idx] = 0;
    } else {
      sample.target_row_labels.push_back(n);  // virtual source
    }
  }
  return sample;
}

std::vector<TrainingSample> samples_from_sequence(const SequenceBundle& seq, int window,
                                                  bool detector_noise) {
  std::vector<TrainingSample> out;
  for (int start = 2 - window; start + window <= seq.frame_count; ++start) {
    TrainingSample s = make_training_sample(seq, start, window, detector_noise);
    if (s.num_tracklets() >= 1 && s.num_candidates() >= 1) out.push_back(std::move(s));
  }
  return out;
}

TrainingSample random_training_sample(int num_candidates, int num_tracklets, int window,
                                      int appearance_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> step_noise(0.0, 4.0);

  const double img_w = 320, img_h = 240;
  TrainingSample sample;
  sample.img_w = img_w;
  sample.img_h = img_h;
  sample.frames.resize(window + 1);

  // Random walks in a small arena so the spatial graphs stay connected.
  std::vector<BoundingBox> box(num_tracklets);
  std::vector<std::vector<double>> appearance(num_tracklets);
  for (int n = 0; n < num_tracklets; ++n) {
    box[n] = {40 + unit(rng) * 160, 40 + unit(rng) * 100, 30 + unit(rng) * 30, 30 + unit(rng) * 30};
    appearance[n].resize(appearance_dim);
    for (auto& v : appearance[n]) v = 2.0 * unit(rng) - 1.0;
    sample.tracklet_ids.push_back(n + 1);
  }
  for (int t = 0; t < window; ++t) {
    for (int n = 0; n < num_tracklets; ++n) {
      box[n].u += step_noise(rng);
      box[n].v += step_noise(rng);
      sample.frames[t].push_back({n + 1, box[n], appearance[n]});
    }
  }
  sample.sink_row_labels.assign(num_tracklets, 1);
  for (int m = 0; m < num_candidates; ++m) {
    LabeledBox b;
    if (m < num_tracklets) {
      b.id = m + 1;
      b.box = box[m];
      b.box.u += step_noise(rng);
      b.box.v += step_noise(rng);
      b.appearance = appearance[m];
      sample.target_row_labels.push_back(m);
      sample.sink_row_labels[m] = 0;
    } else {
      b.id = -1;
      b.box = {40 + unit(rng) * 160, 40 + unit(rng) * 100, 30, 30};
      b.appearance.resize(appearance_dim);
      for (auto& v : b.appearance) v = 2.0 * unit(rng) - 1.0;
      sample.target_row_labels.push_back(num_tracklets);
    }
    sample.frames[window].push_back(std::move(b));
  }
  return sample;
}

EncoderInputs sample_encoder_inputs(const TrainingSample& sample, const ModelConfig& cfg) {
  const int t = sample.window();
  if (t != cfg.window) {
    throw std::invalid_argument("sample window " + std::to_string(t) +
                                " does not match model window " + std::to_string(cfg.window));
  }
  std::vector<TrackletWindow> windows(sample.num_tracklets(), TrackletWindow(t));
  for (int ti = 0; ti < t; ++ti) {
    for (const auto& b : sample.frames[ti]) {
      if (b.id < 0) continue;
      const auto it = std::find(sample.tracklet_ids.begin(), sample.tracklet_ids.end(), b.id);
      if (it == sample.tracklet_ids.end()) continue;
      auto& slot = windows[it - sample.tracklet_ids.begin()].slots[ti];
      slot.present = true;
      slot.box = b.box;
      slot.appearance = b.appearance;
    }
  }
  return build_encoder_inputs(windows, sample.img_w, sample.img_h, cfg);
}

DecoderInputs sample_decoder_inputs(const TrainingSample& sample, const ModelConfig& cfg) {
  std::vector<Detection> candidates;
  for (const auto& b : sample.frames.back()) {
    Detection d;
    d.bbox = b.box;
    d.appearance = b.appearance;
    candidates.push_back(std::move(d));
  }
  return build_decoder_inputs(candidates, sample.img_w, sample.img_h, cfg);
}

LossResult assignment_loss(const ExtendedAssignmentMatrix& a, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& sink_labels, double lambda) {
  const int m = a.num_candidates;
  const int n = a.num_tracklets;
  if (static_cast<int>(labels.size()) != m || static_cast<int>(sink_labels.size()) != n) {
    throw std::invalid_argument("assignment_loss: label sizes do not match the matrix");
  }
  for (int label : labels) {
    if (label < 0 || label > n) {
      throw std::out_of_range("assignment_loss: row label " + std::to_string(label) +
                              " outside [0," + std::to_string(n) + "]");
    }
  }

  const Tensor cand_logits = narrow(a.logits, 0, 0, m);
  const Tensor ce = neg(mean(gather_cols(log_softmax(cand_logits), labels)));

  // Sink row, source column excluded.
  const Tensor sink_logits = narrow(reshape(narrow(a.logits, 0, m, 1), {n + 1}), 0, 0, n);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = sink_labels[i] ? 1.0 : 0.0;
  const Tensor yt = Tensor::from({n}, y);
  const Tensor pos = mul(yt, log_sigmoid(sink_logits));
  const Tensor neg_part = mul(add_scalar(neg(yt), 1.0), log_sigmoid(neg(sink_logits)));
  const Tensor sink = neg(mean(add(pos, neg_part)));

  LossResult out;
  out.total = add(ce, scale(sink, lambda));
  out.breakdown.ce = ce.item();
  out.breakdown.sink = sink.item();
  out.breakdown.total = out.total.item();
  out.breakdown.lambda = lambda;
  return out;
}

std::vector<TrainStepRecord> train(TransMOTModel& model, const std::vector<TrainingSample>& dataset,
                                   const TrainOptions& opt) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<const TrainingSample*> usable;
  for (const auto& s : dataset) {
    if (s.num_tracklets() >= 1 && s.num_candidates() >= 1) usable.push_back(&s);
  }
  if (usable.empty()) throw std::invalid_argument("train: no usable samples (need M >= 1, N >= 1)");

  std::mt19937_64 rng(opt.seed);
  std::vector<Tensor> params = model.parameters();
  std::vector<TrainStepRecord> records;
  double lr = opt.lr;
  int step = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<const TrainingSample*> order = usable;
    if (opt.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (const TrainingSample* sample : order) {
      if (opt.max_steps > 0 && step >= opt.max_steps) return records;
      const EncoderInputs enc_in = sample_encoder_inputs(*sample, model.config());
      const DecoderInputs dec_in = sample_decoder_inputs(*sample, model.config());
      const ExtendedAssignmentMatrix assignment = model.forward(enc_in, dec_in);
      LossResult loss =
          assignment_loss(assignment, sample->target_row_labels, sample->sink_row_labels,
                          opt.lambda_weight);
      if (!std::isfinite(loss.breakdown.total)) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                 " (ce=" + std::to_string(loss.breakdown.ce) +
                                 ", sink=" + std::to_string(loss.breakdown.sink) + ")");
      }
      loss.total.backward();
      sgd_step(params, lr);
      ++step;
      records.push_back({step, loss.breakdown.ce, loss.breakdown.sink, loss.breakdown.total});
      if (opt.lr_decay_every > 0 && step % opt.lr_decay_every == 0) lr *= opt.lr_decay_factor;
    }
  }
  return records;
}

void write_loss_csv(const std::vector<TrainStepRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss csv: " + path);
  out << "step,ce,sink,total\n";
  for (const auto& r : records) {
    out << r.step << "," << r.ce << "," << r.sink << "," << r.total << "\n";
  }
}

namespace {

double model_loss(TransMOTModel& model, const TrainingSample& sample, double lambda) {
  const EncoderInputs enc_in = sample_encoder_inputs(sample, model.config());
  const DecoderInputs dec_in = sample_decoder_inputs(sample, model.config());
  const ExtendedAssignmentMatrix assignment = model.forward(enc_in, dec_in);
  return assignment_loss(assignment, sample.target_row_labels, sample.sink_row_labels, lambda)
      .breakdown.total;
}

}  // namespace

GradCheckReport gradcheck_model(TransMOTModel& model, const TrainingSample& sample,
                                int samples_per_tensor, double step, double tolerance,
                                std::uint64_t seed, bool corrupt) {
  constexpr double kLambda = 1.0;
  std::mt19937_64 rng(seed);

  for (auto& p : model.parameters()) p.zero_grad();
  {
    const EncoderInputs enc_in = sample_encoder_inputs(sample, model.config());
    const DecoderInputs dec_in = sample_decoder_inputs(sample, model.config());
    const ExtendedAssignmentMatrix assignment = model.forward(enc_in, dec_in);
    assignment_loss(assignment, sample.target_row_labels, sample.sink_row_labels, kLambda)
        .total.backward();
  }
  if (corrupt) {
    Tensor first = model.parameters().front();
    for (auto& g : first.impl()->grad) g += 1.0;
  }

  GradCheckReport report;
  report.all_pass = true;
  for (const auto& [name, param] : model.store().entries()) {
    GradCheckEntry entry;
    entry.name = name;
    const std::size_t n = param.numel();
    const int checks = std::min<std::size_t>(samples_per_tensor, n);
    std::vector<std::size_t> picks;
    if (static_cast<std::size_t>(checks) == n) {
      for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> dist(0, n - 1);
      for (int i = 0; i < checks; ++i) picks.push_back(dist(rng));
    }
    Tensor handle = param;  // shares storage
    auto& values = handle.mutable_values();
    for (std::size_t idx : picks) {
      const double saved = values[idx];
      values[idx] = saved + step;
      const double up = model_loss(model, sample, kLambda);
      values[idx] = saved - step;
      const double down = model_loss(model, sample, kLambda);
      values[idx] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double analytic = param.grad()[idx];
      const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < tolerance;
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  for (auto& p : model.parameters()) p.zero_grad();
  return report;
}

}  // namespace transmot
