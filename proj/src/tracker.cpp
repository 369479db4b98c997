#include "transmot/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "transmot/assignment.hpp"

namespace transmot {

TrackerConfig TrackerConfig::from_config(const KeyValueConfig& kv) {
  TrackerConfig c;
  c.window = kv.get_int("window", c.window);
  c.tau_match = kv.get_double("tau_match", c.tau_match);
  c.k_robust = kv.get_int("k_robust", c.k_robust);
  c.k_purge = kv.get_int("k_purge", c.k_purge);
  c.tau_det = kv.get_double("tau_det", c.tau_det);
  c.tau_assign = kv.get_double("tau_assign", c.tau_assign);
  c.tau_ltoh = kv.get_double("tau_ltoh", c.tau_ltoh);
  c.tau_dup = kv.get_double("tau_dup", c.tau_dup);
  c.lambda_weight = kv.get_double("lambda", c.lambda_weight);
  c.img_w = kv.get_double("img_w", c.img_w);
  c.img_h = kv.get_double("img_h", c.img_h);
  c.checkpoint_path = kv.get_string("checkpoint", c.checkpoint_path);
  c.kalman_noise.position_std_factor =
      kv.get_double("kalman_position_std", c.kalman_noise.position_std_factor);
  c.kalman_noise.velocity_std_factor =
      kv.get_double("kalman_velocity_std", c.kalman_noise.velocity_std_factor);
  if (c.window < 1 || c.k_purge < 1) throw std::runtime_error("tracker config: window and k_purge must be >= 1");
  return c;
}

double d_top(const BoundingBox& occluded_box, const BoundingBox& cand_box) {
  // Grouped so identical boxes give an exact zero.
  const double dx = (occluded_box.u - cand_box.u) + (occluded_box.w - cand_box.w) / 2.0;
  const double dy = occluded_box.v - cand_box.v;
  return std::hypot(dx, dy) / occluded_box.h;
}

std::vector<int> duplicate_removal(const std::vector<BoundingBox>& associated_boxes,
                                   const std::vector<Detection>& unassociated, double tau_dup) {
  std::vector<int> survivors;
  for (std::size_t i = 0; i < unassociated.size(); ++i) {
    const double area = unassociated[i].bbox.area();
    double worst = 0.0;
    for (const auto& a : associated_boxes) {
      worst = std::max(worst, intersection_area(a, unassociated[i].bbox) / area);
    }
    if (worst < tau_dup) survivors.push_back(static_cast<int>(i));
  }
  return survivors;
}

namespace {

double feature_distance(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  for (std::size_t i = n; i < a.size(); ++i) acc += a[i] * a[i];
  for (std::size_t i = n; i < b.size(); ++i) acc += b[i] * b[i];
  return std::sqrt(acc);
}

// Window over frames (frame - T, frame], slot T-1 = previous frame.
TrackletWindow window_of(const Tracklet& t, int frame, int window) {
  TrackletWindow w(window);
  for (const auto& e : t.history) {
    const int slot = e.frame - (frame - window);
    if (slot < 0 || slot >= window) continue;
    w.slots[slot].present = true;
    w.slots[slot].box = e.box;
    w.slots[slot].appearance = e.appearance;
  }
  return w;
}

// The stage-2 window spans frames [frame - window, frame - 1].
bool has_window_presence(const Tracklet& t, int frame, int window) {
  for (const auto& e : t.history) {
    if (e.frame >= frame - window) return true;
  }
  return false;
}

}  // namespace

Stage2Scorer make_model_scorer(std::shared_ptr<TransMOTModel> model) {
  return [model](const Stage2Request& req) {
    const ModelConfig& cfg = model->config();
    const EncoderInputs enc_in = build_encoder_inputs(req.windows, req.img_w, req.img_h, cfg);
    const DecoderInputs dec_in = build_decoder_inputs(req.detections, req.img_w, req.img_h, cfg);
    return model->forward(enc_in, dec_in).probs();
  };
}

Tracker::Tracker(TrackerConfig cfg, Stage2Scorer scorer)
    : cfg_(std::move(cfg)), scorer_(std::move(scorer)) {}

std::vector<TrackEntry> Tracker::process_frame(int frame, const std::vector<Detection>& detections) {
  if (frame <= last_frame_) {
    throw std::invalid_argument("process_frame: frames must be strictly increasing (got " +
                                std::to_string(frame) + " after " + std::to_string(last_frame_) + ")");
  }
  last_frame_ = frame;

  // Kalman prediction for every live tracklet.
  std::vector<int> live;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    if (tracklets_[i].status == Tracklet::Status::Dead) continue;
    tracklets_[i].kalman = kalman_predict(tracklets_[i].kalman, cfg_.kalman_noise);
    live.push_back(static_cast<int>(i));
  }

  std::vector<char> det_taken(detections.size(), 0);
  std::vector<int> match_of_tracklet(tracklets_.size(), -1);  // detection index per tracklet

  // ---- Stage 1: motion gate for robustly tracked tracklets ----
  std::vector<int> robust;
  for (int i : live) {
    if (tracklets_[i].status == Tracklet::Status::Active &&
        tracklets_[i].consecutive_matches >= cfg_.k_robust) {
      robust.push_back(i);
    }
  }
  if (!robust.empty() && !detections.empty()) {
    CostMatrix scores(static_cast<int>(robust.size()), static_cast<int>(detections.size()));
    for (std::size_t a = 0; a < robust.size(); ++a) {
      const BoundingBox pred = tracklets_[robust[a]].kalman.box();
      for (std::size_t b = 0; b < detections.size(); ++b) {
        scores.at(static_cast<int>(a), static_cast<int>(b)) = iou(pred, detections[b].bbox);
      }
    }
    for (const auto& [a, b] : hungarian(scores, /*maximize=*/true).pairs) {
      if (scores.at(a, b) > cfg_.tau_match) {
        match_of_tracklet[robust[a]] = b;
        det_taken[b] = 1;
      }
    }
  }

  // Low-confidence filter on whatever stage 1 left over.
  std::vector<int> remaining_dets;
  for (std::size_t b = 0; b < detections.size(); ++b) {
    if (!det_taken[b] && detections[b].confidence >= cfg_.tau_det) {
      remaining_dets.push_back(static_cast<int>(b));
    }
  }

  // ---- Stage 2: TransMOT over the rest ----
  std::vector<int> stage2_tracklets;
  for (int i : live) {
    if (match_of_tracklet[i] >= 0) continue;
    if (has_window_presence(tracklets_[i], frame, cfg_.window)) stage2_tracklets.push_back(i);
  }
  if (scorer_ && !stage2_tracklets.empty() && !remaining_dets.empty()) {
    Stage2Request req;
    req.frame = frame;
    req.img_w = cfg_.img_w;
    req.img_h = cfg_.img_h;
    for (int i : stage2_tracklets) {
      req.windows.push_back(window_of(tracklets_[i], frame, cfg_.window));
      req.tracklets.push_back(&tracklets_[i]);
    }
    for (int b : remaining_dets) req.detections.push_back(detections[b]);

    const AssignmentProbs probs = scorer_(req);
    if (probs.rows != static_cast<int>(remaining_dets.size()) + 1 ||
        probs.cols != static_cast<int>(stage2_tracklets.size()) + 1) {
      throw std::runtime_error("stage-2 scorer returned a matrix of the wrong shape");
    }
    for (const auto& [cand, tr] : hard_assign(probs, cfg_.tau_assign).pairs) {
      match_of_tracklet[stage2_tracklets[tr]] = remaining_dets[cand];
      det_taken[remaining_dets[cand]] = 1;
    }
    remaining_dets.erase(std::remove_if(remaining_dets.begin(), remaining_dets.end(),
                                        [&](int b) { return det_taken[b]; }),
                         remaining_dets.end());
  }

  // ---- Stage 3: long-term occlusion recovery ----
  std::vector<int> long_occluded;
  for (int i : live) {
    if (match_of_tracklet[i] >= 0) continue;
    if (tracklets_[i].status == Tracklet::Status::Occluded &&
        !has_window_presence(tracklets_[i], frame, cfg_.window)) {
      long_occluded.push_back(i);
    }
  }
  if (!long_occluded.empty() && !remaining_dets.empty()) {
    CostMatrix cost(static_cast<int>(long_occluded.size()), static_cast<int>(remaining_dets.size()));
    for (std::size_t a = 0; a < long_occluded.size(); ++a) {
      const auto& snap = tracklets_[long_occluded[a]].last_visible;
      for (std::size_t b = 0; b < remaining_dets.size(); ++b) {
        const Detection& det = detections[remaining_dets[b]];
        cost.at(static_cast<int>(a), static_cast<int>(b)) =
            feature_distance(snap.appearance, det.appearance) + d_top(snap.box, det.bbox);
      }
    }
    for (const auto& [a, b] : hungarian(cost, /*maximize=*/false).pairs) {
      if (cost.at(a, b) <= cfg_.tau_ltoh) {
        const int det_index = remaining_dets[b];
        const int tr = long_occluded[a];
        match_of_tracklet[tr] = det_index;
        det_taken[det_index] = 1;
        // Revive: the Kalman state restarts at the new position.
        tracklets_[tr].kalman = kalman_init(detections[det_index].bbox, cfg_.kalman_noise);
      }
    }
    remaining_dets.erase(std::remove_if(remaining_dets.begin(), remaining_dets.end(),
                                        [&](int b) { return det_taken[b]; }),
                         remaining_dets.end());
  }

  // ---- Duplicate handling over the unassociated remainder ----
  std::vector<BoundingBox> associated_boxes;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    if (match_of_tracklet[i] >= 0) associated_boxes.push_back(detections[match_of_tracklet[i]].bbox);
  }
  std::vector<Detection> unassociated;
  for (int b : remaining_dets) unassociated.push_back(detections[b]);
  std::vector<Detection> survivors;
  for (int idx : duplicate_removal(associated_boxes, unassociated, cfg_.tau_dup)) {
    survivors.push_back(unassociated[idx]);
  }

  // ---- Lifecycle updates ----
  std::vector<TrackEntry> emitted;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    Tracklet& t = tracklets_[i];
    if (t.status == Tracklet::Status::Dead) continue;
    const int det_index = match_of_tracklet[i];
    if (det_index >= 0) {
      const Detection& det = detections[det_index];
      t.consecutive_matches = (t.last_update_frame == frame - 1) ? t.consecutive_matches + 1 : 1;
      t.status = Tracklet::Status::Active;
      t.history.push_back({frame, det.bbox, det.appearance});
      while (static_cast<int>(t.history.size()) > cfg_.window) t.history.pop_front();
      t.last_visible = t.history.back();
      t.kalman = kalman_update(t.kalman, det.bbox, cfg_.kalman_noise);
      t.last_update_frame = frame;
      emitted.push_back({frame, t.id, det.bbox, 1.0});
    } else {
      t.consecutive_matches = 0;
      t.status = (frame - t.last_update_frame > cfg_.k_purge) ? Tracklet::Status::Dead
                                                              : Tracklet::Status::Occluded;
    }
  }
  for (const auto& det : survivors) {
    Tracklet t;
    t.id = next_id_++;
    t.status = Tracklet::Status::Active;
    t.consecutive_matches = 1;
    t.history.push_back({frame, det.bbox, det.appearance});
    t.last_visible = t.history.back();
    t.kalman = kalman_init(det.bbox, cfg_.kalman_noise);
    t.last_update_frame = frame;
    emitted.push_back({frame, t.id, det.bbox, 1.0});
    tracklets_.push_back(std::move(t));
  }
  return emitted;
}

std::vector<TrackEntry> track_sequence(const SequenceBundle& seq, const TrackerConfig& cfg,
                                       const Stage2Scorer& scorer) {
  TrackerConfig local = cfg;
  local.img_w = seq.img_w;
  local.img_h = seq.img_h;
  Tracker tracker(local, scorer);
  std::vector<TrackEntry> all;
  for (int f = 1; f <= seq.frame_count; ++f) {
    const auto& dets =
        f - 1 < static_cast<int>(seq.detections.size()) ? seq.detections[f - 1] : std::vector<Detection>{};
    for (const auto& row : tracker.process_frame(f, dets)) all.push_back(row);
  }
  return all;
}

}  // namespace transmot
