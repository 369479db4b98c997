#include "transmot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace transmot {

ScenarioConfig ScenarioConfig::from_config(const KeyValueConfig& kv) {
  ScenarioConfig c;
  c.name = kv.get_string("name", c.name);
  c.num_targets = kv.get_int("num_targets", c.num_targets);
  c.frame_count = kv.get_int("frame_count", c.frame_count);
  c.img_w = kv.get_double("img_w", c.img_w);
  c.img_h = kv.get_double("img_h", c.img_h);
  c.min_size = kv.get_double("min_size", c.min_size);
  c.max_size = kv.get_double("max_size", c.max_size);
  c.max_speed = kv.get_double("max_speed", c.max_speed);
  c.direction_change_prob = kv.get_double("direction_change_prob", c.direction_change_prob);
  c.box_jitter_std = kv.get_double("box_jitter_std", c.box_jitter_std);
  c.false_negative_rate = kv.get_double("false_negative_rate", c.false_negative_rate);
  c.false_positive_rate = kv.get_double("false_positive_rate", c.false_positive_rate);
  c.confidence_mean = kv.get_double("confidence_mean", c.confidence_mean);
  c.confidence_std = kv.get_double("confidence_std", c.confidence_std);
  c.appearance_dim = kv.get_int("appearance_dim", c.appearance_dim);
  c.appearance_scale = kv.get_double("appearance_scale", c.appearance_scale);
  c.appearance_noise_std = kv.get_double("appearance_noise_std", c.appearance_noise_std);
  c.random_occlusions = kv.get_int("random_occlusions", c.random_occlusions);
  c.occlusion_min_len = kv.get_int("occlusion_min_len", c.occlusion_min_len);
  c.occlusion_max_len = kv.get_int("occlusion_max_len", c.occlusion_max_len);
  c.seed = kv.get_u64("seed", c.seed);
  // occlusions=target:start:end;target:start:end
  const std::string occ = kv.get_string("occlusions", "");
  if (!occ.empty()) {
    std::istringstream ss(occ);
    std::string item;
    while (std::getline(ss, item, ';')) {
      OcclusionEvent e;
      if (std::sscanf(item.c_str(), "%d:%d:%d", &e.target, &e.start, &e.end) != 3) {
        throw std::runtime_error("bad occlusion spec: " + item);
      }
      c.occlusions.push_back(e);
    }
  }
  return c;
}

namespace {

std::vector<double> random_unit_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

std::vector<double> noisy_copy(const std::vector<double>& mean, double sigma,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> v = mean;
  for (auto& x : v) x += normal(rng);
  return v;
}

struct TargetState {
  double cx, cy, w, h, vx, vy;
};

}  // namespace

SequenceBundle synth_generate(const ScenarioConfig& cfg) {
  if (cfg.num_targets < 0 || cfg.frame_count < 1) {
    throw std::invalid_argument("scenario needs frame_count >= 1 and num_targets >= 0");
  }
  if (cfg.false_negative_rate < 0 || cfg.false_negative_rate > 1 || cfg.false_positive_rate < 0 ||
      cfg.false_positive_rate > 1 || cfg.direction_change_prob < 0 ||
      cfg.direction_change_prob > 1) {
    throw std::invalid_argument("scenario rates must lie in [0,1]");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto jitter = [&] { return cfg.box_jitter_std * gauss(rng); };      // exact 0 when std is 0
  const auto conf_noise = [&] { return cfg.confidence_std * gauss(rng); };

  // Identity appearance clusters.
  std::vector<std::vector<double>> identity_mean(cfg.num_targets);
  for (auto& m : identity_mean) {
    m = random_unit_vector(cfg.appearance_dim, rng);
    for (auto& x : m) x *= cfg.appearance_scale;
  }

  // Initial kinematics.
  std::vector<TargetState> targets(cfg.num_targets);
  for (auto& t : targets) {
    t.w = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
    t.h = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
    t.cx = t.w / 2 + unit(rng) * (cfg.img_w - t.w);
    t.cy = t.h / 2 + unit(rng) * (cfg.img_h - t.h);
    t.vx = (2 * unit(rng) - 1) * cfg.max_speed;
    t.vy = (2 * unit(rng) - 1) * cfg.max_speed;
  }

  // Occlusion lookup: explicit events plus seeded random ones.
  std::vector<OcclusionEvent> events = cfg.occlusions;
  for (int i = 0; i < cfg.random_occlusions && cfg.num_targets > 0; ++i) {
    OcclusionEvent e;
    e.target = static_cast<int>(unit(rng) * cfg.num_targets) % cfg.num_targets;
    const int len = cfg.occlusion_min_len +
                    static_cast<int>(unit(rng) * (cfg.occlusion_max_len - cfg.occlusion_min_len + 1));
    e.start = 2 + static_cast<int>(unit(rng) * std::max(1, cfg.frame_count - len - 2));
    e.end = std::min(e.start + len - 1, cfg.frame_count);
    events.push_back(e);
  }
  std::vector<std::vector<char>> occluded(cfg.num_targets,
                                          std::vector<char>(cfg.frame_count + 1, 0));
  for (const auto& e : events) {
    if (e.target < 0 || e.target >= cfg.num_targets) {
      throw std::invalid_argument("occlusion event targets unknown target " + std::to_string(e.target));
    }
    for (int f = std::max(1, e.start); f <= std::min(cfg.frame_count, e.end); ++f) {
      occluded[e.target][f] = 1;
    }
  }

  SequenceBundle bundle;
  bundle.name = cfg.name;
  bundle.img_w = cfg.img_w;
  bundle.img_h = cfg.img_h;
  bundle.frame_count = cfg.frame_count;
  bundle.detections.resize(cfg.frame_count);
  bundle.ground_truth.resize(cfg.frame_count);

  for (int frame = 1; frame <= cfg.frame_count; ++frame) {
    for (int ti = 0; ti < cfg.num_targets; ++ti) {
      auto& t = targets[ti];
      if (frame > 1) {
        if (cfg.direction_change_prob > 0 && unit(rng) < cfg.direction_change_prob) {
          t.vx = (2 * unit(rng) - 1) * cfg.max_speed;
          t.vy = (2 * unit(rng) - 1) * cfg.max_speed;
        }
        t.cx += t.vx;
        t.cy += t.vy;
        // Bounce off the image borders.
        if (t.cx < t.w / 2) { t.cx = t.w - t.cx; t.vx = -t.vx; }
        if (t.cx > cfg.img_w - t.w / 2) { t.cx = 2 * (cfg.img_w - t.w / 2) - t.cx; t.vx = -t.vx; }
        if (t.cy < t.h / 2) { t.cy = t.h - t.cy; t.vy = -t.vy; }
        if (t.cy > cfg.img_h - t.h / 2) { t.cy = 2 * (cfg.img_h - t.h / 2) - t.cy; t.vy = -t.vy; }
      }
      if (occluded[ti][frame]) continue;

      const BoundingBox truth{t.cx - t.w / 2, t.cy - t.h / 2, t.w, t.h};
      GtEntry gt;
      gt.frame = frame;
      gt.id = ti + 1;
      gt.box = truth;
      gt.appearance = noisy_copy(identity_mean[ti], cfg.appearance_noise_std, rng);
      bundle.ground_truth[frame - 1].push_back(std::move(gt));

      const bool missed = unit(rng) < cfg.false_negative_rate;
      // Draw detection noise regardless so the stream of random numbers
      // does not depend on the miss outcome.
      BoundingBox det_box = truth;
      det_box.u += jitter();
      det_box.v += jitter();
      det_box.w = std::max(1.0, det_box.w + jitter());
      det_box.h = std::max(1.0, det_box.h + jitter());
      const double conf = std::clamp(cfg.confidence_mean + conf_noise(), 0.05, 1.0);
      auto appearance = noisy_copy(identity_mean[ti], cfg.appearance_noise_std, rng);
      if (missed) continue;

      Detection det;
      det.frame = frame;
      det.bbox = det_box;
      det.confidence = conf;
      det.appearance = std::move(appearance);
      det.source_index = static_cast<int>(bundle.detections[frame - 1].size());
      bundle.detections[frame - 1].push_back(std::move(det));
    }

    // Clutter boxes, one Bernoulli draw per target slot.
    for (int ti = 0; ti < cfg.num_targets; ++ti) {
      if (unit(rng) >= cfg.false_positive_rate) continue;
      Detection det;
      det.frame = frame;
      const double w = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
      const double h = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
      det.bbox = {unit(rng) * (cfg.img_w - w), unit(rng) * (cfg.img_h - h), w, h};
      det.confidence = std::clamp(0.8 * cfg.confidence_mean + conf_noise(), 0.05, 1.0);
      det.appearance = random_unit_vector(cfg.appearance_dim, rng);
      for (auto& x : det.appearance) x *= cfg.appearance_scale;
      det.source_index = static_cast<int>(bundle.detections[frame - 1].size());
      bundle.detections[frame - 1].push_back(std::move(det));
    }
  }
  return bundle;
}

}  // namespace transmot
