#include "transmot/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "transmot/assignment.hpp"

namespace transmot {

namespace {

std::vector<std::vector<TrackEntry>> group_by_frame(const std::vector<TrackEntry>& pred,
                                                    int min_frames) {
  int frames = min_frames;
  for (const auto& t : pred) frames = std::max(frames, t.frame);
  std::vector<std::vector<TrackEntry>> out(frames);
  for (const auto& t : pred) out[t.frame - 1].push_back(t);
  return out;
}

}  // namespace

ClearMotResult clear_mot(const std::vector<std::vector<GtEntry>>& gt,
                         const std::vector<TrackEntry>& pred, double iou_threshold) {
  const auto pred_frames = group_by_frame(pred, static_cast<int>(gt.size()));
  const int frames = static_cast<int>(std::max(gt.size(), pred_frames.size()));

  ClearMotResult r;
  double iou_sum = 0.0;
  std::map<int, int> last_track_of_gt;          // persists across gaps
  std::map<int, int> gt_frames, gt_matched;     // per-trajectory coverage

  for (int f = 0; f < frames; ++f) {
    const auto& g = f < static_cast<int>(gt.size()) ? gt[f] : std::vector<GtEntry>{};
    const auto& p = f < static_cast<int>(pred_frames.size()) ? pred_frames[f] : std::vector<TrackEntry>{};
    r.total_gt_boxes += static_cast<int>(g.size());
    for (const auto& e : g) ++gt_frames[e.id];

    std::vector<char> g_used(g.size(), 0), p_used(p.size(), 0);
    std::vector<std::pair<int, int>> matched;  // (gt idx, pred idx)

    // Keep the previous correspondence wherever it still holds.
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      const auto it = last_track_of_gt.find(g[gi].id);
      if (it == last_track_of_gt.end()) continue;
      for (std::size_t pi = 0; pi < p.size(); ++pi) {
        if (p_used[pi] || p[pi].id != it->second) continue;
        if (iou(g[gi].box, p[pi].box) >= iou_threshold) {
          matched.emplace_back(gi, pi);
          g_used[gi] = p_used[pi] = 1;
        }
        break;
      }
    }

    // Hungarian over the rest, maximizing IoU.
    std::vector<int> g_rest, p_rest;
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (!g_used[gi]) g_rest.push_back(static_cast<int>(gi));
    }
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
      if (!p_used[pi]) p_rest.push_back(static_cast<int>(pi));
    }
    if (!g_rest.empty() && !p_rest.empty()) {
      CostMatrix scores(static_cast<int>(g_rest.size()), static_cast<int>(p_rest.size()));
      for (std::size_t a = 0; a < g_rest.size(); ++a) {
        for (std::size_t b = 0; b < p_rest.size(); ++b) {
          scores.at(static_cast<int>(a), static_cast<int>(b)) =
              iou(g[g_rest[a]].box, p[p_rest[b]].box);
        }
      }
      for (const auto& [a, b] : hungarian(scores, /*maximize=*/true).pairs) {
        if (scores.at(a, b) >= iou_threshold) matched.emplace_back(g_rest[a], p_rest[b]);
      }
    }

    for (const auto& [gi, pi] : matched) {
      ++r.matches;
      iou_sum += iou(g[gi].box, p[pi].box);
      ++gt_matched[g[gi].id];
      const auto it = last_track_of_gt.find(g[gi].id);
      if (it != last_track_of_gt.end() && it->second != p[pi].id) ++r.ids;
      last_track_of_gt[g[gi].id] = p[pi].id;
      g_used[gi] = 1;
      p_used[pi] = 1;
    }
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (!g_used[gi]) ++r.fn;
    }
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
      if (!p_used[pi]) ++r.fp;
    }
  }

  r.gt_trajectories = static_cast<int>(gt_frames.size());
  r.mota = r.total_gt_boxes > 0
               ? 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / r.total_gt_boxes
               : 1.0;
  r.motp = r.matches > 0 ? iou_sum / r.matches : 0.0;
  int mt = 0, ml = 0;
  for (const auto& [id, total] : gt_frames) {
    const double cover = static_cast<double>(gt_matched[id]) / total;
    if (cover >= 0.8) ++mt;
    if (cover <= 0.2) ++ml;
  }
  if (r.gt_trajectories > 0) {
    r.mt_percent = 100.0 * mt / r.gt_trajectories;
    r.ml_percent = 100.0 * ml / r.gt_trajectories;
  }
  return r;
}

IdMetricsResult id_metrics(const std::vector<std::vector<GtEntry>>& gt,
                           const std::vector<TrackEntry>& pred, double iou_threshold) {
  // Trajectories as frame -> box maps.
  std::map<int, std::map<int, BoundingBox>> gt_traj, pred_traj;
  int total_gt = 0, total_pred = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (const auto& e : gt[f]) {
      gt_traj[e.id][static_cast<int>(f) + 1] = e.box;
      ++total_gt;
    }
  }
  for (const auto& t : pred) {
    pred_traj[t.id][t.frame] = t.box;
    ++total_pred;
  }

  IdMetricsResult r;
  int idtp = 0;
  if (!gt_traj.empty() && !pred_traj.empty()) {
    std::vector<const std::map<int, BoundingBox>*> gs, ps;
    for (const auto& [id, tr] : gt_traj) gs.push_back(&tr);
    for (const auto& [id, tr] : pred_traj) ps.push_back(&tr);
    CostMatrix overlap(static_cast<int>(gs.size()), static_cast<int>(ps.size()));
    for (std::size_t a = 0; a < gs.size(); ++a) {
      for (std::size_t b = 0; b < ps.size(); ++b) {
        int count = 0;
        for (const auto& [frame, box] : *gs[a]) {
          const auto it = ps[b]->find(frame);
          if (it != ps[b]->end() && iou(box, it->second) >= iou_threshold) ++count;
        }
        overlap.at(static_cast<int>(a), static_cast<int>(b)) = count;
      }
    }
    idtp = static_cast<int>(hungarian(overlap, /*maximize=*/true).total + 0.5);
  }

  r.idtp = idtp;
  r.idfp = total_pred - idtp;
  r.idfn = total_gt - idtp;
  r.idp = total_pred > 0 ? static_cast<double>(idtp) / total_pred : 0.0;
  r.idr = total_gt > 0 ? static_cast<double>(idtp) / total_gt : 0.0;
  r.idf1 = (total_gt + total_pred) > 0 ? 2.0 * idtp / (total_gt + total_pred) : 0.0;
  return r;
}

MetricsReport evaluate(const std::vector<std::vector<GtEntry>>& gt,
                       const std::vector<TrackEntry>& pred, double iou_threshold) {
  MetricsReport report;
  report.clear = clear_mot(gt, pred, iou_threshold);
  report.id = id_metrics(gt, pred, iou_threshold);
  report.total_pred_boxes = static_cast<int>(pred.size());
  std::map<int, int> ids;
  for (const auto& t : pred) ++ids[t.id];
  report.pred_trajectories = static_cast<int>(ids.size());
  return report;
}

std::string MetricsReport::table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "metric      value\n";
  os << "MOTA        " << clear.mota << "\n";
  os << "MOTP        " << clear.motp << "\n";
  os << "IDF1        " << id.idf1 << "\n";
  os << "IDP         " << id.idp << "\n";
  os << "IDR         " << id.idr << "\n";
  os << "FP          " << clear.fp << "\n";
  os << "FN          " << clear.fn << "\n";
  os << "IDS         " << clear.ids << "\n";
  os.precision(1);
  os << "MT          " << clear.mt_percent << "%\n";
  os << "ML          " << clear.ml_percent << "%\n";
  os << "GT boxes    " << clear.total_gt_boxes << "\n";
  os << "GT tracks   " << clear.gt_trajectories << "\n";
  os << "Pred boxes  " << total_pred_boxes << "\n";
  os << "Pred tracks " << pred_trajectories << "\n";
  return os.str();
}

std::string MetricsReport::csv() const {
  std::ostringstream os;
  os << "MOTA,MOTP,IDF1,IDP,IDR,FP,FN,IDS,MT,ML,gt_boxes,gt_tracks,pred_boxes,pred_tracks\n";
  os << clear.mota << "," << clear.motp << "," << id.idf1 << "," << id.idp << "," << id.idr << ","
     << clear.fp << "," << clear.fn << "," << clear.ids << "," << clear.mt_percent << ","
     << clear.ml_percent << "," << clear.total_gt_boxes << "," << clear.gt_trajectories << ","
     << total_pred_boxes << "," << pred_trajectories << "\n";
  return os.str();
}

}  // namespace transmot
