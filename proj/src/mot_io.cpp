#include "transmot/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "transmot/config.hpp"

namespace transmot {

namespace {

std::vector<double> split_csv_line(const std::string& line, int line_no, const std::string& path) {
  std::vector<double> fields;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    const std::string tok = line.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed field '" + tok + "'");
    }
    fields.push_back(v);
    pos = comma + 1;
    if (comma == line.size()) break;
  }
  return fields;
}

// Shortest round-trip decimal form of a double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Row>
void grow_frames(std::vector<std::vector<Row>>& frames, int frame) {
  if (frame > static_cast<int>(frames.size())) frames.resize(frame);
}

}  // namespace

std::vector<std::vector<Detection>> parse_mot_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detection file: " + path);
  std::vector<std::vector<Detection>> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line, line_no, path);
    if (f.size() < 7) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected >= 7 fields");
    }
    const int frame = static_cast<int>(f[0]);
    if (frame < 1) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": frame index must be >= 1");
    }
    grow_frames(frames, frame);
    Detection det;
    det.frame = frame;
    det.bbox = {f[2], f[3], f[4], f[5]};
    det.confidence = f[6];
    det.source_index = static_cast<int>(frames[frame - 1].size());
    frames[frame - 1].push_back(std::move(det));
  }
  return frames;
}

std::vector<std::vector<GtEntry>> parse_mot_gt(const std::string& path, const GtFilter& filter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gt file: " + path);
  std::vector<std::vector<GtEntry>> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line, line_no, path);
    if (f.size() < 7) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected >= 7 fields");
    }
    const int frame = static_cast<int>(f[0]);
    if (frame < 1) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": frame index must be >= 1");
    }
    if (f[6] == 0) continue;  // inactive entry
    if (f.size() >= 8 && static_cast<int>(f[7]) != filter.pedestrian_class) continue;
    const double visibility = f.size() >= 9 ? f[8] : 1.0;
    if (visibility < filter.min_visibility) continue;
    grow_frames(frames, frame);
    GtEntry e;
    e.frame = frame;
    e.id = static_cast<int>(f[1]);
    e.box = {f[2], f[3], f[4], f[5]};
    e.visibility = visibility;
    frames[frame - 1].push_back(std::move(e));
  }
  return frames;
}

void write_results(const std::vector<TrackEntry>& tracks, const std::string& path) {
  std::vector<TrackEntry> sorted = tracks;
  std::sort(sorted.begin(), sorted.end(), [](const TrackEntry& a, const TrackEntry& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results file: " + path);
  for (const auto& t : sorted) {
    out << t.frame << "," << t.id << "," << format_double(t.box.u) << "," << format_double(t.box.v)
        << "," << format_double(t.box.w) << "," << format_double(t.box.h) << ",1,-1,-1,-1\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<TrackEntry> parse_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  std::vector<TrackEntry> tracks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line, line_no, path);
    if (f.size() < 7) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected >= 7 fields");
    }
    TrackEntry t;
    t.frame = static_cast<int>(f[0]);
    t.id = static_cast<int>(f[1]);
    t.box = {f[2], f[3], f[4], f[5]};
    t.confidence = f[6];
    tracks.push_back(t);
  }
  return tracks;
}

namespace {

// Shared sidecar reader: rows are "frame,index,f1,...,fF"; `assign` places
// the vector at (frame, index) and reports whether the slot exists.
int attach_features_impl(const std::string& path, int expected_dim,
                         const std::function<bool(int, int, std::vector<double>)>& assign,
                         int total_slots) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);
  std::string line;
  int line_no = 0;
  int attached = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line, line_no, path);
    if (static_cast<int>(f.size()) != expected_dim + 2) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(expected_dim + 2) + " fields, got " +
                               std::to_string(f.size()));
    }
    std::vector<double> vec(f.begin() + 2, f.end());
    if (assign(static_cast<int>(f[0]), static_cast<int>(f[1]), std::move(vec))) ++attached;
  }
  return total_slots - attached;
}

}  // namespace

int attach_features(const std::string& path, int expected_dim,
                    std::vector<std::vector<Detection>>& detections) {
  int total = 0;
  for (auto& frame : detections) {
    for (auto& det : frame) {
      det.appearance.assign(expected_dim, 0.0);
      ++total;
    }
  }
  return attach_features_impl(
      path, expected_dim,
      [&](int frame, int index, std::vector<double> vec) {
        if (frame < 1 || frame > static_cast<int>(detections.size())) return false;
        auto& list = detections[frame - 1];
        if (index < 0 || index >= static_cast<int>(list.size())) return false;
        list[index].appearance = std::move(vec);
        return true;
      },
      total);
}

int attach_gt_features(const std::string& path, int expected_dim,
                       std::vector<std::vector<GtEntry>>& gt) {
  int total = 0;
  for (auto& frame : gt) {
    for (auto& e : frame) {
      e.appearance.assign(expected_dim, 0.0);
      ++total;
    }
  }
  return attach_features_impl(
      path, expected_dim,
      [&](int frame, int index, std::vector<double> vec) {
        if (frame < 1 || frame > static_cast<int>(gt.size())) return false;
        auto& list = gt[frame - 1];
        if (index < 0 || index >= static_cast<int>(list.size())) return false;
        list[index].appearance = std::move(vec);
        return true;
      },
      total);
}

SequenceBundle load_sequence(const std::string& dir, int appearance_dim, const GtFilter& filter) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const fs::path info_path = root / "seqinfo.ini";
  if (!fs::exists(info_path)) throw std::runtime_error("missing seqinfo.ini in " + dir);
  const KeyValueConfig info = KeyValueConfig::parse_file(info_path.string());

  SequenceBundle bundle;
  bundle.name = info.get_string("name", root.filename().string());
  bundle.img_w = info.get_double("imWidth", 1920);
  bundle.img_h = info.get_double("imHeight", 1080);
  bundle.frame_count = info.get_int("seqLength", 0);

  const fs::path det_path = root / "det" / "det.txt";
  if (!fs::exists(det_path)) throw std::runtime_error("missing det/det.txt in " + dir);
  bundle.detections = parse_mot_detections(det_path.string());

  const fs::path det_feat = root / "det" / "features.txt";
  if (fs::exists(det_feat)) {
    attach_features(det_feat.string(), appearance_dim, bundle.detections);
  } else {
    for (auto& frame : bundle.detections) {
      for (auto& det : frame) det.appearance.assign(appearance_dim, 0.0);
    }
  }

  const fs::path gt_path = root / "gt" / "gt.txt";
  if (fs::exists(gt_path)) {
    bundle.ground_truth = parse_mot_gt(gt_path.string(), filter);
    const fs::path gt_feat = root / "gt" / "features.txt";
    if (fs::exists(gt_feat)) {
      attach_gt_features(gt_feat.string(), appearance_dim, bundle.ground_truth);
    } else {
      for (auto& frame : bundle.ground_truth) {
        for (auto& e : frame) e.appearance.assign(appearance_dim, 0.0);
      }
    }
  }

  const int frames = std::max(bundle.detections.size(), bundle.ground_truth.size());
  bundle.frame_count = std::max(bundle.frame_count, frames);
  bundle.detections.resize(bundle.frame_count);
  if (!bundle.ground_truth.empty()) bundle.ground_truth.resize(bundle.frame_count);
  return bundle;
}

void write_sequence(const SequenceBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "det");
  fs::create_directories(root / "gt");

  {
    std::ofstream info(root / "seqinfo.ini");
    info << "[Sequence]\n";
    info << "name=" << bundle.name << "\n";
    info << "imWidth=" << format_double(bundle.img_w) << "\n";
    info << "imHeight=" << format_double(bundle.img_h) << "\n";
    info << "seqLength=" << bundle.frame_count << "\n";
  }
  {
    std::ofstream det(root / "det" / "det.txt");
    std::ofstream feat(root / "det" / "features.txt");
    for (std::size_t fi = 0; fi < bundle.detections.size(); ++fi) {
      for (std::size_t di = 0; di < bundle.detections[fi].size(); ++di) {
        const Detection& d = bundle.detections[fi][di];
        det << (fi + 1) << ",-1," << format_double(d.bbox.u) << "," << format_double(d.bbox.v)
            << "," << format_double(d.bbox.w) << "," << format_double(d.bbox.h) << ","
            << format_double(d.confidence) << ",-1,-1,-1\n";
        feat << (fi + 1) << "," << di;
        for (double v : d.appearance) feat << "," << format_double(v);
        feat << "\n";
      }
    }
  }
  if (!bundle.ground_truth.empty()) {
    std::ofstream gt(root / "gt" / "gt.txt");
    std::ofstream feat(root / "gt" / "features.txt");
    for (std::size_t fi = 0; fi < bundle.ground_truth.size(); ++fi) {
      for (std::size_t gi = 0; gi < bundle.ground_truth[fi].size(); ++gi) {
        const GtEntry& e = bundle.ground_truth[fi][gi];
        gt << (fi + 1) << "," << e.id << "," << format_double(e.box.u) << ","
           << format_double(e.box.v) << "," << format_double(e.box.w) << ","
           << format_double(e.box.h) << ",1,1," << format_double(e.visibility) << "\n";
        feat << (fi + 1) << "," << gi;
        for (double v : e.appearance) feat << "," << format_double(v);
        feat << "\n";
      }
    }
  }
}

}  // namespace transmot
