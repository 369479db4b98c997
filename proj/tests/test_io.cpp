#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "transmot/mot_io.hpp"
#include "transmot/synth.hpp"

using namespace transmot;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("transmot_io_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("parse_mot_detections field mapping") {
  TempDir dir;
  write_file(dir.file("det.txt"), "1,-1,10,20,30,40,0.9,-1,-1,-1\n2,-1,5,5,10,10,0.4,-1,-1,-1\n");
  const auto frames = parse_mot_detections(dir.file("det.txt"));
  REQUIRE(frames.size() == 2);
  REQUIRE(frames[0].size() == 1);
  const Detection& d = frames[0][0];
  CHECK(d.frame == 1);
  CHECK(d.bbox.u == 10.0);
  CHECK(d.bbox.v == 20.0);
  CHECK(d.bbox.w == 30.0);
  CHECK(d.bbox.h == 40.0);
  CHECK(d.confidence == 0.9);
  CHECK(d.source_index == 0);
}

TEST_CASE("parse_mot_gt keeps ids and applies the filters") {
  TempDir dir;
  write_file(dir.file("gt.txt"),
             "1,7,0,0,5,5,1,1,1.0\n"
             "1,8,0,0,5,5,0,1,1.0\n"   // inactive
             "1,9,0,0,5,5,1,2,1.0\n"   // wrong class
             "1,10,0,0,5,5,1,1,0.05\n" // low visibility
             "2,7,1,0,5,5,1,1,0.8\n");
  const auto gt = parse_mot_gt(dir.file("gt.txt"));
  REQUIRE(gt.size() == 2);
  REQUIRE(gt[0].size() == 1);
  CHECK(gt[0][0].id == 7);
  CHECK(gt[1][0].visibility == 0.8);
}

TEST_CASE("malformed lines carry the line number") {
  TempDir dir;
  write_file(dir.file("det.txt"), "1,-1,10,20,30,40,0.9\n1,-1,oops,20,30,40,0.9\n");
  CHECK_THROWS_WITH_AS(parse_mot_detections(dir.file("det.txt")), doctest::Contains(":2"),
                       std::runtime_error);
}

TEST_CASE("empty file parses to an empty sequence") {
  TempDir dir;
  write_file(dir.file("det.txt"), "");
  CHECK(parse_mot_detections(dir.file("det.txt")).empty());
}

TEST_CASE("write_results ordering and round trip") {
  TempDir dir;
  SUBCASE("empty track set writes an empty file") {
    write_results({}, dir.file("out.txt"));
    CHECK(parse_results(dir.file("out.txt")).empty());
  }
  SUBCASE("rows come out frame-major then id-ascending") {
    std::vector<TrackEntry> tracks = {
        {2, 1, {0, 0, 5, 5}, 1.0}, {1, 9, {1, 1, 5, 5}, 1.0}, {1, 2, {2, 2, 5, 5}, 1.0}};
    write_results(tracks, dir.file("out.txt"));
    const auto back = parse_results(dir.file("out.txt"));
    REQUIRE(back.size() == 3);
    CHECK(back[0].frame == 1);
    CHECK(back[0].id == 2);
    CHECK(back[1].frame == 1);
    CHECK(back[1].id == 9);
    CHECK(back[2].frame == 2);
  }
  SUBCASE("parse(write(x)) is the identity on 50 randomized track sets") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> coord(0.0, 500.0);
    for (int trial = 0; trial < 50; ++trial) {
      // Well-formed: at most one box per (frame, id).
      std::set<std::pair<int, int>> keys;
      std::vector<TrackEntry> tracks;
      const int rows = 1 + static_cast<int>(rng() % 40);
      for (int i = 0; i < rows; ++i) {
        TrackEntry t;
        t.frame = 1 + static_cast<int>(rng() % 20);
        t.id = 1 + static_cast<int>(rng() % 12);
        if (!keys.insert({t.frame, t.id}).second) continue;
        t.box = {coord(rng), coord(rng), 1.0 + coord(rng) / 10, 1.0 + coord(rng) / 10};
        tracks.push_back(t);
      }
      // The writer sorts; order the reference the same way.
      std::sort(tracks.begin(), tracks.end(), [](const TrackEntry& a, const TrackEntry& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
      });
      write_results(tracks, dir.file("rt.txt"));
      const auto back = parse_results(dir.file("rt.txt"));
      REQUIRE(back.size() == tracks.size());
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        CHECK(back[i].frame == tracks[i].frame);
        CHECK(back[i].id == tracks[i].id);
        CHECK(back[i].box.u == tracks[i].box.u);  // exact round trip
        CHECK(back[i].box.v == tracks[i].box.v);
        CHECK(back[i].box.w == tracks[i].box.w);
        CHECK(back[i].box.h == tracks[i].box.h);
      }
    }
  }
}

TEST_CASE("feature sidecar attachment") {
  TempDir dir;
  write_file(dir.file("det.txt"), "1,-1,0,0,5,5,1,-1,-1,-1\n1,-1,10,0,5,5,1,-1,-1,-1\n");
  auto frames = parse_mot_detections(dir.file("det.txt"));

  SUBCASE("one-line file attaches one vector") {
    write_file(dir.file("features.txt"), "1,0,0.5,0.25\n");
    const int missing = attach_features(dir.file("features.txt"), 2, frames);
    CHECK(missing == 1);
    CHECK(frames[0][0].appearance == std::vector<double>{0.5, 0.25});
    CHECK(frames[0][1].appearance == std::vector<double>{0.0, 0.0});  // zero vector fallback
  }
  SUBCASE("wrong dimension is an error") {
    write_file(dir.file("features.txt"), "1,0,0.5,0.25,0.75\n");
    CHECK_THROWS_AS(attach_features(dir.file("features.txt"), 2, frames), std::runtime_error);
  }
}

TEST_CASE("synth_generate properties") {
  SUBCASE("noise-free detections equal ground truth exactly") {
    ScenarioConfig cfg;
    cfg.num_targets = 4;
    cfg.frame_count = 12;
    cfg.seed = 3;
    const SequenceBundle b = synth_generate(cfg);
    REQUIRE(b.detections.size() == 12);
    for (int f = 0; f < 12; ++f) {
      REQUIRE(b.detections[f].size() == b.ground_truth[f].size());
      for (std::size_t i = 0; i < b.detections[f].size(); ++i) {
        CHECK(b.detections[f][i].bbox.u == b.ground_truth[f][i].box.u);
        CHECK(b.detections[f][i].bbox.w == b.ground_truth[f][i].box.w);
      }
    }
    // gt has exactly one box per (frame, id).
    for (const auto& frame : b.ground_truth) {
      std::vector<int> ids;
      for (const auto& e : frame) ids.push_back(e.id);
      std::sort(ids.begin(), ids.end());
      CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    }
  }
  SUBCASE("false-negative rate one removes every detection") {
    ScenarioConfig cfg;
    cfg.num_targets = 3;
    cfg.frame_count = 6;
    cfg.false_negative_rate = 1.0;
    const SequenceBundle b = synth_generate(cfg);
    for (const auto& frame : b.detections) CHECK(frame.empty());
    for (const auto& frame : b.ground_truth) CHECK(!frame.empty());
  }
  SUBCASE("fixed seed is bitwise deterministic") {
    ScenarioConfig cfg;
    cfg.num_targets = 5;
    cfg.frame_count = 15;
    cfg.box_jitter_std = 1.5;
    cfg.false_negative_rate = 0.2;
    cfg.false_positive_rate = 0.1;
    cfg.direction_change_prob = 0.05;
    cfg.seed = 77;
    const SequenceBundle a = synth_generate(cfg);
    const SequenceBundle b = synth_generate(cfg);
    REQUIRE(a.detections.size() == b.detections.size());
    for (std::size_t f = 0; f < a.detections.size(); ++f) {
      REQUIRE(a.detections[f].size() == b.detections[f].size());
      for (std::size_t i = 0; i < a.detections[f].size(); ++i) {
        CHECK(a.detections[f][i].bbox.u == b.detections[f][i].bbox.u);
        CHECK(a.detections[f][i].confidence == b.detections[f][i].confidence);
        CHECK(a.detections[f][i].appearance == b.detections[f][i].appearance);
      }
    }
  }
  SUBCASE("occluded frames emit neither gt nor detections for that target") {
    ScenarioConfig cfg;
    cfg.num_targets = 2;
    cfg.frame_count = 10;
    cfg.occlusions = {{0, 4, 6}};
    cfg.seed = 9;
    const SequenceBundle b = synth_generate(cfg);
    for (int f = 4; f <= 6; ++f) {
      CHECK(b.ground_truth[f - 1].size() == 1);
      CHECK(b.ground_truth[f - 1][0].id == 2);
      CHECK(b.detections[f - 1].size() == 1);
    }
    CHECK(b.ground_truth[0].size() == 2);
  }
}

TEST_CASE("sequence bundle round trip through a directory") {
  ScenarioConfig cfg;
  cfg.num_targets = 3;
  cfg.frame_count = 8;
  cfg.box_jitter_std = 1.0;
  cfg.seed = 21;
  const SequenceBundle original = synth_generate(cfg);

  TempDir dir;
  write_sequence(original, dir.path.string());
  const SequenceBundle loaded = load_sequence(dir.path.string(), cfg.appearance_dim);

  CHECK(loaded.img_w == original.img_w);
  CHECK(loaded.frame_count == original.frame_count);
  REQUIRE(loaded.detections.size() == original.detections.size());
  for (std::size_t f = 0; f < original.detections.size(); ++f) {
    REQUIRE(loaded.detections[f].size() == original.detections[f].size());
    for (std::size_t i = 0; i < original.detections[f].size(); ++i) {
      CHECK(loaded.detections[f][i].bbox.u == original.detections[f][i].bbox.u);
      CHECK(loaded.detections[f][i].appearance == original.detections[f][i].appearance);
    }
  }
  REQUIRE(loaded.ground_truth.size() == original.ground_truth.size());
  for (std::size_t f = 0; f < original.ground_truth.size(); ++f) {
    REQUIRE(loaded.ground_truth[f].size() == original.ground_truth[f].size());
    for (std::size_t i = 0; i < original.ground_truth[f].size(); ++i) {
      CHECK(loaded.ground_truth[f][i].id == original.ground_truth[f][i].id);
      CHECK(loaded.ground_truth[f][i].box.h == original.ground_truth[f][i].box.h);
      CHECK(loaded.ground_truth[f][i].appearance == original.ground_truth[f][i].appearance);
    }
  }
}
