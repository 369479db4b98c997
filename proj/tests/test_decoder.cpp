#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "transmot/decoder.hpp"
#include "transmot/model.hpp"
#include "transmot/training.hpp"

using namespace transmot;

namespace {

struct DecoderFixture {
  ModelConfig cfg;
  TransMOTModel model;
  std::vector<Detection> detections;
  EncoderInputs enc_in;
  DecoderInputs dec_in;

  DecoderFixture(int m, int n, int t, int d, int heads, std::uint64_t seed)
      : cfg(make_cfg(d, heads, t)), model(cfg, seed) {
    std::mt19937_64 rng(seed + 100);
    std::vector<TrackletWindow> windows;
    for (int i = 0; i < n; ++i) {
      TrackletWindow w(t);
      BoundingBox box = testutil::random_box(rng, 80.0);
      for (int ti = 0; ti < t; ++ti) {
        box.u += 2.0;
        w.slots[ti].present = true;
        w.slots[ti].box = box;
        w.slots[ti].appearance = random_appearance(rng);
      }
      windows.push_back(std::move(w));
    }
    for (int i = 0; i < m; ++i) {
      Detection det;
      det.bbox = testutil::random_box(rng, 80.0);
      det.appearance = random_appearance(rng);
      detections.push_back(std::move(det));
    }
    enc_in = build_encoder_inputs(windows, 320, 240, cfg);
    dec_in = build_decoder_inputs(detections, 320, 240, cfg);
  }

  static ModelConfig make_cfg(int d, int heads, int t) {
    ModelConfig c;
    c.appearance_dim = 4;
    c.embed_dim = d;
    c.heads = heads;
    c.window = t;
    return c;
  }

  static std::vector<double> random_appearance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return {u(rng), u(rng), u(rng), u(rng)};
  }

  ExtendedAssignmentMatrix run() const { return model.forward(enc_in, dec_in); }
};

}  // namespace

TEST_CASE("decode shape contract M=5 N=4 T=3") {
  DecoderFixture fix(5, 4, 3, 16, 4, 71);
  const ExtendedAssignmentMatrix a = fix.run();
  CHECK(a.logits.shape() == std::vector<int>{6, 5});
  CHECK(a.num_candidates == 5);
  CHECK(a.num_tracklets == 4);
}

TEST_CASE("candidate rows of probs are distributions; sink row lives in [0,1]") {
  DecoderFixture fix(4, 3, 3, 16, 4, 72);
  const AssignmentProbs probs = fix.run().probs();
  for (int r = 0; r < probs.num_candidates(); ++r) {
    double row = 0.0;
    for (int c = 0; c < probs.cols; ++c) {
      CHECK(probs.at(r, c) >= 0.0);
      CHECK(probs.at(r, c) <= 1.0);
      row += probs.at(r, c);
    }
    CHECK(std::abs(row - 1.0) <= 1e-9);
  }
  for (int c = 0; c < probs.cols; ++c) {
    CHECK(probs.at(probs.rows - 1, c) >= 0.0);
    CHECK(probs.at(probs.rows - 1, c) <= 1.0);
  }
}

TEST_CASE("decode is deterministic") {
  DecoderFixture fix(3, 3, 2, 8, 2, 73);
  const ExtendedAssignmentMatrix a = fix.run();
  const ExtendedAssignmentMatrix b = fix.run();
  for (std::size_t i = 0; i < a.logits.numel(); ++i) CHECK(a.logits.at(i) == b.logits.at(i));
}

TEST_CASE("decode rejects empty problems") {
  DecoderFixture fix(2, 2, 2, 8, 2, 74);
  CHECK_THROWS_AS(build_decoder_inputs({}, 320, 240, fix.cfg), std::invalid_argument);
}

TEST_CASE("tracklet permutation permutes logit columns, source column fixed") {
  DecoderFixture fix(4, 3, 3, 8, 2, 75);
  const Tensor enc_out = fix.model.encode(fix.enc_in.features, fix.enc_in.graphs);
  const ExtendedAssignmentMatrix base =
      fix.model.decode(fix.dec_in.graph, fix.dec_in.features, enc_out);

  const int t = enc_out.size(0), n = enc_out.size(1), d = enc_out.size(2);
  const std::vector<int> perm = {1, 2, 0};  // new position of old column i
  std::vector<double> permuted(enc_out.numel());
  for (int ti = 0; ti < t; ++ti) {
    for (int ni = 0; ni < n; ++ni) {
      for (int c = 0; c < d; ++c) {
        permuted[(static_cast<std::size_t>(ti) * n + perm[ni]) * d + c] =
            enc_out.at((static_cast<std::size_t>(ti) * n + ni) * d + c);
      }
    }
  }
  const ExtendedAssignmentMatrix moved =
      fix.model.decode(fix.dec_in.graph, fix.dec_in.features, Tensor::from({t, n, d}, permuted));
  for (int r = 0; r < base.num_candidates + 1; ++r) {
    for (int c = 0; c < n; ++c) {
      CHECK(base.logits.at(r * (n + 1) + c) ==
            doctest::Approx(moved.logits.at(r * (n + 1) + perm[c])).epsilon(1e-11));
    }
    CHECK(base.logits.at(r * (n + 1) + n) ==
          doctest::Approx(moved.logits.at(r * (n + 1) + n)).epsilon(1e-11));
  }
}

TEST_CASE("candidate permutation permutes logit rows, sink row fixed") {
  std::mt19937_64 rng(76);
  DecoderFixture fix(4, 3, 2, 8, 2, 76);
  const Tensor enc_out = fix.model.encode(fix.enc_in.features, fix.enc_in.graphs);
  const ExtendedAssignmentMatrix base =
      fix.model.decode(fix.dec_in.graph, fix.dec_in.features, enc_out);

  const std::vector<int> perm = {2, 0, 3, 1};
  std::vector<Detection> permuted_dets(fix.detections.size());
  for (std::size_t i = 0; i < fix.detections.size(); ++i) {
    permuted_dets[perm[i]] = fix.detections[i];
  }
  const DecoderInputs dec_perm = build_decoder_inputs(permuted_dets, 320, 240, fix.cfg);
  const ExtendedAssignmentMatrix moved =
      fix.model.decode(dec_perm.graph, dec_perm.features, enc_out);

  const int cols = base.num_tracklets + 1;
  for (int r = 0; r < base.num_candidates; ++r) {
    for (int c = 0; c < cols; ++c) {
      CHECK(base.logits.at(r * cols + c) ==
            doctest::Approx(moved.logits.at(perm[r] * cols + c)).epsilon(1e-11));
    }
  }
  for (int c = 0; c < cols; ++c) {
    CHECK(base.logits.at(base.num_candidates * cols + c) ==
          doctest::Approx(moved.logits.at(base.num_candidates * cols + c)).epsilon(1e-11));
  }
}

TEST_CASE("decoder parameters pass finite-difference checks on a tiny instance") {
  DecoderFixture fix(3, 2, 2, 8, 2, 77);
  auto loss = [&] {
    const ExtendedAssignmentMatrix a = fix.run();
    return mean(mul(a.logits, a.logits));
  };
  for (const char* name :
       {"decoder.tgt_embed.w", "decoder.sink_embed", "decoder.source_embed", "decoder.self.wq",
        "decoder.self.cheb0", "decoder.cross.wq", "decoder.cross.wk", "decoder.cross.wv",
        "decoder.cross.wo", "decoder.ffn.w1", "decoder.head.w", "decoder.head.b"}) {
    Tensor param = fix.model.store().get(name);
    INFO("parameter: " << name);
    CHECK(testutil::gradcheck_tensor(param, loss) < 1e-4);
  }
}

TEST_CASE("hard_assign cases") {
  SUBCASE("dominant diagonal matches diagonally") {
    AssignmentProbs probs;
    probs.rows = 4;  // 3 candidates + sink
    probs.cols = 4;  // 3 tracklets + source
    probs.data.assign(16, 0.01);
    for (int i = 0; i < 3; ++i) probs.data[i * 4 + i] = 0.95;
    const HardAssignment h = hard_assign(probs, 0.5);
    REQUIRE(h.pairs.size() == 3);
    for (const auto& [cand, tr] : h.pairs) CHECK(cand == tr);
    CHECK(h.unmatched_candidates.empty());
    CHECK(h.unmatched_tracklets.empty());
  }
  SUBCASE("uniform rows below the threshold match nothing") {
    AssignmentProbs probs;
    probs.rows = 3;
    probs.cols = 4;  // N+1 = 4 -> uniform 0.25
    probs.data.assign(12, 0.25);
    const HardAssignment h = hard_assign(probs, 0.5);
    CHECK(h.pairs.empty());
    CHECK(h.unmatched_candidates.size() == 2);
    CHECK(h.unmatched_tracklets.size() == 3);
  }
  SUBCASE("3x3 random blocks match brute force") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      AssignmentProbs probs;
      probs.rows = 4;
      probs.cols = 4;
      probs.data.assign(16, 0.0);
      std::vector<std::vector<double>> grid(3, std::vector<double>(3));
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) probs.data[r * 4 + c] = grid[r][c] = u(rng);
      }
      const HardAssignment h = hard_assign(probs, 0.0);
      double total = 0.0;
      for (const auto& [cand, tr] : h.pairs) total += probs.at(cand, tr);
      CHECK(total ==
            doctest::Approx(testutil::brute_force_assignment(grid, true)).epsilon(1e-9));
    }
  }
  SUBCASE("result is always a matching") {
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AssignmentProbs probs;
    probs.rows = 6;
    probs.cols = 5;
    probs.data.resize(30);
    for (auto& v : probs.data) v = u(rng);
    const HardAssignment h = hard_assign(probs, 0.3);
    std::vector<char> cand_seen(probs.num_candidates(), 0), tr_seen(probs.num_tracklets(), 0);
    for (const auto& [cand, tr] : h.pairs) {
      CHECK(!cand_seen[cand]);
      CHECK(!tr_seen[tr]);
      cand_seen[cand] = tr_seen[tr] = 1;
      CHECK(probs.at(cand, tr) > 0.3);
    }
    CHECK(h.pairs.size() + h.unmatched_candidates.size() ==
          static_cast<std::size_t>(probs.num_candidates()));
    CHECK(h.pairs.size() + h.unmatched_tracklets.size() ==
          static_cast<std::size_t>(probs.num_tracklets()));
  }
}
