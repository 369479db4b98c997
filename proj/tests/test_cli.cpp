#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("transmot_cli_" + std::to_string(::getpid()) + "_" +
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

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const TempDir out;
  const std::string log = out.file("log.txt");
  const std::string cmd = std::string(TRANSMOT_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(raw), ss.str()};
}

std::string write_scenario(const TempDir& dir, const std::string& extra) {
  const std::string path = dir.file("scenario.cfg");
  std::ofstream out(path);
  out << "num_targets=4\nframe_count=20\nmax_speed=2.0\nseed=5\n" << extra;
  return path;
}

}  // namespace

TEST_CASE("--help prints usage") {
  const RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("track") != std::string::npos);
  CHECK(r.output.find("gradcheck") != std::string::npos);
}

TEST_CASE("missing inputs exit nonzero with an error category") {
  const RunResult r = run_cli("track --seq /nonexistent --checkpoint /nope --out /tmp/x.txt");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("synth is deterministic and loadable") {
  TempDir dir;
  const std::string cfg = write_scenario(dir, "box_jitter_std=1.0\nfalse_negative_rate=0.1\n");
  const RunResult r1 = run_cli("synth --config " + cfg + " --out " + dir.file("a"));
  const RunResult r2 = run_cli("synth --config " + cfg + " --out " + dir.file("b"));
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir.file("a") + "/det/det.txt") == slurp(dir.file("b") + "/det/det.txt"));
  CHECK(slurp(dir.file("a") + "/gt/gt.txt") == slurp(dir.file("b") + "/gt/gt.txt"));
  CHECK(slurp(dir.file("a") + "/det/features.txt") == slurp(dir.file("b") + "/det/features.txt"));
}

TEST_CASE("gradcheck passes by default and fails under corruption") {
  const RunResult ok = run_cli("gradcheck --embed-dim 8 --heads 2 --window 2 --seed 4");
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("PASS") != std::string::npos);

  const RunResult bad = run_cli("gradcheck --embed-dim 8 --heads 2 --window 2 --seed 4 --corrupt");
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("FAIL") != std::string::npos);

  const RunResult again = run_cli("gradcheck --embed-dim 8 --heads 2 --window 2 --seed 4");
  CHECK(again.output == ok.output);  // seed-deterministic report
}

TEST_CASE("synth -> train -> track -> eval round trip reaches IDS=0 on a clean scene") {
  TempDir dir;
  fs::create_directories(dir.path / "data");
  const std::string cfg = write_scenario(dir, "");
  REQUIRE(run_cli("synth --config " + cfg + " --out " + dir.file("data/seq1")).exit_code == 0);

  const RunResult trained =
      run_cli("train --data " + dir.file("data") + " --out " + dir.file("model.ckpt") +
              " --epochs 120 --max-steps 2000 --embed-dim 32 --heads 4 --window 5 --seed 3" +
              " --loss-csv " + dir.file("loss.csv"));
  REQUIRE(trained.exit_code == 0);
  CHECK(fs::exists(dir.file("model.ckpt")));
  CHECK(fs::exists(dir.file("loss.csv")));

  const RunResult tracked =
      run_cli("track --seq " + dir.file("data/seq1") + " --checkpoint " + dir.file("model.ckpt") +
              " --out " + dir.file("results.txt"));
  REQUIRE(tracked.exit_code == 0);
  CHECK(tracked.output.find("fps") != std::string::npos);

  const RunResult eval = run_cli("eval --gt " + dir.file("data/seq1/gt/gt.txt") + " --results " +
                                 dir.file("results.txt") + " --csv " + dir.file("report.csv"));
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("IDS         0") != std::string::npos);
  CHECK(eval.output.find("MOTA        1.0000") != std::string::npos);
  CHECK(fs::exists(dir.file("report.csv")));
}

TEST_CASE("eval reproduces the hand identity-switch case") {
  TempDir dir;
  {
    std::ofstream gt(dir.file("gt.txt"));
    for (int f = 1; f <= 3; ++f) gt << f << ",1,0,0,10,10,1,1,1.0\n";
    std::ofstream res(dir.file("res.txt"));
    res << "1,1,0,0,10,10,1,-1,-1,-1\n2,2,0,0,10,10,1,-1,-1,-1\n3,2,0,0,10,10,1,-1,-1,-1\n";
  }
  const RunResult r = run_cli("eval --gt " + dir.file("gt.txt") + " --results " + dir.file("res.txt"));
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("IDS         1") != std::string::npos);
  CHECK(r.output.find("MOTA        0.6667") != std::string::npos);
}
