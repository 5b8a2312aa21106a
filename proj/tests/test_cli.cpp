#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "spotlier/image.hpp"
#include "spotlier/patches.hpp"
#include "test_util.hpp"

// End-to-end checks of the spotlier binary. The test harness passes the
// executable path through SPOTLIER_CLI.

namespace {

using spotlier::testutil::TempDir;
using spotlier::testutil::slurp;

std::string cli() {
  const char* path = std::getenv("SPOTLIER_CLI");
  REQUIRE_MESSAGE(path != nullptr, "SPOTLIER_CLI not set");
  return path;
}

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = cli() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

// small, fast pipeline configuration shared by the cases below
const char* kSynthFlags = "--frames 4 --height 160 --width 200 --spots 4 --atoms 12 --seed 11";

double trailer_value(const std::filesystem::path& file, const std::string& key) {
  std::ifstream in(file);
  std::string line, found;
  while (std::getline(in, line))
    if (line.rfind(key + ",", 0) == 0) found = line.substr(key.size() + 1);
  REQUIRE_MESSAGE(!found.empty(), "no trailer line for ", key);
  return std::stod(found);
}

} // namespace

TEST_CASE("cli usage errors exit with code 2") {
  CHECK(run("synth") == 2);                       // missing --out
  CHECK(run("") == 2);                            // missing subcommand
  CHECK(run("frobnicate --out x") == 2);          // unknown subcommand
  TempDir tmp("cliu");
  CHECK(run("train-dict --input " + tmp.path().string() + " --out d.dict") == 2); // no frames
}

TEST_CASE("cli synth is byte-reproducible") {
  TempDir tmp("clis");
  const std::string d1 = tmp.file("a").string(), d2 = tmp.file("b").string();
  REQUIRE(run("synth --out " + d1 + " " + kSynthFlags) == 0);
  REQUIRE(run("synth --out " + d2 + " " + kSynthFlags) == 0);
  CHECK(slurp(d1 + "/frame_0000.pgm") == slurp(d2 + "/frame_0000.pgm"));
  CHECK(slurp(d1 + "/frame_0003.pgm") == slurp(d2 + "/frame_0003.pgm"));
  CHECK(slurp(d1 + "/truth.csv") == slurp(d2 + "/truth.csv"));
  CHECK(slurp(d1 + "/manifest.txt") == slurp(d2 + "/manifest.txt"));
  CHECK(std::filesystem::exists(d1 + "/frame_0002.pgm"));
  CHECK(!std::filesystem::exists(d1 + "/truth.csv.tmp"));
}

TEST_CASE("cli full pipeline reproduces the pinned golden AUC") {
  TempDir tmp("clip");
  const std::string data = tmp.file("data").string();
  const std::string dict = tmp.file("bg.dict").string();
  REQUIRE(run("synth --out " + data + " " + kSynthFlags) == 0);
  REQUIRE(run("train-dict --input " + data + " --ann " + data + "/truth.csv --out " + dict +
              " --atoms 12 --sparsity 3 --iters 10 --seed 3 --log " +
              tmp.file("log.csv").string()) == 0);

  // training error log is monotone
  {
    std::ifstream log(tmp.file("log.csv"));
    std::string line;
    std::getline(log, line);
    REQUIRE(line == "iter,representation_error");
    double prev = 1e300;
    while (std::getline(log, line)) {
      const double err = std::stod(line.substr(line.find(',') + 1));
      CHECK(err <= prev + 1e-9);
      prev = err;
    }
  }

  const std::string det = tmp.file("det.csv").string();
  const std::string outliers = tmp.file("outliers").string();
  REQUIRE(run("detect --input " + data + " --dict " + dict + " --beta 0.2 --out " + det +
              " --dump-outliers " + outliers + " --diagnostics " + tmp.file("diag").string() +
              " --jobs 2") == 0);
  CHECK(slurp(tmp.file("diag/diag_0000.csv")).rfind("iter,objective,primal,dual,mu\n", 0) == 0);

  // detections land on the truth: evaluate both eval paths
  const std::string pr = tmp.file("pr.csv").string();
  REQUIRE(run("eval --truth " + data + "/truth.csv --outliers " + outliers + " --out " + pr) ==
          0);
  const double auc = trailer_value(pr, "auc");

  // golden pinned from the first run of this exact pipeline
  CHECK(std::abs(auc - 0.99506578947368418) <= 1e-9);

  // determinism across reruns: identical detection CSV bytes
  const std::string det2 = tmp.file("det2.csv").string();
  REQUIRE(run("detect --input " + data + " --dict " + dict + " --beta 0.2 --out " + det2 +
              " --jobs 4") == 0);
  CHECK(slurp(det) == slurp(det2));

  // per-group aggregation: the last two frames alone
  const std::string prg = tmp.file("prg.csv").string();
  REQUIRE(run("eval --truth " + data + "/truth.csv --outliers " + outliers +
              " --frame-range 2:3 --out " + prg) == 0);
  CHECK(trailer_value(prg, "auc") > 0.5);
  CHECK(run("eval --truth " + data + "/truth.csv --outliers " + outliers +
            " --frame-range 2:9 --out " + prg) == 2); // beyond the 4 frames
}

TEST_CASE("cli train-dict learns background-only frames and is reproducible") {
  TempDir tmp("clit");
  const std::string data = tmp.file("data").string();
  // overlap-0 frames sit exactly in the planted span (aside from 8-bit
  // quantization), so the dictionary can in principle be exact
  REQUIRE(run("synth --out " + data +
              " --frames 6 --height 270 --width 378 --spots 0 --overlap 0 --noise 0"
              " --seed 3") == 0);
  const std::string flags = " --atoms 20 --sparsity 4 --iters 40 --seed 2 --overlap 0";
  REQUIRE(run("train-dict --input " + data + " --out " + tmp.file("a.dict").string() + flags +
              " --log " + tmp.file("log.csv").string()) == 0);

  // training error: monotone, and the final representation error is well
  // under 10% of the zero-code error ||Y||_F
  double first = -1.0, last = -1.0, prev = 1e300;
  {
    std::ifstream log(tmp.file("log.csv"));
    std::string line;
    std::getline(log, line);
    while (std::getline(log, line)) {
      last = std::stod(line.substr(line.find(',') + 1));
      if (first < 0) first = last;
      CHECK(last <= prev + 1e-9);
      prev = last;
    }
  }
  double frob2 = 0.0;
  for (const auto& e : std::filesystem::directory_iterator(data)) {
    if (e.path().extension() != ".pgm") continue;
    const spotlier::ImageGray img = spotlier::load_image(e.path());
    const spotlier::PatchGrid g = spotlier::make_grid(img.height, img.width, 27, 0.0);
    frob2 += spotlier::extract_patches(img, g).values.squaredNorm();
  }
  CHECK(last < first);
  CHECK(last < 0.10 * std::sqrt(frob2));

  // byte-identical rerun under the same seed and flags
  REQUIRE(run("train-dict --input " + data + " --out " + tmp.file("b.dict").string() + flags) ==
          0);
  CHECK(slurp(tmp.file("a.dict")) == slurp(tmp.file("b.dict")));

  // more atoms than usable patches
  CHECK(run("train-dict --input " + data + " --out " + tmp.file("c.dict").string() +
            " --atoms 9999 --overlap 0") == 2);
}

TEST_CASE("cli detect validates dictionary and patch size agreement") {
  TempDir tmp("clim");
  const std::string data = tmp.file("data").string();
  const std::string dict = tmp.file("bg.dict").string();
  REQUIRE(run("synth --out " + data + " --frames 2 --height 80 --width 80 --spots 0 "
              "--patch-size 21 --atoms 8 --seed 5") == 0);
  REQUIRE(run("train-dict --input " + data + " --out " + dict +
              " --patch-size 21 --atoms 8 --sparsity 2 --iters 3 --seed 5") == 0);
  const std::string err = tmp.file("err.txt").string();
  CHECK(run("detect --input " + data + " --dict " + dict + " --beta 0.2 --out " +
            tmp.file("d.csv").string(),
            err) == 2);
  const std::string msg = slurp(err);
  CHECK(msg.find("441") != std::string::npos); // dictionary P
  CHECK(msg.find("729") != std::string::npos); // what --patch-size 27 implies
}

TEST_CASE("cli detect with huge beta writes a header-only CSV") {
  TempDir tmp("clib");
  const std::string data = tmp.file("data").string();
  const std::string dict = tmp.file("bg.dict").string();
  REQUIRE(run("synth --out " + data + " --frames 2 --height 120 --width 120 --spots 2 "
              "--atoms 8 --seed 9") == 0);
  REQUIRE(run("train-dict --input " + data + " --out " + dict +
              " --atoms 8 --sparsity 2 --iters 3 --seed 9") == 0);
  REQUIRE(run("detect --input " + data + " --dict " + dict + " --beta 10 --out " +
              tmp.file("d.csv").string()) == 0);
  CHECK(slurp(tmp.file("d.csv")) == "frame,x,y,score\n");
}

TEST_CASE("cli baseline methods run and reject unknown names") {
  TempDir tmp("clibase");
  const std::string data = tmp.file("data").string();
  REQUIRE(run("synth --out " + data + " --frames 2 --height 100 --width 100 --spots 3 "
              "--atoms 8 --seed 13") == 0);
  for (const std::string m : {"log", "dog", "gsoth"}) {
    const std::string out = tmp.file(m + ".csv").string();
    REQUIRE(run("baseline --input " + data + " --method " + m + " --out " + out) == 0);
    CHECK(slurp(out).rfind("frame,x,y,score\n", 0) == 0);
  }
  CHECK(run("baseline --input " + data + " --method blur --out " +
            tmp.file("x.csv").string()) == 2);
}

TEST_CASE("cli eval counts mode: identical counts give Pearson 1") {
  TempDir tmp("clic");
  std::ofstream(tmp.file("truth.csv")) << "frame,x,y\n0,5,5\n1,5,5\n1,20,20\n2,5,5\n2,20,20\n2,40,40\n";
  std::ofstream(tmp.file("det.csv"))
      << "frame,x,y,score\n0,5,5,1\n1,5,5,1\n1,20,20,1\n2,5,5,1\n2,20,20,1\n2,40,40,1\n";
  const std::string counts = tmp.file("counts.csv").string();
  REQUIRE(run("eval --counts --truth " + tmp.file("truth.csv").string() + " --detections " +
              tmp.file("det.csv").string() + " --out " + counts) == 0);
  CHECK(trailer_value(counts, "pearson") == doctest::Approx(1.0));
  const std::string body = slurp(counts);
  CHECK(body.find("0,1,1\n1,2,2\n2,3,3\n") != std::string::npos);

  // constant counts have no defined correlation: validation error
  std::ofstream(tmp.file("flat.csv")) << "frame,x,y\n0,5,5\n1,5,5\n2,5,5\n";
  std::ofstream(tmp.file("flatd.csv")) << "frame,x,y,score\n0,5,5,1\n1,5,5,1\n2,5,5,1\n";
  CHECK(run("eval --counts --truth " + tmp.file("flat.csv").string() + " --detections " +
            tmp.file("flatd.csv").string() + " --out " + tmp.file("c2.csv").string()) == 2);
}

TEST_CASE("cli eval rejects frame-set mismatches") {
  TempDir tmp("clie");
  std::ofstream(tmp.file("truth.csv")) << "frame,x,y\n0,5,5\n";
  std::ofstream(tmp.file("det.csv")) << "frame,x,y,score\n3,5,5,0.9\n";
  CHECK(run("eval --counts --truth " + tmp.file("truth.csv").string() + " --detections " +
            tmp.file("det.csv").string() + " --out " + tmp.file("c.csv").string() +
            " --frames 1") == 2);
}
