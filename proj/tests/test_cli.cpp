#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  auto d = fs::temp_directory_path() / ("lagen_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

Run run(const std::string& args) {
  static const fs::path dir = scratch();
  const auto out = dir / "out.txt", err = dir / "err.txt";
  const std::string cmd = std::string(LAGEN_CLI) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  Run r;
  int status = std::system(cmd.c_str());
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string corpus(const std::string& name) { return std::string(LAGEN_CORPUS_DIR) + "/" + name; }

std::string write(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("corpus file with verification") {
  auto r = run(corpus("image_restoration_pinv.la") + " --desk --verify --seed 4");
  CHECK(r.code == 0);
  CHECK(r.err.find("status: pass") != std::string::npos);
  CHECK(r.out.find("gemv") != std::string::npos);
}

TEST_CASE("exit codes") {
  auto r = run("/nonexistent/problem.la");
  CHECK(r.code == 1);
  CHECK(r.err.find("cannot open") != std::string::npos);
  CHECK(run("").code == 1);
  CHECK(run("--emit yaml " + corpus("tikhonov.la")).code == 1);

  r = run(write("bogus.la", "Matrix A(10,10) <Bogus>\n"));
  CHECK(r.code == 2);
  CHECK(r.err.find("1:18") != std::string::npos);
  CHECK(run(write("dim.la", "Matrix H(10, 50) <>\nColumnVector x(10) <>\nColumnVector y(10) <>\n"
                            "y = H*x\n"))
            .code == 2);

  CHECK(run(write("singular.la", "Matrix A(5, 5) <>\nMatrix X(5, 5) <>\nX = inv(A)\n")).code == 3);
  CHECK(run(corpus("lmmse.la") + " --time-limit 0").code == 5);

  // a tolerance nothing can meet
  r = run(corpus("tikhonov.la") + " --desk --verify --tol 1e-300");
  CHECK(r.code == 4);
  CHECK(r.err.find("status: fail") != std::string::npos);
}

TEST_CASE("emission formats and files") {
  const auto dir = scratch();
  const auto dot = (dir / "g.dot").string(), rep = (dir / "r.txt").string();
  const std::string base = corpus("generalized_least_squares.la") + " --desk --max-iterations 300";
  auto r = run(base + " --k-best 2 --emit json --dot " + dot + " --report " + rep + " --verify");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  REQUIRE(j.is_array());
  CHECK(j.size() == 2);
  CHECK(j[0]["format"] == "lagen-listing");
  CHECK(slurp(dot).rfind("digraph", 0) == 0);
  const auto report = slurp(rep);
  CHECK(report.find("total cost:") != std::string::npos);
  CHECK(report.find("# verification of program 2") != std::string::npos);

  r = run(base + " --emit pseudocode");
  CHECK(r.code == 0);
  CHECK(r.out.find("output b = ") != std::string::npos);

  // deterministic listings and graphs under an iteration budget
  const auto dot2 = (dir / "g2.dot").string();
  auto a = run(base + " --k-best 3 --dot " + dot);
  auto b = run(base + " --k-best 3 --dot " + dot2);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dot) == slurp(dot2));
  CHECK(run(base + " --no-merging").code == 0);
}

TEST_CASE("random problems and kernel table") {
  auto r = run("--random-problem --seed 5 --max-dim 100 --verify --print-problem");
  CHECK(r.code == 0);
  CHECK(r.err.find("X = ") != std::string::npos);
  r = run("--dump-kernels");
  CHECK(r.code == 0);
  CHECK(r.out.find("trsm") != std::string::npos);
  r = run("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("--k-best") != std::string::npos);
}
