#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fst/cli.hpp>
#include <fst/generators.hpp>

#include <filesystem>
#include <fstream>

using namespace fst;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "fst_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen-matrix / preprocess / transform round trip") {
  const auto dir = temp_dir();
  const auto mat = (dir / "a.fstm").string();
  const auto skp = (dir / "a.fstk").string();
  const auto out = (dir / "result.csv").string();

  CHECK(cli_main({"fst", "gen-matrix", "--n", "16", "--seed", "11", "--out", mat}) == 0);
  CHECK(cli_main({"fst", "preprocess", "--matrix", mat, "--out-sketch", skp}) == 0);

  // x = A^T e_3, so Ax = e_3 exactly.
  const RowMatrix a = read_matrix(mat);
  const Eigen::VectorXd x = a.row(3).transpose();
  write_matrix(dir / "x.fstm", RowMatrix(x.transpose()));

  CHECK(cli_main({"fst", "transform", "--sketch", skp, "--vector", (dir / "x.fstm").string(),
                  "--epsilon", "0.5", "--s", "1", "--J", "500", "--K", "3", "--seed", "1",
                  "--out", out}) == 0);

  const std::string csv = slurp(out);
  std::stringstream ss(csv);
  std::string header, line;
  std::getline(ss, header);
  CHECK(header == "index,value");
  REQUIRE(std::getline(ss, line));
  const auto comma = line.find(',');
  CHECK(line.substr(0, comma) == "3");
  CHECK(std::stod(line.substr(comma + 1)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(!std::getline(ss, line));

  std::filesystem::remove_all(dir);
}

TEST_CASE("transform with mismatched dimensions exits 2") {
  const auto dir = temp_dir();
  const auto mat = (dir / "b.fstm").string();
  const auto skp = (dir / "b.fstk").string();
  REQUIRE(cli_main({"fst", "gen-matrix", "--n", "16", "--seed", "3", "--out", mat}) == 0);
  REQUIRE(cli_main({"fst", "preprocess", "--matrix", mat, "--out-sketch", skp}) == 0);

  write_matrix(dir / "short.fstm", RowMatrix::Ones(1, 9));
  CHECK(cli_main({"fst", "transform", "--sketch", skp, "--vector", (dir / "short.fstm").string(),
                  "--epsilon", "0.5", "--s", "1", "--J", "10", "--K", "2"}) == 2);

  // A two-row FSTM is not a vector.
  write_matrix(dir / "wide.fstm", RowMatrix::Ones(2, 16));
  CHECK(cli_main({"fst", "transform", "--sketch", skp, "--vector", (dir / "wide.fstm").string(),
                  "--epsilon", "0.5", "--s", "1", "--J", "10", "--K", "2"}) == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("usage and I/O errors exit 2") {
  CHECK(cli_main({"fst", "no-such-command"}) == 2);
  CHECK(cli_main({"fst", "gen-matrix", "--n", "8"}) == 2);  // missing --out
  CHECK(cli_main({"fst", "preprocess", "--matrix", "/nonexistent.fstm", "--out-sketch",
                  "/tmp/x.fstk"}) == 2);
  CHECK(cli_main({"fst", "bench", "--config", "/nonexistent.cfg"}) == 2);
}

TEST_CASE("verify subcommand passes for k=2 and k=4") {
  CHECK(cli_main({"fst", "verify", "--k", "2"}) == 0);
  CHECK(cli_main({"fst", "verify", "--k", "4"}) == 0);
  // Odd k is a usage error, not a verification failure.
  CHECK(cli_main({"fst", "verify", "--k", "3"}) == 2);
}

TEST_CASE("bench runs a config end to end and is deterministic") {
  const auto dir = temp_dir();
  const auto mat = (dir / "c.fstm").string();
  const auto skp = (dir / "c.fstk").string();
  REQUIRE(cli_main({"fst", "gen-matrix", "--n", "16", "--seed", "5", "--out", mat}) == 0);
  REQUIRE(cli_main({"fst", "preprocess", "--matrix", mat, "--out-sketch", skp}) == 0);

  {
    std::ofstream cfg(dir / "grid.cfg");
    cfg << "n = 16\ns = 2\ntrials = 4\nJgrid = 10,40\nKgrid = 2\nepsilon = 0.25\nseed = 21\n"
        << "mode = exact-sparse\nsketch = " << skp << "\n";
  }

  const auto out1 = (dir / "r1.csv").string();
  const auto out2 = (dir / "r2.csv").string();
  CHECK(cli_main({"fst", "bench", "--config", (dir / "grid.cfg").string(), "--out", out1}) == 0);
  CHECK(cli_main({"fst", "bench", "--config", (dir / "grid.cfg").string(), "--out", out2}) == 0);

  // Identical except the runtime column.
  std::stringstream s1(slurp(out1)), s2(slurp(out2));
  std::string l1, l2;
  std::getline(s1, l1);
  std::getline(s2, l2);
  CHECK(l1 == "J,K,worst_inf_err,worst_l2_err,runtime_ratio");
  CHECK(l1 == l2);
  int rows = 0;
  while (std::getline(s1, l1) && std::getline(s2, l2)) {
    CHECK(l1.substr(0, l1.rfind(',')) == l2.substr(0, l2.rfind(',')));
    ++rows;
  }
  CHECK(rows == 2);

  // Config without a sketch key and no --sketch flag is a usage error.
  {
    std::ofstream cfg(dir / "nosketch.cfg");
    cfg << "n = 16\ntrials = 1\nJgrid = 5\nKgrid = 2\nepsilon = 0.25\n";
  }
  CHECK(cli_main({"fst", "bench", "--config", (dir / "nosketch.cfg").string()}) == 2);

  std::filesystem::remove_all(dir);
}
