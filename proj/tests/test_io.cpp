#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "kbos/error.hpp"
#include "kbos/io.hpp"

using namespace kbos;
namespace fs = std::filesystem;

TEST_CASE("double formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("trajectory round trip is bitwise") {
  const auto dir = fs::temp_directory_path() / "kbos_io_roundtrip";
  fs::remove_all(dir);
  const auto p = simulate_path(fx::rich(0.05), 1.3, TimeGrid(500, 1.0), 77);
  write_trajectory(dir, p);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "meta.json"));
  const auto q = read_trajectory(dir);
  CHECK(q.X == p.X);
  CHECK(q.Y == p.Y);
  CHECK(q.grid == p.grid);
  CHECK(q.seed == 77);
  CHECK(q.theta_true == 1.3);
  CHECK(q.eps == 0.05);
  fs::remove_all(dir);
}

TEST_CASE("reading a missing or corrupt trajectory") {
  const auto dir = fs::temp_directory_path() / "kbos_io_bad";
  fs::remove_all(dir);
  CHECK_THROWS_AS(read_trajectory(dir), InputError);
  fs::create_directories(dir);
  std::ofstream(dir / "meta.json") << R"({"seed": 1, "theta_true": 1, "eps": 0.01, "h": 0.5, "n_steps": 2, "T": 1})";
  std::ofstream(dir / "trajectory.csv") << "t,X,Y\n0,0,1\n0.5,abc,1\n";
  CHECK_THROWS_AS(read_trajectory(dir), InputError);
  fs::remove_all(dir);
}
