#include "kbos/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kbos/error.hpp"

namespace kbos {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

double parse_double(const std::string& cell, const fs::path& path, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw InputError(path.string() + ":" + std::to_string(line) +
                     ": not a number '" + cell + "'");
  }
  return v;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_trajectory(const fs::path& dir, const Trajectory& traj) {
  auto os = open_out(dir / "trajectory.csv");
  os << "t,X,Y\n";
  for (std::size_t k = 0; k < traj.grid.size(); ++k) {
    os << format_double(traj.grid.node(k)) << ',' << format_double(traj.X[k]) << ','
       << format_double(traj.Y[k]) << '\n';
  }
  write_json(dir / "meta.json", {{"seed", traj.seed},
                                 {"theta_true", traj.theta_true},
                                 {"eps", traj.eps},
                                 {"h", traj.grid.step()},
                                 {"n_steps", traj.grid.n_steps()},
                                 {"T", traj.grid.horizon()}});
}

Trajectory read_trajectory(const fs::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw InputError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(meta_path.string() + ": " + e.what());
  }

  std::size_t n = 0;
  double horizon = 0.0;
  Trajectory traj{TimeGrid(1, 1.0), {}, {}, 0, 0.0, 0.0};
  try {
    n = meta.at("n_steps").get<std::size_t>();
    horizon = meta.at("T").get<double>();
    traj.seed = meta.at("seed").get<std::uint64_t>();
    traj.theta_true = meta.at("theta_true").get<double>();
    traj.eps = meta.at("eps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(meta_path.string() + ": " + e.what());
  }
  traj.grid = TimeGrid(n, horizon);

  const auto csv_path = dir / "trajectory.csv";
  std::ifstream in(csv_path);
  if (!in) throw InputError("cannot open " + csv_path.string());
  std::string line;
  std::getline(in, line);
  if (line != "t,X,Y") throw InputError(csv_path.string() + ": bad header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, x, y;
    if (!std::getline(ss, t, ',') || !std::getline(ss, x, ',') ||
        !std::getline(ss, y, ',')) {
      throw InputError(csv_path.string() + ":" + std::to_string(lineno) +
                       ": expected 3 columns");
    }
    traj.X.push_back(parse_double(x, csv_path, lineno));
    traj.Y.push_back(parse_double(y, csv_path, lineno));
  }
  if (traj.X.size() != traj.grid.size()) {
    throw InputError(csv_path.string() + ": row count does not match n_steps");
  }
  return traj;
}

void write_filter_csv(const fs::path& path, const FilterOutput& out) {
  auto os = open_out(path);
  os << "t,m,gamma_star,D" << (out.mdot ? ",mdot" : "") << '\n';
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    os << format_double(out.grid.node(k)) << ',' << format_double(out.m[k]) << ','
       << format_double(out.gamma_star[k]) << ',' << format_double(out.D[k]);
    if (out.mdot) os << ',' << format_double((*out.mdot)[k]);
    os << '\n';
  }
}

void write_process_csv(const fs::path& path, const EstimatorProcess& process) {
  auto os = open_out(path);
  os << "t,theta_star,fisher_cum\n";
  for (std::size_t i = 0; i < process.index.size(); ++i) {
    os << format_double(process.t[i]) << ',' << format_double(process.theta_star_t[i])
       << ',' << format_double(process.fisher_t[i]) << '\n';
  }
}

void write_adaptive_csv(const fs::path& path, const AdaptiveFilterOutput& out) {
  auto os = open_out(path);
  os << "t,m_star,gamma_star,theta\n";
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    os << format_double(out.grid.node(k)) << ',' << format_double(out.m_star[k])
       << ',' << format_double(out.gamma_star_adaptive[k]) << ','
       << format_double(out.theta_used[k]) << '\n';
  }
}

}  // namespace kbos
