#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kbos/kbfilter.hpp"
#include "kbos/onestep.hpp"
#include "kbos/simulate.hpp"

namespace kbos {

// Round-trip-safe decimal text (%.17g).
std::string format_double(double v);

// Writes dir/trajectory.csv (t,X,Y) and dir/meta.json {seed, theta_true, eps,
// h, n_steps, T}.
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj);

// Reads a directory written by write_trajectory.
Trajectory read_trajectory(const std::filesystem::path& dir);

// t,m,gamma_star,D[,mdot]
void write_filter_csv(const std::filesystem::path& path, const FilterOutput& out);
// t,theta_star,fisher_cum
void write_process_csv(const std::filesystem::path& path,
                       const EstimatorProcess& process);
// t,m_star,gamma_star,theta
void write_adaptive_csv(const std::filesystem::path& path,
                        const AdaptiveFilterOutput& out);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace kbos
