#ifndef DCP_IO_HPP
#define DCP_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcp/lae.hpp"
#include "dcp/netcore.hpp"
#include "dcp/ppsc.hpp"
#include "dcp/protocols.hpp"

namespace dcp {

// shortest round-trip decimal form, deterministic across runs
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& data);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// trajectory CSV: t,node,x_1..x_m
std::string trajectory_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& csv);
// canonical equation CSV: node,h_1..h_m,z
std::string canonical_csv(const CanonicalEquation& c);

nlohmann::json trajectory_meta_json(const Trajectory& traj);

// minimal line chart; series are (label, y-values) over a shared x axis
struct SvgSeries {
    std::string label;
    std::vector<double> y;
};
std::string svg_line_chart(const std::string& title, const std::vector<double>& x,
                           const std::vector<SvgSeries>& series, bool log_y = false);

// JSON readers for the external formats
Graph graph_from_json(const nlohmann::json& j);
// explicit "weights" row-major array when present, else Metropolis
WeightMatrix weights_from_json(const nlohmann::json& j, const Graph& g);
LinearEquation equation_from_json(const nlohmann::json& j);
ConvexSet convex_set_from_json(const nlohmann::json& j);
PpscMechanism mechanism_from_json(const nlohmann::json& j, const Graph& g);
QuadraticObjectiveSet objectives_from_json(const nlohmann::json& j);

nlohmann::json message_log_json(const MessageLog& log);  // payloads withheld

}  // namespace dcp

#endif
