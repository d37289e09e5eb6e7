#ifndef DCP_HARNESS_HPP
#define DCP_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcp/attacks.hpp"
#include "dcp/io.hpp"
#include "dcp/protocols.hpp"

namespace dcp {

// Parsed experiment description; see README for the JSON schema.
struct ExperimentConfig {
    std::string name;
    Graph graph;
    WeightMatrix weights;
    std::optional<LinearEquation> equation;
    std::optional<QuadraticObjectiveSet> objectives;

    std::string protocol;  // consensus|cpa|pca|dgd|dp_dles|ppsc_les|ppsc_dgd
    int steps = 100;
    double alpha = 0.1;
    std::optional<DpParams> dp;
    std::optional<PpscMechanism> mechanism;
    int inner_consensus_steps = 0;  // ppsc_les truncated-averaging experiment mode

    // x0 draw: uniform entries in [x0_low, x0_high], or rows pinned to the
    // exact solution when x0_at_solution is set
    double x0_low = -5.0, x0_high = 5.0;
    bool x0_at_solution = false;

    std::optional<std::string> attack;  // global_cpa|global_pca|passive|active
    int attack_observer = 0;
    std::vector<int> attack_observed;
    // pre-recorded trajectory to attack instead of simulating (global/passive)
    std::optional<std::filesystem::path> attack_trajectory_csv;

    int trials = 1;
    std::uint64_t seed = 0;
    std::filesystem::path outputs;
    bool parallel = true;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::filesystem::path& p);
};

struct RunArtifacts {
    std::vector<std::filesystem::path> files;
    std::filesystem::path manifest;
    nlohmann::json summary;  // echo of headline numbers for callers/tests
    bool ok = true;          // false when a reproduce assertion failed
};

// Executes cfg.trials independent runs with per-trial derived seeds, writes
// trajectory CSVs, optional attack reports, summary CSV and a manifest with
// content hashes. Deterministic for a fixed config.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// One-command reproduction of the paper's numerical examples; name is
// "example2", "example3" or "example4". Assertion failures set ok = false
// and describe the mismatch in summary["failures"].
RunArtifacts reproduce(const std::string& name, const std::filesystem::path& out_dir);

// default output directory: $DCPSIM_OUT or ./out
std::filesystem::path default_output_dir();

// embedded Example 2 network dataset (also used by example 3) and Example 4
LinearEquation example2_equation();
LinearEquation example4_equation();
WeightMatrix example_weight_matrix();
Graph example_star_graph();

}  // namespace dcp

#endif
