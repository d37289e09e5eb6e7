#ifndef DCP_NETCORE_HPP
#define DCP_NETCORE_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace dcp {

// Undirected simple graph on nodes 0..n-1.
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // normalized i<j, deduplicated
    std::vector<std::vector<int>> neighbors; // sorted adjacency lists
    bool connected = false;

    bool has_edge(int i, int j) const;
};

// Doubly stochastic weight matrix complying with a graph.
struct WeightMatrix {
    Eigen::MatrixXd w;
    double tolerance = 1e-9;

    int n() const { return static_cast<int>(w.rows()); }
};

struct SpectralStats {
    double lambda_min = 0.0;  // smallest eigenvalue of symmetric W
    double sigma_min = 0.0;   // minimum |eigenvalue|
    double sigma_max = 0.0;   // maximum |eigenvalue|
    bool full_rank = false;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool valid() const { return violations.empty(); }
};

Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges);

// Metropolis rule: w_ij = 1/(1+max(deg_i,deg_j)) on edges, diagonal takes the slack.
WeightMatrix metropolis_weights(const Graph& g);

// Checks row/column stochasticity, graph sparsity pattern and positive diagonal.
// Violations are data, not errors.
ValidationReport validate_weight_matrix(const Eigen::MatrixXd& w, const Graph& g, double tol = 1e-9);

// Requires symmetric W (this artifact restricts spectral statistics to
// symmetric weight matrices); throws otherwise.
SpectralStats spectral_stats(const WeightMatrix& w, double tol = 1e-9);

}  // namespace dcp

#endif
