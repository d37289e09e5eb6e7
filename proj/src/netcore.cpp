#include "dcp/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace dcp {

bool Graph::has_edge(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 2) throw std::invalid_argument("build_graph: need at least 2 nodes");
    std::set<std::pair<int, int>> dedup;
    for (auto [i, j] : edges) {
        if (i == j) throw std::invalid_argument("build_graph: self-loop at node " + std::to_string(i));
        if (i < 0 || j < 0 || i >= n || j >= n)
            throw std::invalid_argument("build_graph: edge index out of range");
        if (i > j) std::swap(i, j);
        dedup.emplace(i, j);
    }
    Graph g;
    g.n = n;
    g.edges.assign(dedup.begin(), dedup.end());
    g.neighbors.assign(n, {});
    for (auto [i, j] : g.edges) {
        g.neighbors[i].push_back(j);
        g.neighbors[j].push_back(i);
    }
    for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());

    // BFS connectivity
    std::vector<char> seen(n, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : g.neighbors[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                queue.push_back(v);
            }
    }
    g.connected = (reached == n);
    return g;
}

WeightMatrix metropolis_weights(const Graph& g) {
    if (!g.connected) throw std::invalid_argument("metropolis_weights: graph is disconnected");
    const int n = g.n;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (auto [i, j] : g.edges) {
        double deg = static_cast<double>(std::max(g.neighbors[i].size(), g.neighbors[j].size()));
        w(i, j) = w(j, i) = 1.0 / (1.0 + deg);
    }
    for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
    return WeightMatrix{w, 1e-9};
}

ValidationReport validate_weight_matrix(const Eigen::MatrixXd& w, const Graph& g, double tol) {
    ValidationReport rep;
    if (w.rows() != g.n || w.cols() != g.n) {
        rep.violations.push_back("size mismatch with graph");
        return rep;
    }
    for (int i = 0; i < g.n; ++i) {
        double rs = w.row(i).sum(), cs = w.col(i).sum();
        if (std::abs(rs - 1.0) > tol)
            rep.violations.push_back("row " + std::to_string(i) + " sums to " + std::to_string(rs));
        if (std::abs(cs - 1.0) > tol)
            rep.violations.push_back("column " + std::to_string(i) + " sums to " + std::to_string(cs));
        if (!(w(i, i) > 0.0))
            rep.violations.push_back("diagonal entry " + std::to_string(i) + " not positive");
        for (int j = 0; j < g.n; ++j) {
            if (i == j) continue;
            bool edge = g.has_edge(i, j);
            if (edge && !(w(i, j) > 0.0))
                rep.violations.push_back("w(" + std::to_string(i) + "," + std::to_string(j) +
                                         ") not positive on an edge");
            if (!edge && std::abs(w(i, j)) > tol)
                rep.violations.push_back("w(" + std::to_string(i) + "," + std::to_string(j) +
                                         ") nonzero off the graph");
        }
    }
    return rep;
}

SpectralStats spectral_stats(const WeightMatrix& wm, double tol) {
    const Eigen::MatrixXd& w = wm.w;
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + w.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("spectral_stats: weight matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral_stats: eigensolver failed");
    Eigen::VectorXd ev = es.eigenvalues();
    SpectralStats s;
    s.lambda_min = ev.minCoeff();
    s.sigma_min = ev.cwiseAbs().minCoeff();
    s.sigma_max = ev.cwiseAbs().maxCoeff();
    s.full_rank = s.sigma_min > tol;
    return s;
}

}  // namespace dcp
