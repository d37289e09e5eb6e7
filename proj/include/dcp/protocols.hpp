#ifndef DCP_PROTOCOLS_HPP
#define DCP_PROTOCOLS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dcp/lae.hpp"
#include "dcp/netcore.hpp"
#include "dcp/ppsc.hpp"

namespace dcp {

// Node-state sequence x(0..T); states[t] is n x m with row i = x_i(t)^T.
struct Trajectory {
    int n = 0;
    int m = 0;
    std::vector<Eigen::MatrixXd> states;

    std::string protocol;
    std::string params;  // compact JSON echo of the run parameters
    std::uint64_t seed = 0;
    bool diverged = false;

    int steps() const { return static_cast<int>(states.size()) - 1; }
    const Eigen::MatrixXd& at(int t) const { return states.at(static_cast<std::size_t>(t)); }
    const Eigen::MatrixXd& last() const { return states.back(); }
    Eigen::VectorXd node_state(int t, int i) const { return at(t).row(i).transpose(); }
    Eigen::VectorXd mean_state(int t) const {
        return at(t).colwise().sum().transpose() / static_cast<double>(n);
    }

    // NaN/Inf are rejected; norms above the divergence guard abort the run
    // with the diverged flag set.
    static constexpr double divergence_guard = 1e12;
    bool append(const Eigen::MatrixXd& state);
};

// DP-DLES parameters: Laplace scale c*phi^t, step lambda*psi^t, constraint set Omega.
struct DpParams {
    double c = 1.0;
    double phi = 0.9;
    double lambda = 0.5;
    double psi = 0.45;
    ConvexSet omega;
    bool include_self = true;  // step 5 neighbor sum: include the w_ii term

    void validate() const;
};

// Per-node quadratic objectives f_i(x) = 0.5 ||A_i x - b_i||^2.
struct QuadraticObjectiveSet {
    std::vector<Eigen::MatrixXd> A;  // p_i x m
    std::vector<Eigen::VectorXd> b;  // p_i

    int n() const { return static_cast<int>(A.size()); }
    int m() const { return A.empty() ? 0 : static_cast<int>(A[0].cols()); }
    Eigen::VectorXd gradient(int i, const Eigen::VectorXd& x) const;
    double value(int i, const Eigen::VectorXd& x) const;
    // argmin of sum_i f_i via the normal equations; the oracle for DGD tests
    Eigen::VectorXd joint_minimizer() const;
    void validate() const;
};

// x(t+1) = F x(t) + alpha z_H with F = W (x) I_m - alpha Z_H.
struct ClosedLoopSystem {
    Eigen::MatrixXd F;      // nm x nm
    Eigen::VectorXd z_H;    // nm
    double alpha = 0.0;

    Eigen::VectorXd step(const Eigen::VectorXd& x) const { return F * x + alpha * z_H; }
};

Trajectory run_average_consensus(const WeightMatrix& w, const Eigen::MatrixXd& beta, int steps);

Trajectory run_cpa(const WeightMatrix& w, const LinearEquation& e, double alpha,
                   const Eigen::MatrixXd& x0, int steps);

Trajectory run_pca(const WeightMatrix& w, const LinearEquation& e, const Eigen::MatrixXd& x0,
                   int steps);

// distributed gradient descent with epsilon_t = 1/sqrt(t+1)
Trajectory run_dgd(const WeightMatrix& w, const QuadraticObjectiveSet& obj,
                   const Eigen::MatrixXd& x0, int steps);

Trajectory run_dp_dles(const WeightMatrix& w, const LinearEquation& e, const DpParams& dp,
                       const Eigen::MatrixXd& x0, int steps, std::uint64_t seed);

// Privacy-preserving linear-equation solver: beta# = mech(y(t)); exact average
// of the masked values; y_i(t+1) = P_i(ybar). inner_consensus_steps > 0
// replaces the exact average with that many averaging sweeps (experimental,
// default off).
Trajectory run_ppsc_les(const Graph& g, const LinearEquation& e, const PpscMechanism& mech,
                        const Eigen::MatrixXd& y0, int rounds, std::uint64_t seed,
                        int inner_consensus_steps = 0);

Trajectory run_ppsc_dgd(const Graph& g, const QuadraticObjectiveSet& obj, const PpscMechanism& mech,
                        const Eigen::MatrixXd& y0, int rounds, std::uint64_t seed);

ClosedLoopSystem closed_loop(const WeightMatrix& w, const LinearEquation& e, double alpha);

// block-diagonal of the rank-one row projectors H_i H_i^T / (H_i^T H_i)
Eigen::MatrixXd projector_blockdiag(const LinearEquation& e);

// row-major flatten/unflatten between n x m states and stacked nm vectors
Eigen::VectorXd stack_state(const Eigen::MatrixXd& x);
Eigen::MatrixXd unstack_state(const Eigen::VectorXd& v, int n, int m);

}  // namespace dcp

#endif
