#ifndef DCP_ATTACKS_HPP
#define DCP_ATTACKS_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <vector>

#include "dcp/lae.hpp"
#include "dcp/netcore.hpp"
#include "dcp/protocols.hpp"

namespace dcp {

// Local eavesdropper adherent to one node: observes the states of the nodes in
// `observed` (sorted; may include the observer itself — the paper's Example 4
// eavesdropper watches its neighbor and its own state).
struct ObservationModel {
    int observer = 0;
    std::vector<int> observed;                   // sorted node indices
    std::optional<Eigen::VectorXd> known_solution;

    int output_dim(int m) const { return static_cast<int>(observed.size()) * m; }
    // E_i (x) I_m row selector as a dense matrix
    Eigen::MatrixXd selector(int n, int m) const;
    void validate(int n) const;
};

// Identified pair similar to the closed-loop matrix: T^{-1} F T = F_star,
// (E_i (x) I_m) T = C_star.
struct Realization {
    Eigen::MatrixXd F_star;
    Eigen::MatrixXd C_star;
    // diagnostics
    double condition_number = 0.0;  // passive: cond(S Ylow); active: sv gap ratio
    double sv_gap = 0.0;            // active: sigma_nm / sigma_nm+1
    bool rank_ambiguous = false;    // active: gap below 10
};

// T-periodic probe; R is the mT x mT block circulant with blocks diag(r(u)),
// invertible exactly when every component sequence has a zero-free DFT.
struct ProbeSignal {
    int period = 0;                // T = 2nm+1
    Eigen::MatrixXd samples;       // T x m
    Eigen::MatrixXd circulant;     // mT x mT
    double condition_number = 0.0;
};

enum class RowMethod { ConditionA, ConditionB, Failed };

struct RecoveredEquation {
    CanonicalEquation equation;            // failed rows left zero
    std::vector<RowMethod> per_node_method;
    Eigen::VectorXd per_node_residual;     // |Hhat_i . y - zhat_i| at the held-out point
    double residual = 0.0;                 // max over non-failed rows
    bool all_recovered() const;
};

struct RecoverabilityEntry {
    std::optional<int> condition_a_time;  // first t with a nonzero projection correction
    int condition_b_rank = 0;             // number of affinely independent states
    bool recoverable = false;
};

struct StabilityMargin {
    double rho = 0.0;
    bool stable = false;
    double alpha_bound = 0.0;  // lambda_min(W) + 1
};

struct VectorizedSystem {
    Eigen::SparseMatrix<double> matrix;   // (n^2m^2 + nm*q) x (2 n^2m^2)
    Eigen::VectorXd rhs;
    Eigen::VectorXd min_norm_solution;
    double residual = 0.0;                // ||A x - rhs|| at the min-norm solution
    int rank_deficiency = 0;              // solution-space dimension
};

struct RecoveryOptions {
    int max_iter = 400;
    double tol = 1e-8;
    int restarts = 1;
    std::uint64_t seed = 0;
};

struct RecoveryIterate {
    double objective = 0.0;
    Eigen::MatrixXd H;  // unit rows
};

struct RecoveryResult {
    CanonicalEquation equation;   // canonical (H_hat | z_hat) with z_hat = H_hat y*
    Eigen::MatrixXd H_unit;       // recovered unit rows before canonical sign fix
    double objective = 0.0;
    bool converged = false;
    std::vector<RecoveryIterate> history;  // best restart's iterates
};

// Appendix B Lemma conditions per node, for CPA trajectories.
std::vector<RecoverabilityEntry> recoverability_report(const Trajectory& traj,
                                                       const WeightMatrix& w, double alpha);

// Global eavesdropper reconstruction along CPA (Appendix B): condition (a) rows
// from the projection-correction direction, condition (b) rows from the kernel
// of consecutive state differences.
RecoveredEquation global_attack_cpa(const Trajectory& traj, const WeightMatrix& w, double alpha);

// The paper's printed PCA relation (its consistency with the PCA recursion is
// an open question); the validation residual is always reported.
RecoveredEquation global_attack_pca(const Trajectory& traj, const WeightMatrix& w);

// Budin-style passive identification from observed outputs at the given times
// (exactly nm of them needed). W and alpha are part of the eavesdropper's
// public knowledge per Theorem 2; identification itself consumes outputs only.
Realization passive_identify(const ObservationModel& obs, const Trajectory& traj,
                             const WeightMatrix& w, double alpha, const std::vector<int>& times);

ProbeSignal make_probe(int n, int m, std::uint64_t seed, double cond_threshold = 1e6);

// builds the block circulant for given samples (exposed for tests)
Eigen::MatrixXd probe_circulant(const Eigen::MatrixXd& samples);

// McKelvey-style active identification: m sub-experiments inject the probe's
// components at the observer node, steady-state periodic outputs give the
// folded impulse responses, Hankel SVD gives the realization.
// settle_periods > 0 discards exactly that many periods; 0 = auto mode
// (stop when consecutive period outputs differ by < 1e-9).
Realization active_identify(const ObservationModel& obs, const WeightMatrix& w,
                            const LinearEquation& e, double alpha, const ProbeSignal& probe,
                            int settle_periods, std::uint64_t seed);

StabilityMargin stability_margin(const WeightMatrix& w, const LinearEquation& e, double alpha);

VectorizedSystem build_vectorized_system(const Realization& real, const WeightMatrix& w,
                                         double alpha, const ObservationModel& obs);

// Damped Gauss-Newton over unit-sphere row directions and the free block of T;
// the observed block of T is pinned to C_star. Multi-start from init_H plus
// seeded random perturbations.
RecoveryResult recover_equation(const Realization& real, const WeightMatrix& w, double alpha,
                                const ObservationModel& obs, const Eigen::VectorXd& y_star,
                                const Eigen::MatrixXd& init_H, const RecoveryOptions& opt);

// sorted complex eigenvalues (by real part, then imaginary), shared helper
std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& a);
double max_eigenvalue_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace dcp

#endif
