#ifndef DCP_LAE_HPP
#define DCP_LAE_HPP

#include <Eigen/Dense>
#include <optional>

namespace dcp {

// Network linear-equation dataset H y = z; row i is node i's local pair
// (H_i, z_i). Every row must be nontrivial (norm above zero_tol).
struct LinearEquation {
    Eigen::MatrixXd H;  // n x m
    Eigen::VectorXd z;  // n

    int n() const { return static_cast<int>(H.rows()); }
    int m() const { return static_cast<int>(H.cols()); }

    static constexpr double zero_tol = 1e-12;
    void validate() const;  // throws on trivial rows / size mismatch
};

// Per-row representative of the equivalence class: unit-norm rows, first
// component above 1e-12 in magnitude made positive, z scaled along.
struct CanonicalEquation {
    Eigen::MatrixXd H;
    Eigen::VectorXd z;
};

// Compact convex constraint set Omega.
struct ConvexSet {
    enum class Kind { Ball, Box };
    Kind kind = Kind::Ball;
    // ball
    Eigen::VectorXd center;
    double radius = 1.0;
    // box
    Eigen::VectorXd lower, upper;

    static ConvexSet ball(Eigen::VectorXd c, double r);
    static ConvexSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);
    int dim() const;
};

struct AdjacencyResult {
    bool adjacent = false;
    int index = -1;        // differing row; -1 when the equations are row-wise equivalent
    double delta_A = 0.0;  // spectral-norm distance of the rank-one projectors
    double delta_b = 0.0;  // distance of the hyperplane offsets
};

struct ExactSolution {
    bool solvable = false;
    Eigen::VectorXd solution;  // minimum-norm least-squares point
    bool unique = false;       // rank(H) == m
    double residual = 0.0;
};

// Orthogonal projection of x onto the hyperplane {y : H_i^T y = z_i}.
Eigen::VectorXd row_projection(const Eigen::VectorXd& h_i, double z_i, const Eigen::VectorXd& x);

CanonicalEquation canonical_form(const LinearEquation& e);

bool equations_equivalent(const LinearEquation& a, const LinearEquation& b, double tol);

// Differing rows counted up to per-row equivalence; two or more differing rows
// means the pair is not adjacent.
AdjacencyResult adjacency_distance(const LinearEquation& a, const LinearEquation& b);

// Reference oracle for every solver and attack in this artifact; direct
// orthogonal factorization, never the iterative protocols.
ExactSolution solve_exact(const LinearEquation& e);

Eigen::VectorXd project_onto_set(const ConvexSet& s, const Eigen::VectorXd& x);

// sup_{v in S} ||v||; exact for balls, corner enumeration for boxes (m <= 20).
double sup_norm_bound(const ConvexSet& s);

// max-abs entrywise distance between canonical forms (helper shared by tests,
// attacks and the harness)
double canonical_distance(const CanonicalEquation& a, const CanonicalEquation& b);

}  // namespace dcp

#endif
