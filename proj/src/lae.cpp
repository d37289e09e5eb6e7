#include "dcp/lae.hpp"

#include <cmath>
#include <stdexcept>

namespace dcp {

void LinearEquation::validate() const {
    if (H.rows() != z.size()) throw std::invalid_argument("LinearEquation: H rows and z size differ");
    if (H.rows() < 1 || H.cols() < 1) throw std::invalid_argument("LinearEquation: empty system");
    for (int i = 0; i < H.rows(); ++i)
        if (H.row(i).norm() <= zero_tol)
            throw std::invalid_argument("LinearEquation: trivial row " + std::to_string(i));
}

ConvexSet ConvexSet::ball(Eigen::VectorXd c, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("ConvexSet::ball: radius must be positive");
    ConvexSet s;
    s.kind = Kind::Ball;
    s.center = std::move(c);
    s.radius = r;
    return s;
}

ConvexSet ConvexSet::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("ConvexSet::box: bound sizes differ");
    for (int i = 0; i < lo.size(); ++i)
        if (lo[i] > hi[i]) throw std::invalid_argument("ConvexSet::box: lower > upper");
    ConvexSet s;
    s.kind = Kind::Box;
    s.lower = std::move(lo);
    s.upper = std::move(hi);
    return s;
}

int ConvexSet::dim() const {
    return static_cast<int>(kind == Kind::Ball ? center.size() : lower.size());
}

Eigen::VectorXd row_projection(const Eigen::VectorXd& h, double z, const Eigen::VectorXd& x) {
    double s = h.squaredNorm();
    if (s <= LinearEquation::zero_tol * LinearEquation::zero_tol)
        throw std::invalid_argument("row_projection: zero row");
    return x + h * ((z - h.dot(x)) / s);
}

namespace {

// unit-norm row with the first component exceeding 1e-12 in magnitude forced positive
void canonicalize_row(Eigen::RowVectorXd& h, double& z) {
    double nrm = h.norm();
    h /= nrm;
    z /= nrm;
    for (int k = 0; k < h.size(); ++k) {
        if (std::abs(h[k]) > 1e-12) {
            if (h[k] < 0.0) {
                h = -h;
                z = -z;
            }
            break;
        }
    }
}

}  // namespace

CanonicalEquation canonical_form(const LinearEquation& e) {
    e.validate();
    CanonicalEquation c{e.H, e.z};
    for (int i = 0; i < c.H.rows(); ++i) {
        Eigen::RowVectorXd row = c.H.row(i);
        double zi = c.z[i];
        canonicalize_row(row, zi);
        c.H.row(i) = row;
        c.z[i] = zi;
    }
    return c;
}

double canonical_distance(const CanonicalEquation& a, const CanonicalEquation& b) {
    double d = (a.H - b.H).cwiseAbs().maxCoeff();
    return std::max(d, (a.z - b.z).cwiseAbs().maxCoeff());
}

bool equations_equivalent(const LinearEquation& a, const LinearEquation& b, double tol) {
    if (a.n() != b.n() || a.m() != b.m())
        throw std::invalid_argument("equations_equivalent: dimension mismatch");
    return canonical_distance(canonical_form(a), canonical_form(b)) <= tol;
}

AdjacencyResult adjacency_distance(const LinearEquation& a, const LinearEquation& b) {
    if (a.n() != b.n() || a.m() != b.m())
        throw std::invalid_argument("adjacency_distance: dimension mismatch");
    a.validate();
    b.validate();
    CanonicalEquation ca = canonical_form(a), cb = canonical_form(b);

    AdjacencyResult res;
    int differing = 0;
    for (int i = 0; i < a.n(); ++i) {
        double d = (ca.H.row(i) - cb.H.row(i)).cwiseAbs().maxCoeff();
        d = std::max(d, std::abs(ca.z[i] - cb.z[i]));
        if (d > 1e-9) {
            ++differing;
            res.index = i;
        }
    }
    if (differing >= 2) return res;  // adjacent == false

    res.adjacent = true;
    if (differing == 0) {
        res.index = -1;
        return res;
    }
    const int i = res.index;
    Eigen::VectorXd ai = a.H.row(i).transpose(), bi = b.H.row(i).transpose();
    Eigen::MatrixXd dP = ai * ai.transpose() / ai.squaredNorm() - bi * bi.transpose() / bi.squaredNorm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dP);
    res.delta_A = es.eigenvalues().cwiseAbs().maxCoeff();
    res.delta_b = (a.z[i] * ai / ai.squaredNorm() - b.z[i] * bi / bi.squaredNorm()).norm();
    return res;
}

ExactSolution solve_exact(const LinearEquation& e) {
    e.validate();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(e.H);
    ExactSolution out;
    out.solution = cod.solve(e.z);
    out.residual = (e.H * out.solution - e.z).norm();
    out.solvable = out.residual <= 1e-8 * (1.0 + e.z.norm());
    out.unique = cod.rank() == e.m();
    return out;
}

Eigen::VectorXd project_onto_set(const ConvexSet& s, const Eigen::VectorXd& x) {
    if (s.kind == ConvexSet::Kind::Ball) {
        Eigen::VectorXd d = x - s.center;
        double n = d.norm();
        if (n <= s.radius) return x;
        return s.center + d * (s.radius / n);
    }
    return x.cwiseMax(s.lower).cwiseMin(s.upper);
}

double sup_norm_bound(const ConvexSet& s) {
    if (s.kind == ConvexSet::Kind::Ball) return s.center.norm() + s.radius;
    const int m = s.dim();
    if (m > 20) throw std::invalid_argument("sup_norm_bound: box dimension above the 2^m guard");
    double best = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
        double sq = 0.0;
        for (int k = 0; k < m; ++k) {
            double v = (mask >> k) & 1 ? s.upper[k] : s.lower[k];
            sq += v * v;
        }
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

}  // namespace dcp
