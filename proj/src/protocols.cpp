#include "dcp/protocols.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dcp/rng.hpp"

namespace dcp {

bool Trajectory::append(const Eigen::MatrixXd& state) {
    if (!state.allFinite()) throw std::runtime_error("Trajectory: non-finite state");
    if (state.cwiseAbs().maxCoeff() > divergence_guard) {
        diverged = true;
        return false;
    }
    states.push_back(state);
    return true;
}

void DpParams::validate() const {
    if (!(c > 0.0)) throw std::invalid_argument("DpParams: c must be > 0");
    if (!(phi > 0.0 && phi < 1.0)) throw std::invalid_argument("DpParams: phi must be in (0,1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("DpParams: lambda must be > 0");
    if (!(psi > 0.0 && psi < 1.0)) throw std::invalid_argument("DpParams: psi must be in (0,1)");
}

Eigen::VectorXd QuadraticObjectiveSet::gradient(int i, const Eigen::VectorXd& x) const {
    return A[i].transpose() * (A[i] * x - b[i]);
}

double QuadraticObjectiveSet::value(int i, const Eigen::VectorXd& x) const {
    return 0.5 * (A[i] * x - b[i]).squaredNorm();
}

Eigen::VectorXd QuadraticObjectiveSet::joint_minimizer() const {
    const int mm = m();
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(mm, mm);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mm);
    for (int i = 0; i < n(); ++i) {
        lhs += A[i].transpose() * A[i];
        rhs += A[i].transpose() * b[i];
    }
    return lhs.ldlt().solve(rhs);
}

void QuadraticObjectiveSet::validate() const {
    if (A.empty() || A.size() != b.size())
        throw std::invalid_argument("QuadraticObjectiveSet: A/b size mismatch");
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (A[i].cols() != A[0].cols())
            throw std::invalid_argument("QuadraticObjectiveSet: inconsistent m");
        if (A[i].rows() != b[i].size())
            throw std::invalid_argument("QuadraticObjectiveSet: A_i/b_i row mismatch");
    }
}

Eigen::VectorXd stack_state(const Eigen::MatrixXd& x) {
    Eigen::VectorXd v(x.rows() * x.cols());
    for (int i = 0; i < x.rows(); ++i) v.segment(i * x.cols(), x.cols()) = x.row(i).transpose();
    return v;
}

Eigen::MatrixXd unstack_state(const Eigen::VectorXd& v, int n, int m) {
    Eigen::MatrixXd x(n, m);
    for (int i = 0; i < n; ++i) x.row(i) = v.segment(i * m, m).transpose();
    return x;
}

Eigen::MatrixXd projector_blockdiag(const LinearEquation& e) {
    const int n = e.n(), m = e.m();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n * m, n * m);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd h = e.H.row(i).transpose();
        Z.block(i * m, i * m, m, m) = h * h.transpose() / h.squaredNorm();
    }
    return Z;
}

ClosedLoopSystem closed_loop(const WeightMatrix& w, const LinearEquation& e, double alpha) {
    e.validate();
    const int n = e.n(), m = e.m();
    if (w.n() != n) throw std::invalid_argument("closed_loop: W/equation dimension mismatch");
    ClosedLoopSystem sys;
    sys.alpha = alpha;
    sys.F = Eigen::MatrixXd::Zero(n * m, n * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            sys.F.block(i * m, j * m, m, m) = w.w(i, j) * Eigen::MatrixXd::Identity(m, m);
    sys.F -= alpha * projector_blockdiag(e);
    sys.z_H.resize(n * m);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd h = e.H.row(i).transpose();
        sys.z_H.segment(i * m, m) = e.z[i] * h / h.squaredNorm();
    }
    return sys;
}

namespace {

void check_state_shape(const Eigen::MatrixXd& x0, int n, int m, const char* who) {
    if (x0.rows() != n || x0.cols() != m)
        throw std::invalid_argument(std::string(who) + ": initial state has the wrong shape");
}

std::string params_json(std::initializer_list<std::pair<const char*, double>> kv) {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (auto& [k, v] : kv) {
        if (!first) os << ",";
        first = false;
        os << "\"" << k << "\":" << v;
    }
    os << "}";
    return os.str();
}

}  // namespace

Trajectory run_average_consensus(const WeightMatrix& w, const Eigen::MatrixXd& beta, int steps) {
    const int n = w.n();
    if (beta.rows() != n) throw std::invalid_argument("run_average_consensus: beta/W mismatch");
    Trajectory traj;
    traj.n = n;
    traj.m = static_cast<int>(beta.cols());
    traj.protocol = "consensus";
    traj.params = params_json({{"steps", double(steps)}});
    traj.append(beta);
    Eigen::MatrixXd x = beta;
    for (int t = 0; t < steps; ++t) {
        x = w.w * x;
        if (!traj.append(x)) break;
    }
    return traj;
}

Trajectory run_cpa(const WeightMatrix& w, const LinearEquation& e, double alpha,
                   const Eigen::MatrixXd& x0, int steps) {
    e.validate();
    if (!(alpha > 0.0)) throw std::invalid_argument("run_cpa: alpha must be > 0");
    const int n = e.n(), m = e.m();
    if (w.n() != n) throw std::invalid_argument("run_cpa: W/equation dimension mismatch");
    check_state_shape(x0, n, m, "run_cpa");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "cpa";
    traj.params = params_json({{"alpha", alpha}, {"steps", double(steps)}});
    traj.append(x0);
    Eigen::MatrixXd x = x0;
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd next = w.w * x;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd xi = x.row(i).transpose();
            next.row(i) += alpha * (row_projection(e.H.row(i).transpose(), e.z[i], xi) - xi).transpose();
        }
        x = next;
        if (!traj.append(x)) break;
    }
    return traj;
}

Trajectory run_pca(const WeightMatrix& w, const LinearEquation& e, const Eigen::MatrixXd& x0,
                   int steps) {
    e.validate();
    const int n = e.n(), m = e.m();
    if (w.n() != n) throw std::invalid_argument("run_pca: W/equation dimension mismatch");
    check_state_shape(x0, n, m, "run_pca");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "pca";
    traj.params = params_json({{"steps", double(steps)}});
    traj.append(x0);
    Eigen::MatrixXd x = x0;
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd proj(n, m);
        for (int j = 0; j < n; ++j)
            proj.row(j) =
                row_projection(e.H.row(j).transpose(), e.z[j], x.row(j).transpose()).transpose();
        x = w.w * proj;
        if (!traj.append(x)) break;
    }
    return traj;
}

Trajectory run_dgd(const WeightMatrix& w, const QuadraticObjectiveSet& obj,
                   const Eigen::MatrixXd& x0, int steps) {
    obj.validate();
    const int n = obj.n(), m = obj.m();
    if (w.n() != n) throw std::invalid_argument("run_dgd: W/objectives dimension mismatch");
    check_state_shape(x0, n, m, "run_dgd");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "dgd";
    traj.params = params_json({{"steps", double(steps)}});
    traj.append(x0);
    Eigen::MatrixXd x = x0;
    for (int t = 0; t < steps; ++t) {
        double eps_t = 1.0 / std::sqrt(static_cast<double>(t + 1));
        Eigen::MatrixXd next = w.w * x;
        for (int i = 0; i < n; ++i)
            next.row(i) -= eps_t * obj.gradient(i, x.row(i).transpose()).transpose();
        x = next;
        if (!traj.append(x)) break;
    }
    return traj;
}

Trajectory run_dp_dles(const WeightMatrix& w, const LinearEquation& e, const DpParams& dp,
                       const Eigen::MatrixXd& x0, int steps, std::uint64_t seed) {
    e.validate();
    dp.validate();
    const int n = e.n(), m = e.m();
    if (w.n() != n) throw std::invalid_argument("run_dp_dles: W/equation dimension mismatch");
    if (dp.omega.dim() != m) throw std::invalid_argument("run_dp_dles: Omega dimension mismatch");
    check_state_shape(x0, n, m, "run_dp_dles");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "dp_dles";
    traj.seed = seed;
    {
        std::ostringstream os;
        os << "{\"c\":" << dp.c << ",\"phi\":" << dp.phi << ",\"lambda\":" << dp.lambda
           << ",\"psi\":" << dp.psi << ",\"include_self\":" << (dp.include_self ? "true" : "false")
           << ",\"steps\":" << steps << "}";
        traj.params = os.str();
    }
    // full-rank hypothesis of the DP theorem; a violation is recorded, not fatal
    SpectralStats ss = spectral_stats(w);
    if (!ss.full_rank) traj.params.insert(traj.params.size() - 1, ",\"rank_deficient_W\":true");

    Eigen::MatrixXd weights = w.w;
    if (!dp.include_self) weights.diagonal().setZero();

    Eigen::MatrixXd x = x0;
    traj.append(x);
    for (int t = 0; t < steps; ++t) {
        double noise_scale = dp.c * std::pow(dp.phi, t);
        double alpha_t = dp.lambda * std::pow(dp.psi, t);
        Eigen::MatrixXd flat(n, m), sharp(n, m);
        for (int i = 0; i < n; ++i) {
            flat.row(i) = project_onto_set(dp.omega, x.row(i).transpose()).transpose();
            Rng r = Rng::keyed(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
            for (int c = 0; c < m; ++c) sharp(i, c) = flat(i, c) + r.laplace(noise_scale);
        }
        Eigen::MatrixXd next = weights * sharp;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd fi = flat.row(i).transpose();
            next.row(i) +=
                alpha_t * (row_projection(e.H.row(i).transpose(), e.z[i], fi) - fi).transpose();
        }
        x = next;
        if (!traj.append(x)) break;
    }
    return traj;
}

Trajectory run_ppsc_les(const Graph& g, const LinearEquation& e, const PpscMechanism& mech,
                        const Eigen::MatrixXd& y0, int rounds, std::uint64_t seed,
                        int inner_consensus_steps) {
    e.validate();
    const int n = e.n(), m = e.m();
    if (g.n != n) throw std::invalid_argument("run_ppsc_les: graph/equation dimension mismatch");
    if (mech.kind == PpscMechanism::Kind::EdgeMask && mech.graph.n != n)
        throw std::invalid_argument("run_ppsc_les: mechanism graph mismatch");
    check_state_shape(y0, n, m, "run_ppsc_les");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "ppsc_les";
    traj.seed = seed;
    traj.params = params_json({{"rounds", double(rounds)}, {"inner", double(inner_consensus_steps)}});
    if (!solve_exact(e).solvable) traj.params.insert(traj.params.size() - 1, ",\"unsolvable\":true");

    Eigen::MatrixXd winner;  // only built when the truncated inner mode is on
    if (inner_consensus_steps > 0) winner = metropolis_weights(g).w;

    Eigen::MatrixXd y = y0;
    traj.append(y);
    for (int t = 0; t < rounds; ++t) {
        PpscResult masked = ppsc_apply(mech, y, mix64(seed ^ static_cast<std::uint64_t>(t)));
        Eigen::RowVectorXd ybar;
        if (inner_consensus_steps > 0) {
            Eigen::MatrixXd s = masked.beta_sharp;
            for (int k = 0; k < inner_consensus_steps; ++k) s = winner * s;
            // nodes disagree under truncation; each projects its own average estimate
            Eigen::MatrixXd next(n, m);
            for (int i = 0; i < n; ++i)
                next.row(i) =
                    row_projection(e.H.row(i).transpose(), e.z[i], s.row(i).transpose()).transpose();
            y = next;
        } else {
            ybar = masked.beta_sharp.colwise().sum() / static_cast<double>(n);
            Eigen::MatrixXd next(n, m);
            for (int i = 0; i < n; ++i)
                next.row(i) =
                    row_projection(e.H.row(i).transpose(), e.z[i], ybar.transpose()).transpose();
            y = next;
        }
        if (!traj.append(y)) break;
    }
    return traj;
}

Trajectory run_ppsc_dgd(const Graph& g, const QuadraticObjectiveSet& obj, const PpscMechanism& mech,
                        const Eigen::MatrixXd& y0, int rounds, std::uint64_t seed) {
    obj.validate();
    const int n = obj.n(), m = obj.m();
    if (g.n != n) throw std::invalid_argument("run_ppsc_dgd: graph/objectives dimension mismatch");
    check_state_shape(y0, n, m, "run_ppsc_dgd");

    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "ppsc_dgd";
    traj.seed = seed;
    traj.params = params_json({{"rounds", double(rounds)}});

    Eigen::MatrixXd y = y0;
    traj.append(y);
    for (int t = 0; t < rounds; ++t) {
        double eps_t = 1.0 / std::sqrt(static_cast<double>(t + 1));
        Eigen::MatrixXd yflat(n, m);
        for (int i = 0; i < n; ++i)
            yflat.row(i) = y.row(i) - eps_t * obj.gradient(i, y.row(i).transpose()).transpose();
        PpscResult masked = ppsc_apply(mech, yflat, mix64(seed ^ static_cast<std::uint64_t>(t)));
        Eigen::RowVectorXd ybar = masked.beta_sharp.colwise().sum() / static_cast<double>(n);
        for (int i = 0; i < n; ++i) y.row(i) = ybar;
        if (!traj.append(y)) break;
    }
    return traj;
}

}  // namespace dcp
