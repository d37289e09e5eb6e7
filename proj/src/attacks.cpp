#include "dcp/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "dcp/rng.hpp"
#include "dcp/trial_pool.hpp"

namespace dcp {

void ObservationModel::validate(int n) const {
    if (observer < 0 || observer >= n) throw std::invalid_argument("ObservationModel: observer out of range");
    if (observed.empty()) throw std::invalid_argument("ObservationModel: empty observed set");
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (observed[k] < 0 || observed[k] >= n)
            throw std::invalid_argument("ObservationModel: observed node out of range");
        if (k > 0 && observed[k] <= observed[k - 1])
            throw std::invalid_argument("ObservationModel: observed list must be strictly increasing");
    }
}

Eigen::MatrixXd ObservationModel::selector(int n, int m) const {
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(output_dim(m), n * m);
    for (std::size_t k = 0; k < observed.size(); ++k)
        sel.block(static_cast<int>(k) * m, observed[k] * m, m, m) =
            Eigen::MatrixXd::Identity(m, m);
    return sel;
}

bool RecoveredEquation::all_recovered() const {
    for (RowMethod mth : per_node_method)
        if (mth == RowMethod::Failed) return false;
    return true;
}

std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    std::vector<std::complex<double>> ev(static_cast<std::size_t>(a.rows()));
    for (int i = 0; i < a.rows(); ++i) ev[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
    std::sort(ev.begin(), ev.end(), [](auto x, auto y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return ev;
}

double max_eigenvalue_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    auto ea = sorted_eigenvalues(a), eb = sorted_eigenvalues(b);
    if (ea.size() != eb.size()) throw std::invalid_argument("max_eigenvalue_distance: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < ea.size(); ++i) d = std::max(d, std::abs(ea[i] - eb[i]));
    return d;
}

namespace {

double zero_tol(const Eigen::VectorXd& x) { return 1e-9 * (1.0 + x.norm()); }

// rank of the consecutive-difference matrix, with a tolerance scaled to the
// trajectory magnitude; +1 gives the count of affinely independent states
int affine_independent_count(const Trajectory& traj, int node) {
    const int T = traj.steps();
    if (T < 1) return 1;
    Eigen::MatrixXd diffs(T, traj.m);
    double scale = 0.0;
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd d = traj.node_state(t + 1, node) - traj.node_state(t, node);
        diffs.row(t) = d.transpose();
        scale = std::max(scale, traj.node_state(t, node).norm());
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs);
    double thr = 1e-9 * (1.0 + scale);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > thr) ++rank;
    return rank + 1;
}

}  // namespace

std::vector<RecoverabilityEntry> recoverability_report(const Trajectory& traj,
                                                       const WeightMatrix& w, double /*alpha*/) {
    if (traj.steps() < 1) throw std::invalid_argument("recoverability_report: trajectory too short");
    const int n = traj.n, m = traj.m;
    if (w.n() != n) throw std::invalid_argument("recoverability_report: W mismatch");

    std::vector<RecoverabilityEntry> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        RecoverabilityEntry& ent = out[static_cast<std::size_t>(i)];
        for (int t = 0; t < traj.steps(); ++t) {
            Eigen::VectorXd mixed = Eigen::VectorXd::Zero(m);
            for (int j = 0; j < n; ++j) mixed += w.w(i, j) * traj.node_state(t, j);
            Eigen::VectorXd d = traj.node_state(t + 1, i) - mixed;
            if (d.norm() > zero_tol(traj.node_state(t, i))) {
                ent.condition_a_time = t;
                break;
            }
        }
        ent.condition_b_rank = affine_independent_count(traj, i);
        ent.recoverable = ent.condition_a_time.has_value() || ent.condition_b_rank >= m;
    }
    return out;
}

namespace {

// shared skeleton of the two global attacks; `alpha` < 0 selects the PCA
// variant of the z-hat formula
RecoveredEquation global_attack_impl(const Trajectory& traj, const WeightMatrix& w, double alpha,
                                     bool pca) {
    if (traj.steps() < 1) throw std::invalid_argument("global_attack: trajectory too short");
    const int n = traj.n, m = traj.m;
    if (w.n() != n) throw std::invalid_argument("global_attack: W mismatch");

    RecoveredEquation rec;
    rec.equation.H = Eigen::MatrixXd::Zero(n, m);
    rec.equation.z = Eigen::VectorXd::Zero(n);
    rec.per_node_method.assign(static_cast<std::size_t>(n), RowMethod::Failed);
    rec.per_node_residual = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());

    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd h_hat = Eigen::VectorXd::Zero(m);
        double z_hat = 0.0;
        bool got = false;

        // condition (a): first step with a nonzero projection correction
        for (int t = 0; t < traj.steps(); ++t) {
            Eigen::VectorXd mixed = Eigen::VectorXd::Zero(m);
            for (int j = 0; j < n; ++j) mixed += w.w(i, j) * traj.node_state(t, j);
            Eigen::VectorXd d = traj.node_state(t + 1, i) - mixed;
            if (d.norm() > zero_tol(traj.node_state(t, i))) {
                h_hat = d;
                if (pca) {
                    // alpha = 1 analogue of the CPA relation (Appendix B part ii)
                    z_hat = d.dot(mixed) + d.squaredNorm();
                } else {
                    z_hat = d.dot(traj.node_state(t, i)) + d.squaredNorm() / alpha;
                }
                got = true;
                rec.per_node_method[static_cast<std::size_t>(i)] = RowMethod::ConditionA;
                break;
            }
        }

        // condition (b): H_i from the one-dimensional kernel of the differences
        if (!got && affine_independent_count(traj, i) >= m) {
            const int T = traj.steps();
            Eigen::MatrixXd diffs(T, m);
            for (int t = 0; t < T; ++t)
                diffs.row(t) = (traj.node_state(t + 1, i) - traj.node_state(t, i)).transpose();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeFullV);
            h_hat = svd.matrixV().col(m - 1);
            z_hat = h_hat.dot(traj.node_state(0, i));
            got = true;
            rec.per_node_method[static_cast<std::size_t>(i)] = RowMethod::ConditionB;
        }

        if (got) {
            double nrm = h_hat.norm();
            Eigen::VectorXd hc = h_hat / nrm;
            double zc = z_hat / nrm;
            for (int k = 0; k < m; ++k) {
                if (std::abs(hc[k]) > 1e-12) {
                    if (hc[k] < 0.0) {
                        hc = -hc;
                        zc = -zc;
                    }
                    break;
                }
            }
            rec.equation.H.row(i) = hc.transpose();
            rec.equation.z[i] = zc;
            // validation against the held-out final state of node i
            rec.per_node_residual[i] = std::abs(hc.dot(traj.node_state(traj.steps(), i)) - zc);
            rec.residual = std::max(rec.residual, rec.per_node_residual[i]);
        }
    }
    return rec;
}

}  // namespace

RecoveredEquation global_attack_cpa(const Trajectory& traj, const WeightMatrix& w, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("global_attack_cpa: alpha must be > 0");
    return global_attack_impl(traj, w, alpha, /*pca=*/false);
}

RecoveredEquation global_attack_pca(const Trajectory& traj, const WeightMatrix& w) {
    return global_attack_impl(traj, w, 1.0, /*pca=*/true);
}

// ---------------------------------------------------------------------------
// passive identification (Appendix D / Budin)

namespace {

// Greedy row selection: keep the forced prefix, then repeatedly add the row
// maximizing the smallest singular value of the selection.
std::vector<int> pivoted_rows(const Eigen::MatrixXd& Y, int forced, int want) {
    std::vector<int> chosen;
    for (int r = 0; r < forced; ++r) chosen.push_back(r);
    std::vector<int> remaining;
    for (int r = forced; r < Y.rows(); ++r) remaining.push_back(r);

    while (static_cast<int>(chosen.size()) < want) {
        int best = -1;
        double best_sv = -1.0;
        Eigen::MatrixXd cur(static_cast<int>(chosen.size()) + 1, Y.cols());
        for (std::size_t k = 0; k < chosen.size(); ++k) cur.row(static_cast<int>(k)) = Y.row(chosen[k]);
        for (int r : remaining) {
            cur.row(cur.rows() - 1) = Y.row(r);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(cur);
            double sv = svd.singularValues().minCoeff();
            if (sv > best_sv) {
                best_sv = sv;
                best = r;
            }
        }
        chosen.push_back(best);
        remaining.erase(std::find(remaining.begin(), remaining.end(), best));
    }
    return chosen;
}

}  // namespace

Realization passive_identify(const ObservationModel& obs, const Trajectory& traj,
                             const WeightMatrix& w, double /*alpha*/,
                             const std::vector<int>& times) {
    const int n = traj.n, m = traj.m;
    obs.validate(n);
    if (!obs.known_solution)
        throw std::invalid_argument("passive_identify: known_solution required (Theorem 2 context)");
    if (w.n() != n) throw std::invalid_argument("passive_identify: W mismatch");
    const int nm = n * m;
    const int q = obs.output_dim(m);
    if (static_cast<int>(times.size()) < nm)
        throw std::invalid_argument("passive_identify: too few observation times (need nm)");

    const int p = (nm + q - 1) / q + 1;  // block rows; p*q >= nm + q
    int t_need = 0;
    for (int k = 0; k < nm; ++k) t_need = std::max(t_need, times[static_cast<std::size_t>(k)] + p);
    if (t_need > traj.steps())
        throw std::invalid_argument("passive_identify: trajectory shorter than t_k + p");

    const Eigen::VectorXd& ystar = *obs.known_solution;
    auto output = [&](int t) {
        Eigen::VectorXd y(q);
        for (std::size_t k = 0; k < obs.observed.size(); ++k)
            y.segment(static_cast<int>(k) * m, m) = traj.node_state(t, obs.observed[k]) - ystar;
        return y;
    };

    Eigen::MatrixXd Ylow(p * q, nm), Yup(p * q, nm);
    for (int k = 0; k < nm; ++k) {
        for (int r = 0; r < p; ++r) {
            Ylow.block(r * q, k, q, 1) = output(times[static_cast<std::size_t>(k)] + r);
            Yup.block(r * q, k, q, 1) = output(times[static_cast<std::size_t>(k)] + r + 1);
        }
    }
    // column equilibration: invariant for F* (right-multiplication cancels)
    for (int k = 0; k < nm; ++k) {
        double s = Ylow.col(k).norm();
        if (s > 0) {
            Ylow.col(k) /= s;
            Yup.col(k) /= s;
        }
    }

    // the first q selected rows must be Ylow's first block row so that
    // C* = (block row 0) (S Ylow)^{-1} = [I 0]
    std::vector<int> rows = pivoted_rows(Ylow, q, nm);
    Eigen::MatrixXd SYl(nm, nm), SYu(nm, nm);
    for (int k = 0; k < nm; ++k) {
        SYl.row(k) = Ylow.row(rows[static_cast<std::size_t>(k)]);
        SYu.row(k) = Yup.row(rows[static_cast<std::size_t>(k)]);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(SYl);
    double cond = svd.singularValues()(0) / svd.singularValues()(nm - 1);
    if (!(cond < 1e10))
        throw std::runtime_error("passive_identify: identification failed (S*Ylow numerically singular)");

    Realization real;
    real.condition_number = cond;
    // F* = S Yup (S Ylow)^{-1}, solved as (S Ylow)^T X^T = (S Yup)^T
    real.F_star = SYl.transpose().partialPivLu().solve(SYu.transpose()).transpose();
    real.C_star = Eigen::MatrixXd::Zero(q, nm);
    real.C_star.leftCols(q) = Eigen::MatrixXd::Identity(q, q);
    return real;
}

// ---------------------------------------------------------------------------
// active identification (Appendix E / McKelvey)

Eigen::MatrixXd probe_circulant(const Eigen::MatrixXd& samples) {
    const int T = static_cast<int>(samples.rows());
    const int m = static_cast<int>(samples.cols());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m * T, m * T);
    for (int s = 0; s < T; ++s)
        for (int l = 0; l < T; ++l) {
            int u = ((l - s) % T + T) % T;
            for (int c = 0; c < m; ++c) R(s * m + c, l * m + c) = samples(u, c);
        }
    return R;
}

ProbeSignal make_probe(int n, int m, std::uint64_t seed, double cond_threshold) {
    const int T = 2 * n * m + 1;
    Rng r = Rng::keyed(seed, 0x9c0beULL);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::MatrixXd samples(T, m);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < m; ++c) samples(t, c) = r.uniform(-1.0, 1.0);
        Eigen::MatrixXd R = probe_circulant(samples);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
        double smin = svd.singularValues().minCoeff();
        double cond = smin > 0 ? svd.singularValues()(0) / smin : std::numeric_limits<double>::infinity();
        if (cond < cond_threshold) {
            ProbeSignal p;
            p.period = T;
            p.samples = samples;
            p.circulant = R;
            p.condition_number = cond;
            return p;
        }
    }
    throw std::runtime_error("make_probe: condition threshold not met after 100 resamples");
}

Realization active_identify(const ObservationModel& obs, const WeightMatrix& w,
                            const LinearEquation& e, double alpha, const ProbeSignal& probe,
                            int settle_periods, std::uint64_t seed) {
    e.validate();
    const int n = e.n(), m = e.m();
    obs.validate(n);
    const int nm = n * m;
    const int q_out = obs.output_dim(m);
    const int T = probe.period;
    if (T != 2 * nm + 1) throw std::invalid_argument("active_identify: probe period must be 2nm+1");

    StabilityMargin sm = stability_margin(w, e, alpha);
    if (sm.rho >= 1.0 - 1e-9)
        throw std::invalid_argument("active_identify: closed loop is not stable (rho >= 1 - 1e-9)");

    ClosedLoopSystem sys = closed_loop(w, e, alpha);
    Eigen::MatrixXd sel = obs.selector(n, m);

    // one sub-experiment per input channel: inject component e of the probe at
    // the observer's state block, collect one steady-state period
    Eigen::MatrixXd Y(q_out, m * T);
    const int max_periods = 200000;
    for (int ch = 0; ch < m; ++ch) {
        Eigen::VectorXd gamma(nm);
        Rng r = Rng::keyed(seed, 0xac71eULL, static_cast<std::uint64_t>(ch));
        for (int i = 0; i < nm; ++i) gamma[i] = r.uniform(-1.0, 1.0);

        Eigen::MatrixXd period_out(q_out, T), prev_out(q_out, T);
        bool have_prev = false;
        long step = 0;
        for (int k = 0; k < max_periods; ++k) {
            for (int l = 0; l < T; ++l) {
                period_out.col(l) = sel * gamma;
                Eigen::VectorXd inj = Eigen::VectorXd::Zero(nm);
                inj[obs.observer * m + ch] = probe.samples(static_cast<int>(step % T), ch);
                gamma = sys.F * gamma + inj;
                ++step;
            }
            if (settle_periods > 0) {
                if (k >= settle_periods) break;
            } else if (have_prev && (period_out - prev_out).norm() < 1e-9) {
                break;
            }
            prev_out = period_out;
            have_prev = true;
            if (k == max_periods - 1)
                throw std::runtime_error("active_identify: steady state not reached");
        }
        for (int l = 0; l < T; ++l) Y.col(l * m + ch) = period_out.col(l);
    }

    // folded impulse responses: [G0^ ... G(T-1)^] = Y R^{-1}
    Eigen::MatrixXd Ghat = probe.circulant.transpose()
                               .partialPivLu()
                               .solve(Y.transpose())
                               .transpose();

    // Hankel of blocks 1..p+q-1 with p = nm+1, q = T-p
    const int p = nm + 1, qq = T - p;
    Eigen::MatrixXd M(p * q_out, qq * m);
    for (int rr = 0; rr < p; ++rr)
        for (int cc = 0; cc < qq; ++cc)
            M.block(rr * q_out, cc * m, q_out, m) = Ghat.middleCols((rr + cc + 1) * m, m);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
    Realization real;
    real.sv_gap = svd.singularValues()(nm - 1) / svd.singularValues()(nm);
    real.rank_ambiguous = real.sv_gap < 10.0;
    real.condition_number = real.sv_gap;
    Eigen::MatrixXd Us = svd.matrixU().leftCols(nm);
    Eigen::MatrixXd up = Us.topRows((p - 1) * q_out);
    Eigen::MatrixXd down = Us.bottomRows((p - 1) * q_out);
    real.F_star = up.completeOrthogonalDecomposition().solve(down);
    real.C_star = Us.topRows(q_out);
    return real;
}

StabilityMargin stability_margin(const WeightMatrix& w, const LinearEquation& e, double alpha) {
    e.validate();
    ClosedLoopSystem sys = closed_loop(w, e, alpha);
    // F is symmetric for symmetric W
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.F);
    StabilityMargin sm;
    sm.rho = es.eigenvalues().cwiseAbs().maxCoeff();
    sm.stable = sm.rho < 1.0 - 1e-9;
    sm.alpha_bound = spectral_stats(w).lambda_min + 1.0;
    return sm;
}

// ---------------------------------------------------------------------------
// vectorized similarity system (r100)

VectorizedSystem build_vectorized_system(const Realization& real, const WeightMatrix& w,
                                         double alpha, const ObservationModel& obs) {
    const int nm = static_cast<int>(real.F_star.rows());
    const int n = w.n();
    const int m = nm / n;
    obs.validate(n);
    const int q = obs.output_dim(m);
    if (real.C_star.rows() != q || real.C_star.cols() != nm)
        throw std::invalid_argument("build_vectorized_system: C_star shape mismatch");

    const int nm2 = nm * nm;
    Eigen::MatrixXd WI = Eigen::MatrixXd::Zero(nm, nm);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            WI.block(i * m, j * m, m, m) = w.w(i, j) * Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd sel = obs.selector(n, m);

    // column-major vec; S* = I (x) (W (x) I_m) - F*^T (x) I
    std::vector<Eigen::Triplet<double>> trip;
    auto emit = [&](int r, int c, double v) {
        if (v != 0.0) trip.emplace_back(r, c, v);
    };
    // top block rows: S* vec(T) - alpha vec(Q) = 0
    for (int bc = 0; bc < nm; ++bc) {          // column of T
        for (int i = 0; i < nm; ++i) {
            int row = bc * nm + i;
            for (int k = 0; k < nm; ++k) emit(row, bc * nm + k, WI(i, k));      // (I (x) WI)
            for (int k = 0; k < nm; ++k) emit(row, k * nm + i, -real.F_star(k, bc));  // -(F*^T (x) I)
            emit(row, nm2 + bc * nm + i, -alpha);  // -alpha vec(Q)
        }
    }
    // bottom block rows: (I (x) (E_i (x) I_m)) vec(T) = vec(C*)
    for (int bc = 0; bc < nm; ++bc)
        for (int r = 0; r < q; ++r) {
            int row = nm2 + bc * q + r;
            for (int k = 0; k < nm; ++k) emit(row, bc * nm + k, sel(r, k));
        }

    VectorizedSystem out;
    out.matrix.resize(nm2 + nm * q, 2 * nm2);
    out.matrix.setFromTriplets(trip.begin(), trip.end());
    out.rhs = Eigen::VectorXd::Zero(nm2 + nm * q);
    for (int bc = 0; bc < nm; ++bc)
        for (int r = 0; r < q; ++r) out.rhs[nm2 + bc * q + r] = real.C_star(r, bc);

    Eigen::MatrixXd dense(out.matrix);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(dense);
    out.min_norm_solution = cod.solve(out.rhs);
    out.rank_deficiency = static_cast<int>(dense.cols()) - static_cast<int>(cod.rank());
    out.residual = (dense * out.min_norm_solution - out.rhs).norm();
    return out;
}

// ---------------------------------------------------------------------------
// local equation recovery (eq:local_optimization)

namespace {

struct GnProblem {
    int n, m, nm, q;
    Eigen::MatrixXd WI;       // W (x) I_m
    Eigen::MatrixXd A_star;   // nm x nm
    Eigen::MatrixXd C_star;   // q x nm
    std::vector<int> obs_rows, free_rows;

    Eigen::MatrixXd make_T(const Eigen::VectorXd& tf) const {
        Eigen::MatrixXd T(nm, nm);
        for (std::size_t k = 0; k < obs_rows.size(); ++k)
            T.row(obs_rows[k]) = C_star.row(static_cast<int>(k));
        for (std::size_t k = 0; k < free_rows.size(); ++k)
            T.row(free_rows[k]) = tf.segment(static_cast<int>(k) * nm, nm).transpose();
        return T;
    }

    Eigen::MatrixXd F_of(const Eigen::MatrixXd& Hu) const {
        Eigen::MatrixXd F = WI;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd h = Hu.row(i).transpose();
            F.block(i * m, i * m, m, m) -= alpha * (h * h.transpose());
        }
        return F;
    }

    double alpha = 0.0;

    Eigen::VectorXd residual(const Eigen::MatrixXd& Hu, const Eigen::MatrixXd& T) const {
        Eigen::MatrixXd R = F_of(Hu) * T - T * A_star;
        return Eigen::Map<const Eigen::VectorXd>(R.data(), R.size());
    }
};

// orthonormal basis of the tangent space at unit vector h
Eigen::MatrixXd tangent_basis(const Eigen::VectorXd& h) {
    const int m = static_cast<int>(h.size());
    Eigen::MatrixXd M(m, m);
    M.col(0) = h;
    // complete with householder-ish Gram-Schmidt against coordinate axes
    int used = 1;
    for (int k = 0; k < m && used < m; ++k) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(m, k);
        for (int c = 0; c < used; ++c) v -= M.col(c).dot(v) * M.col(c);
        double nv = v.norm();
        if (nv > 1e-8) M.col(used++) = v / nv;
    }
    return M.rightCols(m - 1);
}

struct GnState {
    Eigen::MatrixXd Hu;   // n x m unit rows
    Eigen::VectorXd tf;   // free block of T, row-major
    double objective = 0.0;
};

// one damped Gauss-Newton (Levenberg) descent from the given start
GnState gn_descend(const GnProblem& prob, GnState st, int max_iter, double stop_obj,
                   std::vector<RecoveryIterate>* history) {
    const int n = prob.n, m = prob.m, nm = prob.nm;
    const int ntan = n * (m - 1);
    const int nfree = static_cast<int>(prob.free_rows.size()) * nm;
    const int npar = ntan + nfree;

    Eigen::MatrixXd T = prob.make_T(st.tf);
    Eigen::VectorXd r = prob.residual(st.Hu, T);
    st.objective = r.squaredNorm();
    if (history) history->push_back({st.objective, st.Hu});

    double lam = 1e-3;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd F = prob.F_of(st.Hu);
        Eigen::MatrixXd J(nm * nm, npar);
        // sphere-tangent columns: dZ_i = q h^T + h q^T propagated through -alpha dZ T
        std::vector<Eigen::MatrixXd> bases(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd h = st.Hu.row(i).transpose();
            Eigen::MatrixXd Q = tangent_basis(h);
            bases[static_cast<std::size_t>(i)] = Q;
            for (int c = 0; c < m - 1; ++c) {
                Eigen::VectorXd qv = Q.col(c);
                Eigen::MatrixXd dF = Eigen::MatrixXd::Zero(nm, nm);
                dF.block(i * m, i * m, m, m) =
                    -prob.alpha * (qv * h.transpose() + h * qv.transpose());
                Eigen::MatrixXd dR = dF * T;
                J.col(i * (m - 1) + c) = Eigen::Map<const Eigen::VectorXd>(dR.data(), dR.size());
            }
        }
        // free-T columns: d(F T)/dT[k,:] adds F col k outer; d(-T A*)/dT[k,j] subtracts A* row j
        for (std::size_t kf = 0; kf < prob.free_rows.size(); ++kf) {
            int k = prob.free_rows[kf];
            for (int j = 0; j < nm; ++j) {
                Eigen::MatrixXd dR = Eigen::MatrixXd::Zero(nm, nm);
                dR.col(j) += F.col(k);
                dR.row(k) -= prob.A_star.row(j);
                J.col(ntan + static_cast<int>(kf) * nm + j) =
                    Eigen::Map<const Eigen::VectorXd>(dR.data(), dR.size());
            }
        }

        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd Aq = JtJ;
            Aq.diagonal().array() += lam;
            Eigen::VectorXd d = Aq.ldlt().solve(-g);

            GnState cand = st;
            for (int i = 0; i < n; ++i) {
                Eigen::VectorXd h = st.Hu.row(i).transpose();
                Eigen::VectorXd delta = bases[static_cast<std::size_t>(i)] *
                                        d.segment(i * (m - 1), m - 1);
                Eigen::VectorXd hn = h + delta;
                cand.Hu.row(i) = (hn / hn.norm()).transpose();  // retraction
            }
            cand.tf = st.tf + d.tail(nfree);
            Eigen::MatrixXd Tc = prob.make_T(cand.tf);
            Eigen::VectorXd rc = prob.residual(cand.Hu, Tc);
            cand.objective = rc.squaredNorm();
            if (cand.objective < st.objective) {
                st = cand;
                T = Tc;
                r = rc;
                lam = std::max(lam * 0.3, 1e-14);
                stepped = true;
                break;
            }
            lam *= 10.0;
            if (lam > 1e14) break;
        }
        if (history) history->push_back({st.objective, st.Hu});
        if (!stepped) break;          // stagnation: no improving damped step
        if (st.objective < stop_obj) break;
    }
    return st;
}

}  // namespace

RecoveryResult recover_equation(const Realization& real, const WeightMatrix& w, double alpha,
                                const ObservationModel& obs, const Eigen::VectorXd& y_star,
                                const Eigen::MatrixXd& init_H, const RecoveryOptions& opt) {
    const int n = w.n();
    const int nm = static_cast<int>(real.F_star.rows());
    const int m = nm / n;
    obs.validate(n);
    if (init_H.rows() != n || init_H.cols() != m)
        throw std::invalid_argument("recover_equation: init_H shape mismatch");
    for (int i = 0; i < n; ++i)
        if (init_H.row(i).norm() <= LinearEquation::zero_tol)
            throw std::invalid_argument("recover_equation: trivial init_H row");

    GnProblem prob;
    prob.n = n;
    prob.m = m;
    prob.nm = nm;
    prob.q = obs.output_dim(m);
    prob.alpha = alpha;
    prob.A_star = real.F_star;
    prob.C_star = real.C_star;
    prob.WI = Eigen::MatrixXd::Zero(nm, nm);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            prob.WI.block(i * m, j * m, m, m) = w.w(i, j) * Eigen::MatrixXd::Identity(m, m);
    for (int node : obs.observed)
        for (int c = 0; c < m; ++c) prob.obs_rows.push_back(node * m + c);
    for (int k = 0; k < nm; ++k)
        if (std::find(prob.obs_rows.begin(), prob.obs_rows.end(), k) == prob.obs_rows.end())
            prob.free_rows.push_back(k);

    const int nfree = static_cast<int>(prob.free_rows.size()) * nm;
    auto unit_rows = [&](const Eigen::MatrixXd& H) {
        Eigen::MatrixXd u = H;
        for (int i = 0; i < n; ++i) u.row(i) /= u.row(i).norm();
        return u;
    };

    std::vector<GnState> results(static_cast<std::size_t>(opt.restarts));
    std::vector<std::vector<RecoveryIterate>> histories(static_cast<std::size_t>(opt.restarts));
    run_trials(opt.restarts, Execution::Parallel, [&](int rs) {
        GnState start;
        if (rs == 0) {
            start.Hu = unit_rows(init_H);
        } else {
            Rng r = Rng::keyed(opt.seed, 0x6e57a7ULL, static_cast<std::uint64_t>(rs));
            Eigen::MatrixXd Hp = unit_rows(init_H);
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < m; ++c) Hp(i, c) += r.normal(0.3);
            start.Hu = unit_rows(Hp);
        }
        // naive transform start: identity pattern on the free rows
        start.tf = Eigen::VectorXd::Zero(nfree);
        for (std::size_t k = 0; k < prob.free_rows.size(); ++k)
            start.tf[static_cast<int>(k) * nm + prob.free_rows[k]] = 1.0;
        results[static_cast<std::size_t>(rs)] =
            gn_descend(prob, start, opt.max_iter, opt.tol * 1e-4, &histories[static_cast<std::size_t>(rs)]);
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < results.size(); ++k)
        if (results[k].objective < results[best].objective) best = k;

    RecoveryResult out;
    out.H_unit = results[best].Hu;
    out.objective = results[best].objective;
    out.converged = out.objective < opt.tol;
    out.history = std::move(histories[best]);

    LinearEquation rec{out.H_unit, out.H_unit * y_star};
    out.equation = canonical_form(rec);
    return out;
}

}  // namespace dcp
