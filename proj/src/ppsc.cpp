#include "dcp/ppsc.hpp"

#include <cmath>
#include <stdexcept>

#include "dcp/rng.hpp"
#include "dcp/trial_pool.hpp"

namespace dcp {

PpscMechanism PpscMechanism::identity() { return PpscMechanism{Kind::Identity, 0.0, {}}; }

PpscMechanism PpscMechanism::ideal(double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("PpscMechanism::ideal: sigma must be >= 0");
    return PpscMechanism{Kind::Ideal, sigma, {}};
}

PpscMechanism PpscMechanism::edge_mask(const Graph& g, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("PpscMechanism::edge_mask: sigma must be > 0");
    if (!g.connected) throw std::invalid_argument("PpscMechanism::edge_mask: graph must be connected");
    return PpscMechanism{Kind::EdgeMask, sigma, g};
}

PpscResult ppsc_apply(const PpscMechanism& mech, const Eigen::MatrixXd& beta, std::uint64_t seed) {
    if (!beta.allFinite()) throw std::invalid_argument("ppsc_apply: beta must be finite");
    const int n = static_cast<int>(beta.rows());
    const int m = static_cast<int>(beta.cols());
    PpscResult out;
    out.beta_sharp = beta;

    switch (mech.kind) {
        case PpscMechanism::Kind::Identity:
            return out;

        case PpscMechanism::Kind::Ideal: {
            // beta#_i = mean(beta) + zeta_i, zeta drawn per node then mean-removed,
            // so the output depends on beta only through its sum.
            Eigen::RowVectorXd mean = beta.colwise().sum() / static_cast<double>(n);
            Eigen::MatrixXd zeta(n, m);
            for (int i = 0; i < n; ++i) {
                Rng r = Rng::keyed(seed, 0x1dea1ULL, static_cast<std::uint64_t>(i));
                for (int c = 0; c < m; ++c) zeta(i, c) = r.normal(mech.sigma);
            }
            Eigen::RowVectorXd zmean = zeta.colwise().sum() / static_cast<double>(n);
            zeta.rowwise() -= zmean;
            out.beta_sharp = zeta;
            out.beta_sharp.rowwise() += mean;
            return out;
        }

        case PpscMechanism::Kind::EdgeMask: {
            if (mech.graph.n != n) throw std::invalid_argument("ppsc_apply: beta/graph size mismatch");
            // For each edge {i,j} (i<j) node i draws nu and transfers it to j;
            // i adds, j subtracts, so the network sum telescopes exactly.
            for (std::size_t e = 0; e < mech.graph.edges.size(); ++e) {
                auto [i, j] = mech.graph.edges[e];
                Rng r = Rng::keyed(seed, 0xed6eULL, static_cast<std::uint64_t>(e));
                Eigen::VectorXd nu(m);
                for (int c = 0; c < m; ++c) nu[c] = r.normal(mech.sigma);
                out.beta_sharp.row(i) += nu.transpose();
                out.beta_sharp.row(j) -= nu.transpose();
                out.log.messages.push_back(Message{i, j, 0, m, nu});
            }
            return out;
        }
    }
    throw std::logic_error("ppsc_apply: unknown mechanism kind");
}

SumConsistencyReport check_sum_consistency(const PpscMechanism& mech, const Eigen::MatrixXd& beta,
                                           int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("check_sum_consistency: trials must be >= 1");
    Eigen::RowVectorXd ref = beta.colwise().sum();
    double denom = 1.0 + ref.norm();
    std::vector<double> errs(trials, 0.0);
    run_trials(trials, Execution::Parallel, [&](int t) {
        PpscResult r = ppsc_apply(mech, beta, mix64(seed ^ static_cast<std::uint64_t>(t)));
        errs[t] = (r.beta_sharp.colwise().sum() - ref).norm() / denom;
    });
    SumConsistencyReport rep;
    rep.trials = trials;
    for (double e : errs) rep.max_rel_error = std::max(rep.max_rel_error, e);
    return rep;
}

bool check_graph_compliance(const MessageLog& log, const Graph& g) {
    for (const Message& msg : log.messages) {
        if (msg.sender == msg.receiver) continue;
        if (msg.sender < 0 || msg.receiver < 0 || msg.sender >= g.n || msg.receiver >= g.n) return false;
        if (!g.has_edge(msg.sender, msg.receiver)) return false;
    }
    return true;
}

IdentifiabilityReport empirical_identifiability(const PpscMechanism& mech,
                                                const Eigen::MatrixXd& beta_a,
                                                const Eigen::MatrixXd& beta_b, int samples,
                                                std::uint64_t seed) {
    if (samples < 100) throw std::invalid_argument("empirical_identifiability: samples must be >= 100");
    if (beta_a.rows() != beta_b.rows() || beta_a.cols() != beta_b.cols())
        throw std::invalid_argument("empirical_identifiability: shape mismatch");
    Eigen::RowVectorXd sa = beta_a.colwise().sum(), sb = beta_b.colwise().sum();
    if ((sa - sb).norm() > 1e-9 * (1.0 + sa.norm()))
        throw std::invalid_argument("empirical_identifiability: inputs must share the same sum");

    const int n = static_cast<int>(beta_a.rows());
    const int m = static_cast<int>(beta_a.cols());
    // accumulate per-sample means and squared norms per node, for both inputs
    Eigen::MatrixXd mean_a = Eigen::MatrixXd::Zero(n, m), mean_b = mean_a;
    Eigen::VectorXd sq_a = Eigen::VectorXd::Zero(n), sq_b = sq_a;

    std::vector<Eigen::MatrixXd> acc_a(samples), acc_b(samples);
    run_trials(samples, Execution::Parallel, [&](int s) {
        std::uint64_t ks = mix64(seed ^ (0x5a5a5a5aULL + static_cast<std::uint64_t>(s)));
        acc_a[s] = ppsc_apply(mech, beta_a, ks).beta_sharp;
        acc_b[s] = ppsc_apply(mech, beta_b, ks).beta_sharp;
    });
    for (int s = 0; s < samples; ++s) {
        mean_a += acc_a[s];
        mean_b += acc_b[s];
        sq_a += acc_a[s].rowwise().squaredNorm();
        sq_b += acc_b[s].rowwise().squaredNorm();
    }
    mean_a /= samples;
    mean_b /= samples;

    IdentifiabilityReport rep;
    rep.samples = samples;
    rep.mean_gap.resize(n);
    rep.standard_error.resize(n);
    for (int i = 0; i < n; ++i) {
        rep.mean_gap[i] = (mean_a.row(i) - mean_b.row(i)).norm();
        double var_a = sq_a[i] / samples - mean_a.row(i).squaredNorm();
        double var_b = sq_b[i] / samples - mean_b.row(i).squaredNorm();
        rep.standard_error[i] = std::sqrt(std::max(var_a + var_b, 0.0) / samples);
        if (rep.mean_gap[i] > 4.0 * rep.standard_error[i] && rep.mean_gap[i] > 1e-12)
            rep.distinguishable = true;
    }
    return rep;
}

}  // namespace dcp
