// Wall-time comparison of the serial reference trial runner against the
// OpenMP pool on the Monte-Carlo workloads, asserting identical results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "dcp/harness.hpp"
#include "dcp/ppsc.hpp"
#include "dcp/protocols.hpp"
#include "dcp/rng.hpp"
#include "dcp/trial_pool.hpp"

using namespace dcp;

namespace {

template <typename Fn>
double timed(Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd uniform_state(Rng& r, int n, int m) {
    Eigen::MatrixXd x(n, m);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) x(i, c) = r.uniform(-1, 1);
    return x;
}

int run_bench(const char* name, int trials,
              const std::function<double(int)>& body) {
    std::vector<double> serial(static_cast<std::size_t>(trials));
    std::vector<double> parallel(static_cast<std::size_t>(trials));
    double ts = timed([&] {
        run_trials(trials, Execution::Serial,
                   [&](int t) { serial[static_cast<std::size_t>(t)] = body(t); });
    });
    double tp = timed([&] {
        run_trials(trials, Execution::Parallel,
                   [&](int t) { parallel[static_cast<std::size_t>(t)] = body(t); });
    });
    int mismatches = 0;
    for (std::size_t k = 0; k < serial.size(); ++k) mismatches += (serial[k] != parallel[k]);
    std::printf("%-28s %6d trials  serial %8.3fs  openmp %8.3fs  speedup %5.2fx  mismatches %d\n",
                name, trials, ts, tp, ts / tp, mismatches);
    return mismatches;
}

}  // namespace

int main() {
    std::printf("openmp enabled: %s\n", openmp_enabled() ? "yes" : "no");
    int bad = 0;

    {
        WeightMatrix w = example_weight_matrix();
        LinearEquation e = example2_equation();
        ExactSolution sol = solve_exact(e);
        DpParams dp;
        dp.c = 10.0;
        dp.phi = 0.9;
        dp.lambda = 0.5;
        dp.psi = 0.45;
        dp.omega = ConvexSet::ball(sol.solution, 1.0);
        bad += run_bench("dp_dles monte carlo", 4000, [&](int t) {
            std::uint64_t seed = mix64(0xbe11c4ULL ^ static_cast<std::uint64_t>(t));
            Rng r = Rng::keyed(seed, 1);
            Eigen::MatrixXd x0 = uniform_state(r, 4, 2);
            Trajectory traj = run_dp_dles(w, e, dp, x0, 40, seed);
            return (traj.mean_state(traj.steps()) - sol.solution).norm();
        });
    }

    {
        Graph star = example_star_graph();
        PpscMechanism mech = PpscMechanism::edge_mask(star, 1.5);
        Rng r0(5);
        Eigen::MatrixXd beta = uniform_state(r0, 4, 8);
        bad += run_bench("ppsc mask application", 20000, [&](int t) {
            PpscResult out = ppsc_apply(mech, beta, static_cast<std::uint64_t>(t));
            return out.beta_sharp.sum();
        });
    }

    {
        WeightMatrix w = example_weight_matrix();
        LinearEquation e = example2_equation();
        bad += run_bench("cpa + global attack", 5000, [&](int t) {
            Rng r = Rng::keyed(0xa77ac4ULL, static_cast<std::uint64_t>(t));
            Eigen::MatrixXd x0 = uniform_state(r, 4, 2) * 5.0;
            Trajectory traj = run_cpa(w, e, 0.1, x0, 10);
            RecoveredEquation rec = global_attack_cpa(traj, w, 0.1);
            return rec.residual;
        });
    }

    return bad ? 1 : 0;
}
