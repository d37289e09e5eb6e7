#include <doctest.h>

#include <cmath>

#include "dcp/ppsc.hpp"
#include "dcp/rng.hpp"
#include "dcp/trial_pool.hpp"

using namespace dcp;

namespace {

Eigen::MatrixXd random_beta(Rng& r, int n, int m) {
    Eigen::MatrixXd b(n, m);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) b(i, c) = r.uniform(-3, 3);
    return b;
}

}  // namespace

TEST_CASE("identity mechanism is a no-op with an empty log") {
    Rng r(1);
    Eigen::MatrixXd beta = random_beta(r, 4, 2);
    PpscResult out = ppsc_apply(PpscMechanism::identity(), beta, 9);
    CHECK((out.beta_sharp - beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.log.messages.empty());
}

TEST_CASE("edge_mask on the 2-node path: single-edge cancellation") {
    Graph path = build_graph(2, {{0, 1}});
    Eigen::MatrixXd beta(2, 1);
    beta << 1, 3;
    PpscResult out = ppsc_apply(PpscMechanism::edge_mask(path, 1.0), beta, 42);
    double nu = out.beta_sharp(0, 0) - 1.0;
    CHECK(std::abs(nu) > 0.0);
    CHECK(out.beta_sharp(1, 0) == doctest::Approx(3.0 - nu).epsilon(1e-15));
    CHECK(out.beta_sharp.sum() == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(out.log.messages.size() == 1);
    CHECK(out.log.messages[0].sender == 0);
    CHECK(out.log.messages[0].receiver == 1);
    CHECK(out.log.messages[0].payload_dim == 1);
}

TEST_CASE("sum consistency holds to 1e-9 over many trials") {
    Graph star = build_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    Rng r(2);
    Eigen::MatrixXd beta = random_beta(r, 4, 2);

    SumConsistencyReport mask = check_sum_consistency(PpscMechanism::edge_mask(star, 2.0), beta, 1000, 5);
    CHECK(mask.max_rel_error <= 1e-9);

    SumConsistencyReport ideal = check_sum_consistency(PpscMechanism::ideal(1.5), beta, 1000, 5);
    CHECK(ideal.max_rel_error <= 1e-9);

    SumConsistencyReport ident = check_sum_consistency(PpscMechanism::identity(), beta, 10, 5);
    CHECK(ident.max_rel_error == 0.0);
}

TEST_CASE("a broken mechanism is detected by the sum-consistency metric") {
    // unit-test double: edge_mask output corrupted by unmatched per-node noise
    Graph star = build_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    Rng r(3);
    Eigen::MatrixXd beta = random_beta(r, 4, 2);
    PpscResult out = ppsc_apply(PpscMechanism::edge_mask(star, 1.0), beta, 7);
    out.beta_sharp(2, 0) += 0.37;  // nothing cancels this
    double rel = (out.beta_sharp.colwise().sum() - beta.colwise().sum()).norm() /
                 (1.0 + beta.colwise().sum().norm());
    CHECK(rel > 1e-3);
}

TEST_CASE("graph compliance") {
    Graph star = build_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    Rng r(4);
    Eigen::MatrixXd beta = random_beta(r, 4, 2);
    PpscResult out = ppsc_apply(PpscMechanism::edge_mask(star, 1.0), beta, 11);
    CHECK(check_graph_compliance(out.log, star));

    MessageLog offgraph = out.log;
    offgraph.messages.push_back(Message{1, 2, 0, 2, Eigen::VectorXd::Zero(2)});  // not an edge
    CHECK_FALSE(check_graph_compliance(offgraph, star));

    CHECK(check_graph_compliance(MessageLog{}, star));  // vacuous
}

TEST_CASE("masked payloads never equal a node value (condition ii)") {
    Graph star = build_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}});
    Rng r(5);
    Eigen::MatrixXd beta = random_beta(r, 5, 3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        PpscResult out = ppsc_apply(PpscMechanism::edge_mask(star, 1.0), beta, seed);
        for (const Message& msg : out.log.messages)
            for (int i = 0; i < 5; ++i)
                CHECK((msg.payload - beta.row(i).transpose()).cwiseAbs().maxCoeff() > 1e-12);
    }
}

TEST_CASE("ideal mechanism output depends on beta only through its sum") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1, 3;
    b << 2, 2;  // same sum, exactly representable
    PpscMechanism ideal = PpscMechanism::ideal(1.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PpscResult ra = ppsc_apply(ideal, a, seed);
        PpscResult rb = ppsc_apply(ideal, b, seed);
        CHECK((ra.beta_sharp - rb.beta_sharp).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("empirical identifiability") {
    Graph star = build_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    Eigen::MatrixXd a(4, 1), b(4, 1);
    a << 1, 2, 3, 4;
    b << 2.5, 2.5, 2.5, 2.5;  // same sum

    // ideal: distributions identical by construction
    IdentifiabilityReport ideal = empirical_identifiability(PpscMechanism::ideal(1.0), a, b, 10000, 1);
    CHECK_FALSE(ideal.distinguishable);

    // edge_mask: per-node sample mean converges to beta, so the gap shows
    IdentifiabilityReport mask =
        empirical_identifiability(PpscMechanism::edge_mask(star, 1.0), a, b, 100000, 1);
    CHECK(mask.distinguishable);
    for (int i = 0; i < 4; ++i)
        CHECK(mask.mean_gap[i] == doctest::Approx(std::abs(a(i, 0) - b(i, 0))).epsilon(0.05));

    // identical inputs are never distinguishable
    IdentifiabilityReport same = empirical_identifiability(PpscMechanism::edge_mask(star, 1.0), a, a, 1000, 2);
    CHECK_FALSE(same.distinguishable);

    // sum mismatch is a precondition violation
    Eigen::MatrixXd c = b;
    c(0, 0) += 1.0;
    CHECK_THROWS_AS(empirical_identifiability(PpscMechanism::ideal(1.0), a, c, 1000, 1),
                    std::invalid_argument);
}

TEST_CASE("mechanism construction guards") {
    Graph iso = build_graph(3, {{0, 1}});
    CHECK_THROWS_AS(PpscMechanism::edge_mask(iso, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(PpscMechanism::edge_mask(build_graph(2, {{0, 1}}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(PpscMechanism::ideal(-1.0), std::invalid_argument);
}

TEST_CASE("trial pool: serial and parallel fan-outs produce identical results") {
    std::vector<double> serial(257), parallel(257);
    auto body = [](int t) {
        Rng r = Rng::keyed(99, static_cast<std::uint64_t>(t));
        double acc = 0;
        for (int k = 0; k < 100; ++k) acc += r.laplace(1.0) + r.normal(2.0);
        return acc;
    };
    run_trials(257, Execution::Serial, [&](int t) { serial[static_cast<std::size_t>(t)] = body(t); });
    run_trials(257, Execution::Parallel, [&](int t) { parallel[static_cast<std::size_t>(t)] = body(t); });
    for (std::size_t k = 0; k < serial.size(); ++k) CHECK(serial[k] == parallel[k]);
}
