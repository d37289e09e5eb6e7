#ifndef DCP_PPSC_HPP
#define DCP_PPSC_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dcp/netcore.hpp"

namespace dcp {

// Privacy-preserving summation-consistent map beta -> beta#.
//
// Two reference realizations plus the identity:
//   edge_mask : per-edge antisymmetric Gaussian masks; graph-compliant and
//               exactly sum-consistent, but its per-node sample mean reveals
//               beta, so it fails strict non-identifiability against infinite
//               samples (the documented limitation).
//   ideal     : beta#_i = mean(beta) + zeta_i with sum(zeta) = 0; output law
//               depends on beta only through its sum, so non-identifiability
//               holds exactly, at the price of being centralized. Testing oracle.
struct PpscMechanism {
    enum class Kind { EdgeMask, Ideal, Identity };
    Kind kind = Kind::Identity;
    double sigma = 1.0;
    Graph graph;  // required (and connected) for edge_mask

    static PpscMechanism identity();
    static PpscMechanism ideal(double sigma);
    static PpscMechanism edge_mask(const Graph& g, double sigma);
};

struct Message {
    int sender = 0;
    int receiver = 0;
    int round = 0;
    int payload_dim = 0;
    // Mask values carried by the message. Kept in memory so tests can assert
    // condition (ii); withheld from every serialized form of the log.
    Eigen::VectorXd payload;
};

struct MessageLog {
    std::vector<Message> messages;
};

struct PpscResult {
    Eigen::MatrixXd beta_sharp;  // n x m
    MessageLog log;
};

struct SumConsistencyReport {
    double max_rel_error = 0.0;
    int trials = 0;
};

struct IdentifiabilityReport {
    Eigen::VectorXd mean_gap;       // per-node distance between sample means
    Eigen::VectorXd standard_error; // per-node SE of that gap estimate
    bool distinguishable = false;
    int samples = 0;
};

PpscResult ppsc_apply(const PpscMechanism& mech, const Eigen::MatrixXd& beta, std::uint64_t seed);

// Condition (iv): max over trials of ||sum beta# - sum beta|| / (1 + ||sum beta||).
SumConsistencyReport check_sum_consistency(const PpscMechanism& mech, const Eigen::MatrixXd& beta,
                                           int trials, std::uint64_t seed);

// Condition (i): every logged message must traverse an edge of g (or stay local).
bool check_graph_compliance(const MessageLog& log, const Graph& g);

// Condition (iii), repeated-invocation reading: estimate per-node output means
// under two same-sum inputs; distinguishable when some gap exceeds 4 standard
// errors.
IdentifiabilityReport empirical_identifiability(const PpscMechanism& mech,
                                                const Eigen::MatrixXd& beta_a,
                                                const Eigen::MatrixXd& beta_b, int samples,
                                                std::uint64_t seed);

}  // namespace dcp

#endif
