#ifndef DCP_DPBUDGET_HPP
#define DCP_DPBUDGET_HPP

#include <cstdint>
#include <vector>

namespace dcp {

// Inputs of the DP-DLES budget inequality
//   (phi/(phi-psi)) * (lambda/c) * sqrt(nm) (B*delta_A + delta_b) / sigma_m(W) <= eps.
// The theorem's delta_H, delta_z are identified with the adjacency definition's
// delta_A, delta_b.
struct BudgetInput {
    int n = 0;
    int m = 0;
    double lambda = 0.0;
    double psi = 0.0;
    double c = 0.0;
    double phi = 0.0;
    double B = 0.0;        // sup-norm bound of Omega
    double delta_A = 1.0;
    double delta_b = 1.0;
    double sigma_min_W = 0.0;

    void validate(bool need_c = true) const;  // throws; psi < phi is required
};

// Left-hand side of the budget inequality; privacy certified at level eps iff
// the returned value is <= eps.
double budget_lhs(const BudgetInput& inp);

// Smallest noise base scale c certifying target_eps (inp.c is ignored).
double calibrate_c(double target_eps, const BudgetInput& inp);

struct LaplaceStatsRow {
    int t = 0;
    double scale = 0.0;          // c * phi^t
    double expected_var = 0.0;   // 2 * scale^2
    double empirical_var = 0.0;
    bool var_within_10pct = false;
    double empirical_mean = 0.0;
    double mean_standard_error = 0.0;
    bool mean_within_4se = false;
};

struct LaplaceStatsReport {
    std::vector<LaplaceStatsRow> rows;
    bool all_ok() const;
};

LaplaceStatsReport laplace_stats_check(double c, double phi, int t_max, int samples,
                                       std::uint64_t seed);

}  // namespace dcp

#endif
