#include "dcp/dpbudget.hpp"

#include <cmath>
#include <stdexcept>

#include "dcp/rng.hpp"
#include "dcp/trial_pool.hpp"

namespace dcp {

void BudgetInput::validate(bool need_c) const {
    if (n < 1 || m < 1) throw std::invalid_argument("BudgetInput: n, m must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("BudgetInput: lambda must be > 0");
    if (!(phi > 0.0 && phi < 1.0)) throw std::invalid_argument("BudgetInput: phi must be in (0,1)");
    if (!(psi > 0.0)) throw std::invalid_argument("BudgetInput: psi must be > 0");
    if (psi >= phi) throw std::invalid_argument("BudgetInput: psi < phi required (budget infinite)");
    if (need_c && !(c > 0.0)) throw std::invalid_argument("BudgetInput: c must be > 0");
    if (!(B > 0.0)) throw std::invalid_argument("BudgetInput: B must be > 0");
    if (delta_A < 0.0 || delta_b < 0.0) throw std::invalid_argument("BudgetInput: negative radius");
    if (!(sigma_min_W > 0.0)) throw std::invalid_argument("BudgetInput: sigma_min_W must be > 0");
}

double budget_lhs(const BudgetInput& inp) {
    inp.validate();
    double nm = static_cast<double>(inp.n) * static_cast<double>(inp.m);
    return (inp.phi / (inp.phi - inp.psi)) * (inp.lambda / inp.c) * std::sqrt(nm) *
           (inp.B * inp.delta_A + inp.delta_b) / inp.sigma_min_W;
}

double calibrate_c(double target_eps, const BudgetInput& inp) {
    inp.validate(/*need_c=*/false);
    if (!(target_eps > 0.0)) throw std::invalid_argument("calibrate_c: target_eps must be > 0");
    double nm = static_cast<double>(inp.n) * static_cast<double>(inp.m);
    return (inp.phi / (inp.phi - inp.psi)) * inp.lambda * std::sqrt(nm) *
           (inp.B * inp.delta_A + inp.delta_b) / (inp.sigma_min_W * target_eps);
}

bool LaplaceStatsReport::all_ok() const {
    for (const auto& r : rows)
        if (!r.var_within_10pct || !r.mean_within_4se) return false;
    return true;
}

LaplaceStatsReport laplace_stats_check(double c, double phi, int t_max, int samples,
                                       std::uint64_t seed) {
    if (samples < 1000) throw std::invalid_argument("laplace_stats_check: samples must be >= 1000");
    LaplaceStatsReport rep;
    rep.rows.resize(static_cast<std::size_t>(t_max) + 1);
    run_trials(t_max + 1, Execution::Parallel, [&](int t) {
        double scale = c * std::pow(phi, t);
        Rng r = Rng::keyed(seed, 0x1a9ULL, static_cast<std::uint64_t>(t));
        double sum = 0.0, sumsq = 0.0;
        for (int s = 0; s < samples; ++s) {
            double v = r.laplace(scale);
            sum += v;
            sumsq += v * v;
        }
        LaplaceStatsRow row;
        row.t = t;
        row.scale = scale;
        row.expected_var = 2.0 * scale * scale;
        row.empirical_mean = sum / samples;
        row.empirical_var = sumsq / samples - row.empirical_mean * row.empirical_mean;
        row.var_within_10pct = std::abs(row.empirical_var - row.expected_var) <= 0.1 * row.expected_var;
        row.mean_standard_error = std::sqrt(row.empirical_var / samples);
        row.mean_within_4se = std::abs(row.empirical_mean) <= 4.0 * row.mean_standard_error;
        rep.rows[static_cast<std::size_t>(t)] = row;
    });
    return rep;
}

}  // namespace dcp
