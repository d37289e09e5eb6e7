// Command-line front end: protocol simulation, eavesdropper attacks, PPSC
// property checks, DP budget arithmetic and one-command reproduction of the
// built-in example studies.
//
// Exit codes: 0 success, 1 assertion failure, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>

#include "dcp/dpbudget.hpp"
#include "dcp/harness.hpp"
#include "dcp/io.hpp"
#include "dcp/ppsc.hpp"
#include "dcp/rng.hpp"

namespace {

int run_simulate(const std::string& config_path, bool need_attack) {
    dcp::ExperimentConfig cfg = dcp::ExperimentConfig::from_file(config_path);
    if (need_attack && !cfg.attack) {
        std::cerr << "config error: attack section required\n";
        return 2;
    }
    dcp::RunArtifacts art = dcp::run_experiment(cfg);
    std::cout << art.summary.dump(2) << "\n";
    std::cout << "manifest: " << art.manifest.string() << "\n";
    return 0;
}

int run_ppsc_check(const std::string& config_path) {
    nlohmann::json j = nlohmann::json::parse(dcp::read_text_file(config_path));
    dcp::Graph g = dcp::graph_from_json(j.at("graph"));
    dcp::PpscMechanism mech = dcp::mechanism_from_json(j.at("mechanism"), g);
    std::uint64_t seed = j.value("seed", std::uint64_t{0});
    int trials = j.value("trials", 1000);
    int samples = j.value("samples", 10000);

    int n = g.n, m = j.value("m", 1);
    dcp::Rng r = dcp::Rng::keyed(seed, 0xbe7aULL);
    Eigen::MatrixXd beta(n, m);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) beta(i, c) = r.uniform(-2.0, 2.0);

    nlohmann::json rep;
    dcp::SumConsistencyReport sc = dcp::check_sum_consistency(mech, beta, trials, seed);
    rep["sum_consistency"] = {{"trials", sc.trials}, {"max_rel_error", sc.max_rel_error}};

    dcp::PpscResult one = dcp::ppsc_apply(mech, beta, seed);
    rep["graph_compliance"] = dcp::check_graph_compliance(one.log, g);
    rep["message_log"] = dcp::message_log_json(one.log);

    // same-sum pair: move mass between the first two nodes
    Eigen::MatrixXd beta_b = beta;
    beta_b.row(0) += Eigen::RowVectorXd::Constant(m, 0.5);
    beta_b.row(1) -= Eigen::RowVectorXd::Constant(m, 0.5);
    dcp::IdentifiabilityReport ir = dcp::empirical_identifiability(mech, beta, beta_b, samples, seed);
    rep["identifiability"] = {{"samples", ir.samples}, {"distinguishable", ir.distinguishable}};
    for (int i = 0; i < ir.mean_gap.size(); ++i)
        rep["identifiability"]["mean_gap"].push_back(ir.mean_gap[i]);

    std::cout << rep.dump(2) << "\n";
    return 0;
}

dcp::BudgetInput budget_from_json(const nlohmann::json& j) {
    dcp::BudgetInput inp;
    inp.n = j.at("n").get<int>();
    inp.m = j.at("m").get<int>();
    inp.lambda = j.at("lambda").get<double>();
    inp.psi = j.at("psi").get<double>();
    inp.phi = j.at("phi").get<double>();
    inp.c = j.value("c", 0.0);
    inp.B = j.at("B").get<double>();
    inp.delta_A = j.value("delta_A", 1.0);
    inp.delta_b = j.value("delta_b", 1.0);
    inp.sigma_min_W = j.at("sigma_min_W").get<double>();
    return inp;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consensus-protocol privacy toolkit"};
    app.require_subcommand(1);

    std::string config_path, input_path, example_name;
    std::string out_dir;

    CLI::App* sim = app.add_subcommand("simulate", "run a protocol experiment from a JSON config");
    sim->add_option("config", config_path, "experiment config JSON")->required();

    CLI::App* atk = app.add_subcommand("attack", "run a protocol + eavesdropper attack experiment");
    atk->add_option("config", config_path, "experiment config JSON with an attack section")->required();

    CLI::App* ppc = app.add_subcommand("ppsc-check", "check PPSC mechanism conditions");
    ppc->add_option("config", config_path, "mechanism check config JSON")->required();

    CLI::App* dp = app.add_subcommand("dp", "differential-privacy budget arithmetic");
    dp->require_subcommand(1);
    CLI::App* dpb = dp->add_subcommand("budget", "evaluate the budget left-hand side");
    dpb->add_option("input", input_path, "BudgetInput JSON")->required();
    CLI::App* dpc = dp->add_subcommand("calibrate", "smallest c certifying target epsilon");
    dpc->add_option("input", input_path, "BudgetInput JSON with target_eps")->required();

    CLI::App* rep = app.add_subcommand("reproduce", "reproduce a built-in example study");
    rep->add_option("example", example_name, "example2|example3|example4")->required();
    rep->add_option("--out", out_dir, "output directory (default $DCPSIM_OUT or ./out)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(config_path, false);
        if (atk->parsed()) return run_simulate(config_path, true);
        if (ppc->parsed()) return run_ppsc_check(config_path);
        if (dp->parsed()) {
            nlohmann::json j = nlohmann::json::parse(dcp::read_text_file(input_path));
            dcp::BudgetInput inp = budget_from_json(j);
            if (dpb->parsed()) {
                double lhs = dcp::budget_lhs(inp);
                nlohmann::json outj{{"budget_lhs", lhs}};
                if (j.contains("target_eps")) {
                    double eps = j.at("target_eps").get<double>();
                    outj["target_eps"] = eps;
                    outj["certified"] = lhs <= eps;
                }
                std::cout << outj.dump(2) << "\n";
            } else {
                double eps = j.at("target_eps").get<double>();
                double c = dcp::calibrate_c(eps, inp);
                std::cout << nlohmann::json{{"target_eps", eps}, {"c", c}}.dump(2) << "\n";
            }
            return 0;
        }
        if (rep->parsed()) {
            std::filesystem::path out =
                out_dir.empty() ? dcp::default_output_dir() : std::filesystem::path(out_dir);
            dcp::RunArtifacts art = dcp::reproduce(example_name, out);
            std::cout << art.summary.dump(2) << "\n";
            std::cout << "manifest: " << art.manifest.string() << "\n";
            if (!art.ok) {
                std::cerr << "assertion failure: "
                          << art.summary.value("failures", std::string("see summary")) << "\n";
                return 1;
            }
            return 0;
        }
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}
