// regenctl: command-line front end for the storage regeneration planner.
//
// Subcommands: feasibility, solve, sweep, simulate, dimension.
// Exit codes: 0 success/result, 2 configuration error, 3 infeasible,
// 4 non-convergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regen/config.hpp"
#include "regen/core.hpp"
#include "regen/fluid.hpp"
#include "regen/mdp_sim.hpp"
#include "regen/optimizer.hpp"
#include "regen/pontryagin.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNoConvergence = 4;

regen::ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw regen::ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return regen::parse_config(ss.str());
}

void emit(const nlohmann::json& j, const std::optional<std::string>& out_dir,
          const std::string& filename) {
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream f(*out_dir + "/" + filename);
        f << text;
    }
}

void write_file(const std::string& dir, const std::string& name,
                const std::function<void(std::ostream&)>& writer) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir + "/" + name);
    writer(f);
}

void write_series_csv(const std::string& dir, const std::string& name, const char* col,
                      const std::vector<double>& t, const std::vector<double>& v) {
    write_file(dir, name, [&](std::ostream& os) {
        os << "t," << col << "\n";
        char buf[32];
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.6g", t[i]);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.6g", v[i]);
            os << buf << '\n';
        }
    });
}

int cmd_feasibility(const std::string& config_path, const std::optional<std::string>& out_dir) {
    const auto cfg = load_config(config_path);
    const auto code = cfg.code();
    const auto params = cfg.params(code);
    regen::validate_params(params, code);
    const auto tb = regen::tightened(params, code);
    const auto rep = regen::feasibility_check(params, code, tb.n_tight, tb.d_tight, cfg.step());
    emit(regen::to_json(rep), out_dir, "feasibility.json");
    return kExitOk;
}

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir,
              const std::optional<std::string>& emit_dir) {
    const auto cfg = load_config(config_path);
    const auto code = cfg.code();
    const auto params = cfg.params(code);
    const auto sol = regen::solve(params, code, cfg.solver_epsilon, cfg.step());
    emit(regen::to_json(sol), out_dir, "solve.json");

    if (emit_dir) {
        const auto costates =
            regen::adjoint_backward(params, code, sol.gamma_star, cfg.step());
        write_file(*emit_dir, "trajectory.csv",
                   [&](std::ostream& os) { regen::write_trajectory_csv(os, sol.trajectory); });
        write_file(*emit_dir, "costate.csv",
                   [&](std::ostream& os) { regen::write_costate_csv(os, costates); });

        std::vector<double> p0(costates.grid.size());
        for (std::size_t i = 0; i < costates.grid.size(); ++i) p0[i] = costates.p0(i);
        write_series_csv(*emit_dir, "p0.csv", "p0", costates.grid, p0);

        const auto& traj = sol.trajectory;
        std::vector<double> u(traj.grid.size()), xd(traj.grid.size());
        for (std::size_t i = 0; i < traj.grid.size(); ++i) {
            u[i] = traj.control[std::min(i, traj.control.size() - 1)];
            xd[i] = traj.xd(i);
        }
        write_series_csv(*emit_dir, "u.csv", "u", traj.grid, u);
        write_series_csv(*emit_dir, "xd.csv", "xd", traj.grid, xd);
    }
    return kExitOk;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw regen::ConfigError(std::string("bad numeric list for ") + flag);
        }
    }
    if (out.empty()) throw regen::ConfigError(std::string("empty list for ") + flag);
    return out;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_dir,
              const std::string& c1_text, const std::string& c2_text) {
    const auto cfg = load_config(config_path);
    const auto code = cfg.code();
    const auto params = cfg.params(code);
    const auto c1s = parse_list(c1_text, "--c1");
    const auto c2s = parse_list(c2_text, "--c2");
    const auto cells = regen::sweep(params, code, c1s, c2s, cfg.solver_epsilon, cfg.step());
    std::ostringstream ss;
    regen::write_sweep_csv(ss, cells);
    std::cout << ss.str();
    if (out_dir) write_file(*out_dir, "sweep.csv", [&](std::ostream& os) { os << ss.str(); });
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_dir,
                 const std::optional<std::string>& policy_text, bool from_solve,
                 bool operational_failures, const std::optional<std::string>& per_run_path) {
    const auto cfg = load_config(config_path);
    const auto code = cfg.code();
    const auto params = cfg.params(code);
    regen::validate_params(params, code);

    regen::ThresholdPolicy policy;
    if (from_solve) {
        policy = regen::solve(params, code, cfg.solver_epsilon, cfg.step()).policy;
    } else if (policy_text) {
        const auto vals = parse_list(*policy_text, "--policy");
        if (vals.size() != 2) throw regen::ConfigError("--policy wants t_on,t_off");
        policy.t_on = vals[0];
        policy.t_off = vals[1];
        if (!(policy.t_on >= 0 && policy.t_on <= policy.t_off && policy.t_off <= params.T))
            throw regen::ConfigError("--policy epochs must satisfy 0 <= t_on <= t_off <= T");
    } else {
        throw regen::ConfigError("simulate needs --policy t_on,t_off or --from-solve");
    }

    regen::SimConfig sim;
    sim.seed = cfg.sim_seed;
    sim.runs = cfg.sim_runs;
    sim.operational_failures = operational_failures;
    for (int i = 0; i <= 50; ++i)
        sim.record_grid.push_back(params.T * static_cast<double>(i) / 50.0);

    const auto stats = regen::monte_carlo(params, code, policy, sim);
    auto j = regen::to_json(stats);
    j["policy"] = {{"t_on", policy.t_on}, {"t_off", policy.t_off}};
    emit(j, out_dir, "simulate.json");

    if (per_run_path) {
        std::ofstream f(*per_run_path);
        regen::write_runs_csv(f, params, code, policy, sim);
    }
    return kExitOk;
}

int cmd_dimension(const std::string& config_path, const std::optional<std::string>& out_dir,
                  const std::string& target, std::optional<double> lo_opt,
                  std::optional<double> hi_opt) {
    const auto cfg = load_config(config_path);
    const auto base_code = cfg.code();
    const auto base_params = cfg.params(base_code);
    regen::validate_params(base_params, base_code);

    // Feasibility predicate per candidate target value; beta (and lambda, in
    // throughput form) are re-derived when the repair degree changes.
    const auto feasible_at = [&](double value) -> regen::FeasibilityReport {
        regen::CodeSpec code = base_code;
        regen::SystemParams params = base_params;
        if (target == "T") {
            params.T = value;
        } else if (target == "lambda") {
            params.lambda = value;
        } else {
            const int dd = static_cast<int>(value);
            if (!(dd > cfg.k && dd < cfg.n) || params.x_d0 < dd) {
                regen::FeasibilityReport rep;
                rep.feasible = false;
                return rep;
            }
            code = regen::make_code(cfg.variant, cfg.n, cfg.k, dd, cfg.B_gigabytes);
            if (cfg.throughput_gbit_per_s) params.lambda = cfg.lambda(code);
        }
        const auto tb = regen::tightened(params, code);
        return regen::feasibility_check(params, code, tb.n_tight, tb.d_tight,
                                        params.T / cfg.solver_step_fraction);
    };

    double lo, hi;
    const bool integer_target = target == "d";
    if (target == "T") {
        lo = lo_opt.value_or(cfg.horizon_s * 1e-3);
        hi = hi_opt.value_or(cfg.horizon_s);
    } else if (target == "lambda") {
        lo = lo_opt.value_or(base_params.lambda * 1e-3);
        hi = hi_opt.value_or(base_params.lambda);
    } else if (target == "d") {
        lo = lo_opt.value_or(cfg.k + 1);
        hi = hi_opt.value_or(cfg.d);
    } else {
        throw regen::ConfigError("--target must be one of T, lambda, d");
    }
    if (!(lo <= hi) || !(lo > 0)) throw regen::ConfigError("target bounds inverted or invalid");

    if (!feasible_at(hi).feasible) {
        std::cerr << "no feasible " << target << " within [" << lo << ", " << hi << "]\n";
        return kExitInfeasible;
    }
    if (feasible_at(lo).feasible) {
        hi = lo;
    } else if (integer_target) {
        double a = lo, b = hi;  // infeasible at a, feasible at b
        while (b - a > 1.0) {
            const double mid = std::floor(0.5 * (a + b));
            (feasible_at(mid).feasible ? b : a) = mid;
        }
        hi = b;
    } else {
        double a = lo, b = hi;
        while ((b - a) > 1e-3 * b) {
            const double mid = 0.5 * (a + b);
            (feasible_at(mid).feasible ? b : a) = mid;
        }
        hi = b;
    }

    const auto rep = feasible_at(hi);
    nlohmann::json j{{"target", target},
                     {"minimal_feasible_value", hi},
                     {"mu_bar", rep.mu_bar},
                     {"x_d_terminal", rep.x_d_terminal},
                     {"x_d_min", rep.x_d_min}};
    emit(j, out_dir, "dimension.json");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deadline-constrained storage regeneration planner"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::string> emit_dir;
    std::optional<std::string> policy_text;
    std::optional<std::string> per_run_path;
    std::string c1_text, c2_text, target;
    std::optional<double> lo, hi;
    bool from_solve = false, operational_failures = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "directory to copy results into");
    };

    auto* feas = app.add_subcommand("feasibility", "full-activation feasibility report");
    add_common(feas);

    auto* solve = app.add_subcommand("solve", "optimal multiplier, policy and cost");
    add_common(solve);
    solve->add_option("--emit-trajectories", emit_dir,
                      "directory for p0.csv, u.csv, xd.csv time series");

    auto* sweep = app.add_subcommand("sweep", "solve over a grid of costs, CSV output");
    add_common(sweep);
    sweep->add_option("--c1", c1_text, "comma-separated activation costs")->required();
    sweep->add_option("--c2", c2_text, "comma-separated transfer costs ($/GB)")->required();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo validation of a policy");
    add_common(simulate);
    simulate->add_option("--policy", policy_text, "threshold policy as t_on,t_off");
    simulate->add_flag("--from-solve", from_solve, "simulate the solved optimal policy");
    simulate->add_flag("--operational-failures", operational_failures,
                       "operational nodes also fail at rate mu (matches the fluid drift)");
    simulate->add_option("--per-run", per_run_path, "write per-run CSV to this file");

    auto* dimension = app.add_subcommand("dimension", "minimal feasible T, lambda or d");
    add_common(dimension);
    dimension->add_option("--target", target, "one of: T, lambda, d")->required();
    dimension->add_option("--lo", lo, "lower search bound");
    dimension->add_option("--hi", hi, "upper search bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (feas->parsed()) return cmd_feasibility(config_path, out_dir);
        if (solve->parsed()) return cmd_solve(config_path, out_dir, emit_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, c1_text, c2_text);
        if (simulate->parsed())
            return cmd_simulate(config_path, out_dir, policy_text, from_solve,
                                operational_failures, per_run_path);
        if (dimension->parsed()) return cmd_dimension(config_path, out_dir, target, lo, hi);
    } catch (const regen::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const regen::InvalidParams& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const regen::Infeasible& e) {
        std::cerr << e.what() << "\n" << regen::to_json(e.report).dump(2) << "\n";
        return kExitInfeasible;
    } catch (const regen::GammaDiscoveryFailed& e) {
        std::cerr << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const regen::NoConvergence& e) {
        std::cerr << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
