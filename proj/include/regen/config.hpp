#pragma once

// Scenario configuration: JSON schema, validation, and serialization of the
// structured results (feasibility report, solve result, simulation stats).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regen/core.hpp"
#include "regen/fluid.hpp"
#include "regen/mdp_sim.hpp"
#include "regen/optimizer.hpp"

namespace regen {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One regeneration scenario as read from the JSON configuration.
///
/// Exactly one of rates.lambda_per_s / rates.throughput_gbit_per_s is given;
/// in the throughput form the chunk transfer rate is reconstructed as
/// lambda = throughput / (8 beta), i.e. one transfer takes beta/throughput
/// seconds mean. The initial condition is x_d0 = n - failed_servers.
struct ScenarioConfig {
    CodeVariant variant = CodeVariant::MBR;
    int n = 0, k = 0, d = 0;
    double B_gigabytes = 0;

    double mu_per_s = 0;
    double zeta_per_s = 0;
    std::optional<double> lambda_per_s;
    std::optional<double> throughput_gbit_per_s;

    double c1_dollars = 0;
    double c2_dollars_per_gigabyte = 0;

    double horizon_s = 0;
    int failed_servers = 0;

    double eps1 = 0, eps2 = 0;

    double solver_epsilon = 0.05;
    int solver_step_fraction = 2000;  ///< integration step = T / step_fraction

    std::uint64_t sim_seed = 1;
    std::int64_t sim_runs = 10000;

    CodeSpec code() const { return make_code(variant, n, k, d, B_gigabytes); }

    double lambda(const CodeSpec& c) const {
        if (lambda_per_s) return *lambda_per_s;
        return *throughput_gbit_per_s / (8.0 * c.beta);  // beta in GB -> Gbit
    }

    SystemParams params(const CodeSpec& c) const {
        SystemParams p;
        p.mu = mu_per_s;
        p.lambda = lambda(c);
        p.zeta = zeta_per_s;
        p.c1 = c1_dollars;
        p.c2 = c2_dollars_per_gigabyte;
        p.T = horizon_s;
        p.x_d0 = static_cast<double>(n - failed_servers);
        p.eps1 = eps1;
        p.eps2 = eps2;
        return p;
    }

    double step() const { return horizon_s / static_cast<double>(solver_step_fraction); }
};

namespace detail {

template <typename T>
T field(const nlohmann::json& j, const std::string& path, const char* name) {
    if (!j.contains(name))
        throw ConfigError("missing field: " + path + name);
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for field: " + path + name);
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& path, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    return field<T>(j, path, name);
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& j) {
    using detail::field;
    using detail::field_or;
    ScenarioConfig cfg;

    const auto code = field<nlohmann::json>(j, "", "code");
    const auto variant = field<std::string>(code, "code.", "variant");
    if (variant == "MBR")
        cfg.variant = CodeVariant::MBR;
    else if (variant == "MSR")
        cfg.variant = CodeVariant::MSR;
    else
        throw ConfigError("bad value for field: code.variant (want MBR or MSR)");
    cfg.n = field<int>(code, "code.", "n");
    cfg.k = field<int>(code, "code.", "k");
    cfg.d = field<int>(code, "code.", "d");
    cfg.B_gigabytes = field<double>(code, "code.", "B_gigabytes");

    const auto rates = field<nlohmann::json>(j, "", "rates");
    cfg.mu_per_s = field<double>(rates, "rates.", "mu_per_s");
    cfg.zeta_per_s = field<double>(rates, "rates.", "zeta_per_s");
    if (rates.contains("lambda_per_s"))
        cfg.lambda_per_s = field<double>(rates, "rates.", "lambda_per_s");
    if (rates.contains("throughput_gbit_per_s"))
        cfg.throughput_gbit_per_s = field<double>(rates, "rates.", "throughput_gbit_per_s");
    if (cfg.lambda_per_s.has_value() == cfg.throughput_gbit_per_s.has_value())
        throw ConfigError(
            "exactly one of rates.lambda_per_s / rates.throughput_gbit_per_s is required");

    const auto costs = field<nlohmann::json>(j, "", "costs");
    cfg.c1_dollars = field<double>(costs, "costs.", "c1_dollars");
    cfg.c2_dollars_per_gigabyte = field<double>(costs, "costs.", "c2_dollars_per_gigabyte");

    cfg.horizon_s = field<double>(j, "", "horizon_s");
    cfg.failed_servers = field<int>(j, "", "failed_servers");

    if (j.contains("margins")) {
        const auto m = j.at("margins");
        cfg.eps1 = field_or<double>(m, "margins.", "eps1", 0.0);
        cfg.eps2 = field_or<double>(m, "margins.", "eps2", 0.0);
    }
    if (j.contains("solver")) {
        const auto s = j.at("solver");
        cfg.solver_epsilon = field_or<double>(s, "solver.", "epsilon", 0.05);
        cfg.solver_step_fraction = field_or<int>(s, "solver.", "step_fraction", 2000);
    }
    if (j.contains("sim")) {
        const auto s = j.at("sim");
        cfg.sim_seed = field_or<std::uint64_t>(s, "sim.", "seed", 1);
        cfg.sim_runs = field_or<std::int64_t>(s, "sim.", "runs", 10000);
    }

    // Cross-field validation, with the offending field named.
    if (!(cfg.n > cfg.d && cfg.d > cfg.k && cfg.k > 0))
        throw ConfigError("code.n, code.d, code.k must satisfy n > d > k > 0");
    if (!(cfg.B_gigabytes > 0)) throw ConfigError("code.B_gigabytes must be > 0");
    if (cfg.mu_per_s < 0) throw ConfigError("rates.mu_per_s must be >= 0");
    if (!(cfg.zeta_per_s > 0)) throw ConfigError("rates.zeta_per_s must be > 0");
    if (cfg.lambda_per_s && !(*cfg.lambda_per_s > 0))
        throw ConfigError("rates.lambda_per_s must be > 0");
    if (cfg.throughput_gbit_per_s && !(*cfg.throughput_gbit_per_s > 0))
        throw ConfigError("rates.throughput_gbit_per_s must be > 0");
    if (cfg.c1_dollars < 0) throw ConfigError("costs.c1_dollars must be >= 0");
    if (cfg.c2_dollars_per_gigabyte < 0)
        throw ConfigError("costs.c2_dollars_per_gigabyte must be >= 0");
    if (!(cfg.horizon_s > 0)) throw ConfigError("horizon_s must be > 0");
    if (!(cfg.failed_servers > 0 && cfg.failed_servers <= cfg.n - cfg.d))
        throw ConfigError("failed_servers must satisfy 0 < r <= n - d");
    if (cfg.eps1 < 0 || cfg.eps2 < 0) throw ConfigError("margins must be >= 0");
    if (!(cfg.solver_epsilon > 0)) throw ConfigError("solver.epsilon must be > 0");
    if (cfg.solver_step_fraction < 1) throw ConfigError("solver.step_fraction must be >= 1");
    if (cfg.sim_runs < 1) throw ConfigError("sim.runs must be >= 1");
    return cfg;
}

inline ScenarioConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline nlohmann::json to_json(const ScenarioConfig& cfg) {
    nlohmann::json rates{{"mu_per_s", cfg.mu_per_s}, {"zeta_per_s", cfg.zeta_per_s}};
    if (cfg.lambda_per_s) rates["lambda_per_s"] = *cfg.lambda_per_s;
    if (cfg.throughput_gbit_per_s) rates["throughput_gbit_per_s"] = *cfg.throughput_gbit_per_s;
    return nlohmann::json{
        {"code",
         {{"variant", to_string(cfg.variant)},
          {"n", cfg.n},
          {"k", cfg.k},
          {"d", cfg.d},
          {"B_gigabytes", cfg.B_gigabytes}}},
        {"rates", rates},
        {"costs",
         {{"c1_dollars", cfg.c1_dollars},
          {"c2_dollars_per_gigabyte", cfg.c2_dollars_per_gigabyte}}},
        {"horizon_s", cfg.horizon_s},
        {"failed_servers", cfg.failed_servers},
        {"margins", {{"eps1", cfg.eps1}, {"eps2", cfg.eps2}}},
        {"solver",
         {{"epsilon", cfg.solver_epsilon}, {"step_fraction", cfg.solver_step_fraction}}},
        {"sim", {{"seed", cfg.sim_seed}, {"runs", cfg.sim_runs}}}};
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const FeasibilityReport& rep) {
    return nlohmann::json{{"feasible", rep.feasible},
                          {"x_d_terminal", rep.x_d_terminal},
                          {"x_d_min", rep.x_d_min},
                          {"mu_bar", rep.mu_bar},
                          {"binding", to_string(rep.binding)},
                          {"closed_form_feasible", rep.closed_form_feasible}};
}

inline nlohmann::json to_json(const SolveResult& sol) {
    return nlohmann::json{{"gamma_star", sol.gamma_star},
                          {"t_on", sol.policy.t_on},
                          {"t_off", sol.policy.t_off},
                          {"J_star", sol.cost},
                          {"J_gamma_star", sol.relaxed_cost},
                          {"x_d_terminal", sol.x_d_terminal},
                          {"iterations", sol.iterations},
                          {"converged", sol.converged},
                          {"path_constraint_ok", sol.path_constraint_ok}};
}

inline nlohmann::json to_json(const SimStats& stats) {
    nlohmann::json traj = nlohmann::json::array();
    for (std::size_t i = 0; i < stats.record_grid.size(); ++i)
        traj.push_back({{"t", stats.record_grid[i]}, {"mean_x", stats.mean_trajectory[i]}});
    return nlohmann::json{{"p_terminal_success", stats.p_terminal_success},
                          {"p_terminal_halfwidth", stats.p_terminal_halfwidth},
                          {"p_path_violation", stats.p_path_violation},
                          {"p_path_halfwidth", stats.p_path_halfwidth},
                          {"mean_cost", stats.mean_cost},
                          {"cost_se", stats.cost_se},
                          {"mean_terminal_xd", stats.mean_terminal_xd},
                          {"terminal_se", stats.terminal_se},
                          {"runs", stats.runs},
                          {"absorbed", stats.absorbed},
                          {"mean_trajectory", traj}};
}

}  // namespace regen
