#include <catch2/catch_amalgamated.hpp>

#include "regen/config.hpp"
#include "scenario.hpp"

using namespace regen;

namespace {

nlohmann::json reference_json() {
    return nlohmann::json{
        {"code",
         {{"variant", "MBR"}, {"n", 50}, {"k", 10}, {"d", 20}, {"B_gigabytes", 10.0}}},
        {"rates", {{"mu_per_s", 0.001}, {"zeta_per_s", 10.0}, {"throughput_gbit_per_s", 1.0}}},
        {"costs", {{"c1_dollars", 10.0}, {"c2_dollars_per_gigabyte", 0.0}}},
        {"horizon_s", 3.5},
        {"failed_servers", 11},
        {"margins", {{"eps1", 0.0}, {"eps2", 0.0}}},
        {"solver", {{"epsilon", 0.05}, {"step_fraction", 2000}}},
        {"sim", {{"seed", 42}, {"runs", 1000}}}};
}

}  // namespace

TEST_CASE("throughput form reconstructs the transfer rate") {
    const auto cfg = parse_config(reference_json());
    const auto code = cfg.code();
    CHECK(cfg.lambda(code) == Catch::Approx(1.9375).epsilon(1e-12));
    const auto params = cfg.params(code);
    CHECK(params.x_d0 == 39.0);
    CHECK(params.T == 3.5);
    CHECK(cfg.step() == Catch::Approx(3.5 / 2000.0));
}

TEST_CASE("config round-trips through JSON") {
    auto j = reference_json();
    j["rates"].erase("throughput_gbit_per_s");
    j["rates"]["lambda_per_s"] = 1.9375;
    const auto cfg = parse_config(j);
    const auto cfg2 = parse_config(to_json(cfg));
    CHECK(cfg2.variant == cfg.variant);
    CHECK(cfg2.n == cfg.n);
    CHECK(cfg2.k == cfg.k);
    CHECK(cfg2.d == cfg.d);
    CHECK(cfg2.B_gigabytes == cfg.B_gigabytes);
    CHECK(cfg2.mu_per_s == cfg.mu_per_s);
    CHECK(cfg2.zeta_per_s == cfg.zeta_per_s);
    REQUIRE(cfg2.lambda_per_s.has_value());
    CHECK(*cfg2.lambda_per_s == *cfg.lambda_per_s);
    CHECK_FALSE(cfg2.throughput_gbit_per_s.has_value());
    CHECK(cfg2.c1_dollars == cfg.c1_dollars);
    CHECK(cfg2.c2_dollars_per_gigabyte == cfg.c2_dollars_per_gigabyte);
    CHECK(cfg2.horizon_s == cfg.horizon_s);
    CHECK(cfg2.failed_servers == cfg.failed_servers);
    CHECK(cfg2.eps1 == cfg.eps1);
    CHECK(cfg2.eps2 == cfg.eps2);
    CHECK(cfg2.solver_epsilon == cfg.solver_epsilon);
    CHECK(cfg2.solver_step_fraction == cfg.solver_step_fraction);
    CHECK(cfg2.sim_seed == cfg.sim_seed);
    CHECK(cfg2.sim_runs == cfg.sim_runs);
    // and the serialized forms agree exactly
    CHECK(to_json(cfg).dump() == to_json(cfg2).dump());
}

TEST_CASE("parse errors name the offending field") {
    auto j = reference_json();
    j["costs"].erase("c1_dollars");
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("costs.c1_dollars"));

    j = reference_json();
    j["code"]["variant"] = "RAID6";
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("code.variant"));

    j = reference_json();
    j["horizon_s"] = "soon";
    CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("horizon_s"));

    CHECK_THROWS_AS(parse_config(std::string("{not json")), ConfigError);
}

TEST_CASE("exactly one transfer-rate form is required") {
    auto j = reference_json();
    j["rates"]["lambda_per_s"] = 1.9375;  // both forms present
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j["rates"].erase("lambda_per_s");
    j["rates"].erase("throughput_gbit_per_s");
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("cross-field validation") {
    auto j = reference_json();
    j["failed_servers"] = 31;  // > n - d
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = reference_json();
    j["failed_servers"] = 0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = reference_json();
    j["sim"]["runs"] = 0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = reference_json();
    j["code"]["d"] = 5;  // d < k
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("optional sections fall back to defaults") {
    auto j = reference_json();
    j.erase("margins");
    j.erase("solver");
    j.erase("sim");
    const auto cfg = parse_config(j);
    CHECK(cfg.eps1 == 0.0);
    CHECK(cfg.eps2 == 0.0);
    CHECK(cfg.solver_epsilon == 0.05);
    CHECK(cfg.solver_step_fraction == 2000);
    CHECK(cfg.sim_runs == 10000);
}

TEST_CASE("cost units are coherent: scaling c2 against beta leaves J* unchanged") {
    // c2 in $/GB with beta in GB must price a chunk exactly like
    // c2 in $/Gbit with beta in Gbit: only the product c2 beta enters.
    const auto code = testing::reference_code();
    auto params = testing::reference_params(10.0, 100.0);
    const auto sol_gb = solve(params, code, 0.05);

    CodeSpec code_bits = code;
    code_bits.beta = code.beta * 8.0;    // Gbit
    code_bits.alpha = code.alpha * 8.0;
    params.c2 = 100.0 / 8.0;             // $/Gbit
    const auto sol_bits = solve(params, code_bits, 0.05);

    CHECK(sol_bits.cost == Catch::Approx(sol_gb.cost).epsilon(1e-9));
    CHECK(sol_bits.gamma_star == Catch::Approx(sol_gb.gamma_star).epsilon(1e-9));
}

TEST_CASE("result serialization carries the documented keys") {
    const auto code = testing::reference_code();
    const auto params = testing::reference_params(10.0, 0.0);
    const auto rep = feasibility_check(params, code);
    const auto j = to_json(rep);
    CHECK(j.at("feasible").get<bool>());
    CHECK(j.contains("mu_bar"));
    CHECK(j.contains("binding"));
    CHECK(j.contains("closed_form_feasible"));

    const auto sol = solve(params, code, 0.05);
    const auto js = to_json(sol);
    CHECK(js.at("t_on").get<double>() == 0.0);
    CHECK(js.contains("gamma_star"));
    CHECK(js.contains("J_star"));
    CHECK(js.contains("path_constraint_ok"));
}
