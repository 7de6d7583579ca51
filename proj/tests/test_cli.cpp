// Integration tests that drive the regenctl binary end to end.
// The binary path arrives in the REGENCTL environment variable (set by ctest).

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

const std::string& binary() {
    static const std::string path = [] {
        const char* env = std::getenv("REGENCTL");
        REQUIRE(env != nullptr);
        return std::string(env);
    }();
    return path;
}

const std::filesystem::path& workdir() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("regenctl_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    RunResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string write_config(const std::string& name, const nlohmann::json& j) {
    const auto path = workdir() / name;
    std::ofstream f(path);
    f << j.dump(2);
    return path.string();
}

nlohmann::json base_config() {
    return nlohmann::json{
        {"code",
         {{"variant", "MBR"}, {"n", 50}, {"k", 10}, {"d", 20}, {"B_gigabytes", 10.0}}},
        {"rates", {{"mu_per_s", 0.001}, {"zeta_per_s", 10.0}, {"throughput_gbit_per_s", 1.0}}},
        {"costs", {{"c1_dollars", 10.0}, {"c2_dollars_per_gigabyte", 0.0}}},
        {"horizon_s", 3.5},
        {"failed_servers", 11},
        {"sim", {{"seed", 7}, {"runs", 200}}}};
}

nlohmann::json parse_output(const std::string& text) {
    return nlohmann::json::parse(text);
}

}  // namespace

TEST_CASE("feasibility reports the reference scenario") {
    const auto cfg = write_config("ref.json", base_config());
    const auto res = run("feasibility --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto j = parse_output(res.output);
    CHECK(j.at("feasible").get<bool>());
    CHECK_FALSE(j.at("closed_form_feasible").get<bool>());
    CHECK(j.at("x_d_terminal").get<double>() >= 50.0);
}

TEST_CASE("feasibility treats an infeasible system as a result, not an error") {
    auto j = base_config();
    j["rates"]["zeta_per_s"] = 0.01;
    const auto cfg = write_config("weak.json", j);
    const auto res = run("feasibility --config " + cfg);
    REQUIRE(res.exit_code == 0);
    CHECK_FALSE(parse_output(res.output).at("feasible").get<bool>());
}

TEST_CASE("malformed config exits 2 and names the field") {
    const auto path = workdir() / "broken.json";
    std::ofstream(path) << "{\"code\": {";
    auto res = run("feasibility --config " + path.string());
    CHECK(res.exit_code == 2);

    auto j = base_config();
    j["costs"].erase("c1_dollars");
    const auto cfg = write_config("missing.json", j);
    res = run("solve --config " + cfg);
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("costs.c1_dollars") != std::string::npos);
}

TEST_CASE("solve reproduces the reference optimum and emits time series") {
    const auto out_dir = (workdir() / "series").string();
    const auto cfg = write_config("ref.json", base_config());
    const auto res = run("solve --config " + cfg + " --emit-trajectories " + out_dir);
    REQUIRE(res.exit_code == 0);
    const auto j = parse_output(res.output);
    CHECK(j.at("t_on").get<double>() == 0.0);
    CHECK(j.at("t_off").get<double>() > 1.17);
    CHECK(j.at("t_off").get<double>() < 1.27);
    CHECK(j.at("gamma_star").get<double>() >= 12.75);
    CHECK(j.at("gamma_star").get<double>() <= 12.85);
    CHECK(j.at("converged").get<bool>());

    for (const char* name : {"p0.csv", "u.csv", "xd.csv", "trajectory.csv", "costate.csv"}) {
        const auto path = std::filesystem::path(out_dir) / name;
        REQUIRE(std::filesystem::exists(path));
    }
    std::ifstream p0(std::filesystem::path(out_dir) / "p0.csv");
    std::string header;
    std::getline(p0, header);
    CHECK(header == "t,p0");
}

TEST_CASE("solve with transfer costs lands in the published multiplier band") {
    auto j = base_config();
    j["costs"]["c2_dollars_per_gigabyte"] = 100.0;
    const auto cfg = write_config("c2.json", j);
    const auto res = run("solve --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto out = parse_output(res.output);
    CHECK(out.at("gamma_star").get<double>() >= 175.5);
    CHECK(out.at("gamma_star").get<double>() <= 176.2);
}

TEST_CASE("solve exits 3 when infeasible") {
    auto j = base_config();
    j["rates"]["zeta_per_s"] = 0.01;
    const auto cfg = write_config("inf.json", j);
    CHECK(run("solve --config " + cfg).exit_code == 3);
}

TEST_CASE("solve exits 4 when the bisection cannot meet the tolerance") {
    auto j = base_config();
    j["solver"] = {{"epsilon", 1e-300}, {"step_fraction", 200}};
    const auto cfg = write_config("tight.json", j);
    CHECK(run("solve --config " + cfg).exit_code == 4);
}

TEST_CASE("a single failed server needs only a brief activation burst") {
    auto j = base_config();
    j["rates"]["mu_per_s"] = 0.0;
    j["failed_servers"] = 1;
    const auto cfg = write_config("one_failure.json", j);
    const auto res = run("solve --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto out = parse_output(res.output);
    CHECK(out.at("converged").get<bool>());
    // replacing one server costs far less than the 11-failure reference cell
    CHECK(out.at("J_star").get<double>() > 0.0);
    CHECK(out.at("J_star").get<double>() < 122.5);
}

TEST_CASE("sweep emits one row per cost cell") {
    const auto cfg = write_config("ref.json", base_config());
    const auto res = run("sweep --config " + cfg + " --c1 10 --c2 0");
    REQUIRE(res.exit_code == 0);
    std::istringstream is(res.output);
    std::string line;
    std::getline(is, line);
    CHECK(line == "c1,c2,J_star,gamma_star,t_on,t_off,iterations,converged");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1);
}

TEST_CASE("simulate is deterministic and validates its inputs") {
    const auto cfg = write_config("ref.json", base_config());
    const auto a = run("simulate --config " + cfg + " --policy 0,1.22");
    const auto b = run("simulate --config " + cfg + " --policy 0,1.22");
    REQUIRE(a.exit_code == 0);
    CHECK(a.output == b.output);  // byte-identical JSON for a fixed seed

    auto j = base_config();
    j["sim"]["runs"] = 0;
    const auto bad = write_config("zeroruns.json", j);
    CHECK(run("simulate --config " + bad + " --policy 0,1.22").exit_code == 2);

    CHECK(run("simulate --config " + cfg).exit_code == 2);  // no policy given
    CHECK(run("simulate --config " + cfg + " --policy 2,1").exit_code == 2);
}

TEST_CASE("simulate --from-solve fails with exit 3 on infeasible scenarios") {
    auto j = base_config();
    j["rates"]["zeta_per_s"] = 0.01;
    const auto cfg = write_config("inf2.json", j);
    CHECK(run("simulate --config " + cfg + " --from-solve").exit_code == 3);
}

TEST_CASE("simulate writes the per-run CSV on request") {
    const auto cfg = write_config("ref.json", base_config());
    const auto per_run = (workdir() / "runs.csv").string();
    const auto res = run("simulate --config " + cfg + " --policy 0,1.22 --per-run " + per_run);
    REQUIRE(res.exit_code == 0);
    std::ifstream f(per_run);
    std::string header;
    std::getline(f, header);
    CHECK(header == "run,terminal_xd,min_xd,cost,absorbed");
}

TEST_CASE("dimension finds the minimal feasible horizon") {
    const auto cfg = write_config("ref.json", base_config());
    const auto res = run("dimension --config " + cfg + " --target T");
    REQUIRE(res.exit_code == 0);
    const auto j = parse_output(res.output);
    const double t_min = j.at("minimal_feasible_value").get<double>();
    CHECK(t_min <= 3.5);
    CHECK(t_min > 0.0);
    CHECK(j.contains("mu_bar"));
}

TEST_CASE("dimension handles the transfer-rate and repair-degree targets") {
    const auto cfg = write_config("ref.json", base_config());

    auto res = run("dimension --config " + cfg + " --target lambda");
    REQUIRE(res.exit_code == 0);
    const double lam_min = parse_output(res.output).at("minimal_feasible_value").get<double>();
    CHECK(lam_min > 0.0);
    CHECK(lam_min <= 1.9375);

    // In throughput form beta (hence lambda) is re-derived per candidate d:
    // smaller repair degrees mean bigger chunks and slower repairs, so some
    // minimal d makes the deadline.
    res = run("dimension --config " + cfg + " --target d");
    REQUIRE(res.exit_code == 0);
    const double d_min = parse_output(res.output).at("minimal_feasible_value").get<double>();
    CHECK(d_min > 10.0);  // k = 10 floor
    CHECK(d_min <= 20.0);
}

TEST_CASE("results are copied into the --out directory") {
    const auto cfg = write_config("ref.json", base_config());
    const auto out = (workdir() / "outdir").string();
    REQUIRE(run("feasibility --config " + cfg + " --out " + out).exit_code == 0);
    REQUIRE(run("sweep --config " + cfg + " --c1 10 --c2 0 --out " + out).exit_code == 0);
    CHECK(std::filesystem::exists(std::filesystem::path(out) / "feasibility.json"));
    CHECK(std::filesystem::exists(std::filesystem::path(out) / "sweep.csv"));
}

TEST_CASE("dimension rejects inverted bounds and impossible targets") {
    const auto cfg = write_config("ref.json", base_config());
    CHECK(run("dimension --config " + cfg + " --target T --lo 3 --hi 1").exit_code == 2);
    CHECK(run("dimension --config " + cfg + " --target nonsense").exit_code == 2);
    // even the full horizon is infeasible with a crippled activation rate
    auto j = base_config();
    j["rates"]["zeta_per_s"] = 0.01;
    const auto weak = write_config("weak2.json", j);
    CHECK(run("dimension --config " + weak + " --target T").exit_code == 3);
}

TEST_CASE("unknown flags are a configuration error") {
    CHECK(run("solve --no-such-flag").exit_code == 2);
}
