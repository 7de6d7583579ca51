#pragma once

// Exact event-driven simulation of the controlled regeneration Markov chain,
// used to validate the fluid approximation and to estimate constraint
// violation probabilities and the cost distribution of a threshold policy.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <vector>

#include "regen/core.hpp"
#include "regen/pontryagin.hpp"

namespace regen {

// ---------------------------------------------------------------------------
// Counter-based splittable RNG
// ---------------------------------------------------------------------------

/// SplitMix64: 64-bit state, one multiply-xor-shift finalizer per draw.
struct SplitMix64 {
    std::uint64_t state = 0;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t next() { return mix(state += 0x9E3779B97F4A7C15ULL); }

    /// Uniform on (0,1); never returns 0, so log() is safe.
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }
    double exponential(double rate) { return -std::log(uniform01()) / rate; }

    /// Independent per-path stream: a scrambled counter seed.
    static SplitMix64 for_path(std::uint64_t seed, std::uint64_t path_index) {
        return SplitMix64{mix(mix(seed) + path_index)};
    }
};

// ---------------------------------------------------------------------------
// Configuration and statistics
// ---------------------------------------------------------------------------

struct SimConfig {
    std::uint64_t seed = 0;
    std::int64_t runs = 1;
    std::vector<double> record_grid;  ///< times to sample the mean trajectory at
    /// eq-mdp omits failures of operational (compartment-d) nodes while the
    /// fluid model includes them; this flag adds the rate mu x_d so the chain
    /// matches the fluid drift.
    bool operational_failures = false;
    /// Success / violation thresholds; 0 means "use code.n / code.d".
    double n_target = 0;
    double d_floor = 0;
};

struct SimStats {
    double p_terminal_success = 0;  ///< P(X_d(T) >= n)
    double p_terminal_halfwidth = 0;
    double p_path_violation = 0;  ///< P(min_t X_d(t) < d)
    double p_path_halfwidth = 0;
    double mean_cost = 0;
    double cost_se = 0;
    double mean_terminal_xd = 0;
    double terminal_se = 0;
    std::int64_t runs = 0;
    std::int64_t absorbed = 0;  ///< paths that hit X_d < k
    std::vector<double> record_grid;
    std::vector<std::vector<double>> mean_trajectory;  ///< per record time, mean (X_0..X_d)
};

enum class EventKind { Activation, Failure, Transfer };

struct PathEvent {
    double time = 0;
    EventKind kind = EventKind::Activation;
    int compartment = 0;  ///< failed compartment, or destination for transfers
};

struct PathResult {
    std::vector<std::int64_t> terminal;
    double cost = 0;
    double min_xd = 0;
    bool absorbed = false;
    std::vector<PathEvent> events;                ///< filled iff record_events
    std::vector<std::vector<double>> recorded;    ///< state at each record time
};

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

/// Simulates one sample path of the chain under a threshold policy.
///
/// Within any span where u is constant the total event rate is
///   R = zeta u + mu sum_{k<d} x_k [+ mu x_d] + sum_{k=1..d} (d-k+1) lambda x_{k-1};
/// the next event time is exponential(R) truncated at the next switch epoch,
/// where rates are re-read (valid by memorylessness). Events: activation adds
/// a node to compartment 0 (cost c1), a failure removes its node, a transfer
/// moves a node one compartment up (cost c2 beta). The path ends at T, or
/// earlier in the absorbing set x_d < k.
inline PathResult simulate_path(const SystemParams& params, const CodeSpec& code,
                                const ThresholdPolicy& policy,
                                const std::vector<std::int64_t>& x0, SplitMix64 rng,
                                const SimConfig& config = {},
                                bool record_events = false,
                                const std::vector<double>& extra_epochs = {}) {
    const int d = code.d;
    if (x0.size() != static_cast<std::size_t>(d) + 1)
        throw InvalidParams("initial state dimension must be d+1");

    std::vector<std::int64_t> x = x0;
    PathResult res;
    res.min_xd = static_cast<double>(x.back());

    // Segment boundaries: policy switches plus any caller-injected epochs.
    std::vector<double> bounds;
    if (!policy.is_null()) {
        bounds.push_back(policy.t_on);
        bounds.push_back(policy.t_off);
    }
    for (double e : extra_epochs) bounds.push_back(e);
    bounds.push_back(params.T);
    std::sort(bounds.begin(), bounds.end());

    std::size_t rec_idx = 0;
    const auto record_until = [&](double t) {
        while (rec_idx < config.record_grid.size() && config.record_grid[rec_idx] <= t) {
            res.recorded.emplace_back(x.begin(), x.end());
            ++rec_idx;
        }
    };

    double t = 0.0;
    bool absorbed = false;
    record_until(0.0);
    for (double seg_end : bounds) {
        if (absorbed || seg_end <= t) continue;
        if (seg_end > params.T) seg_end = params.T;
        const double u = policy.u(0.5 * (t + seg_end));
        while (t < seg_end) {
            double rate = params.zeta * u;
            for (int kk = 0; kk < d; ++kk) rate += params.mu * static_cast<double>(x[kk]);
            if (config.operational_failures) rate += params.mu * static_cast<double>(x[d]);
            for (int kk = 1; kk <= d; ++kk)
                rate += (d - kk + 1) * params.lambda * static_cast<double>(x[kk - 1]);

            if (rate <= 0.0) {
                record_until(seg_end);
                t = seg_end;
                break;
            }
            const double dt = rng.exponential(rate);
            if (t + dt >= seg_end) {  // truncated; rates re-read next segment
                record_until(seg_end);
                t = seg_end;
                break;
            }
            t += dt;
            record_until(t);

            // Select the event proportionally to the individual rates.
            double pick = rng.uniform01() * rate;
            PathEvent ev;
            ev.time = t;
            bool chosen = false;
            if (pick < params.zeta * u) {
                ++x[0];
                res.cost += params.c1;
                ev.kind = EventKind::Activation;
                ev.compartment = 0;
                chosen = true;
            } else {
                pick -= params.zeta * u;
            }
            if (!chosen) {
                const int fail_top = config.operational_failures ? d : d - 1;
                for (int kk = 0; kk <= fail_top && !chosen; ++kk) {
                    const double r = params.mu * static_cast<double>(x[kk]);
                    if (pick < r) {
                        --x[kk];
                        ev.kind = EventKind::Failure;
                        ev.compartment = kk;
                        chosen = true;
                    } else {
                        pick -= r;
                    }
                }
            }
            if (!chosen) {
                // Walk the transfer rates; roundoff leaks land on the last
                // compartment with a positive rate.
                int target = -1;
                for (int kk = 1; kk <= d; ++kk) {
                    const double r =
                        (d - kk + 1) * params.lambda * static_cast<double>(x[kk - 1]);
                    if (r <= 0.0) continue;
                    target = kk;
                    if (pick < r) break;
                    pick -= r;
                }
                if (target < 0) continue;  // pure roundoff residue: no event
                --x[target - 1];
                ++x[target];
                res.cost += params.c2 * code.beta;
                ev.kind = EventKind::Transfer;
                ev.compartment = target;
            }
            if (record_events) res.events.push_back(ev);
            res.min_xd = std::min(res.min_xd, static_cast<double>(x[d]));
            if (x[d] < code.k) {  // state lost: absorbing
                absorbed = true;
                break;
            }
        }
    }
    record_until(params.T);  // absorbed paths keep their frozen state
    res.terminal = x;
    res.absorbed = absorbed;
    return res;
}

// ---------------------------------------------------------------------------
// Monte Carlo aggregation
// ---------------------------------------------------------------------------

/// Runs `config.runs` independent paths with per-path streams derived from
/// `config.seed` by a counter scheme; single-threaded and bit-reproducible
/// for fixed seed and run count.
inline SimStats monte_carlo(const SystemParams& params, const CodeSpec& code,
                            const ThresholdPolicy& policy, const SimConfig& config) {
    if (config.runs < 1) throw InvalidParams("runs must be >= 1");
    for (double t : config.record_grid)
        if (t < 0 || t > params.T) throw InvalidParams("record_grid must lie in [0, T]");

    const double n_target = config.n_target > 0 ? config.n_target : code.n;
    const double d_floor = config.d_floor > 0 ? config.d_floor : code.d;

    std::vector<std::int64_t> x0(static_cast<std::size_t>(code.d) + 1, 0);
    x0.back() = static_cast<std::int64_t>(std::llround(params.x_d0));

    SimStats stats;
    stats.runs = config.runs;
    stats.record_grid = config.record_grid;
    stats.mean_trajectory.assign(config.record_grid.size(),
                                 std::vector<double>(x0.size(), 0.0));

    std::int64_t successes = 0, violations = 0;
    double cost_sum = 0.0, cost_comp = 0.0;  // Kahan
    double cost_sq = 0.0;
    double term_sum = 0.0, term_sq = 0.0;
    for (std::int64_t i = 0; i < config.runs; ++i) {
        const auto path = simulate_path(params, code, policy, x0,
                                        SplitMix64::for_path(config.seed,
                                                             static_cast<std::uint64_t>(i)),
                                        config);
        const auto terminal_xd = static_cast<double>(path.terminal.back());
        if (terminal_xd >= n_target) ++successes;
        if (path.min_xd < d_floor) ++violations;
        if (path.absorbed) ++stats.absorbed;
        const double y = path.cost - cost_comp;
        const double s = cost_sum + y;
        cost_comp = (s - cost_sum) - y;
        cost_sum = s;
        cost_sq += path.cost * path.cost;
        term_sum += terminal_xd;
        term_sq += terminal_xd * terminal_xd;
        for (std::size_t g = 0; g < path.recorded.size(); ++g)
            for (std::size_t j = 0; j < path.recorded[g].size(); ++j)
                stats.mean_trajectory[g][j] += path.recorded[g][j];
    }

    const auto runs = static_cast<double>(config.runs);
    stats.p_terminal_success = static_cast<double>(successes) / runs;
    stats.p_path_violation = static_cast<double>(violations) / runs;
    const auto halfwidth = [runs](double p) {
        return 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / runs);
    };
    stats.p_terminal_halfwidth = halfwidth(stats.p_terminal_success);
    stats.p_path_halfwidth = halfwidth(stats.p_path_violation);
    stats.mean_cost = cost_sum / runs;
    const double var = std::max(0.0, cost_sq / runs - stats.mean_cost * stats.mean_cost);
    stats.cost_se = config.runs > 1 ? std::sqrt(var / (runs - 1.0)) : 0.0;
    stats.mean_terminal_xd = term_sum / runs;
    const double term_var =
        std::max(0.0, term_sq / runs - stats.mean_terminal_xd * stats.mean_terminal_xd);
    stats.terminal_se = config.runs > 1 ? std::sqrt(term_var / (runs - 1.0)) : 0.0;
    for (auto& v : stats.mean_trajectory)
        for (auto& e : v) e /= runs;
    return stats;
}

/// Per-run CSV: run, terminal_xd, min_xd, cost, absorbed.
inline void write_runs_csv(std::ostream& os, const SystemParams& params,
                           const CodeSpec& code, const ThresholdPolicy& policy,
                           const SimConfig& config) {
    std::vector<std::int64_t> x0(static_cast<std::size_t>(code.d) + 1, 0);
    x0.back() = static_cast<std::int64_t>(std::llround(params.x_d0));
    os << "run,terminal_xd,min_xd,cost,absorbed\n";
    char buf[32];
    for (std::int64_t i = 0; i < config.runs; ++i) {
        const auto path = simulate_path(params, code, policy, x0,
                                        SplitMix64::for_path(config.seed,
                                                             static_cast<std::uint64_t>(i)),
                                        config);
        std::snprintf(buf, sizeof buf, "%.6g", path.cost);
        os << i << ',' << path.terminal.back() << ',' << path.min_xd << ',' << buf << ','
           << (path.absorbed ? 1 : 0) << '\n';
    }
}

}  // namespace regen
