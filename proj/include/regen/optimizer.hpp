#pragma once

// Cost functionals and the constrained solve: bisection on the terminal
// multiplier gamma, with feasibility gating and a cost sweep over (c1, c2).

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "regen/core.hpp"
#include "regen/fluid.hpp"
#include "regen/pontryagin.hpp"

namespace regen {

struct GridMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Infeasible : std::runtime_error {
    FeasibilityReport report;
    explicit Infeasible(FeasibilityReport r)
        : std::runtime_error("problem infeasible under full activation"),
          report(std::move(r)) {}
};

struct GammaDiscoveryFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Which evaluation of p0 drives policy extraction.
enum class P0Route { ClosedForm, AdjointOde };

/// One multiplier probe of the bisection, with the bracket that produced it.
struct GammaProbe {
    double gamma = 0;
    double x_d_terminal = 0;
    double x_d_terminal_lo = 0;  ///< terminal value at the bracket's left end
    double x_d_terminal_hi = 0;  ///< terminal value at the bracket's right end
};

struct SolveResult {
    double gamma_star = 0;
    ThresholdPolicy policy;
    FluidTrajectory trajectory;
    double cost = 0;          ///< J(u*)
    double relaxed_cost = 0;  ///< J_gamma*(u*)
    double x_d_terminal = 0;
    int iterations = 0;
    bool converged = false;
    bool path_constraint_ok = false;
    std::vector<GammaProbe> history;
};

struct EvalResult {
    ThresholdPolicy policy;
    FluidTrajectory trajectory;
    double x_d_terminal = 0;
};

// ---------------------------------------------------------------------------
// Cost functionals
// ---------------------------------------------------------------------------

/// Running cost J = int_0^T [ c1 zeta u + c2 beta sum_{i<d} lambda (d-i) X_i ] dv.
/// The activation term reduces exactly to c1 zeta (t_off - t_on) for threshold
/// policies; the transfer term is a trapezoid over the trajectory grid.
inline double running_cost(const FluidTrajectory& traj, const ThresholdPolicy& policy,
                           const SystemParams& params, const CodeSpec& code) {
    if (traj.grid.size() < 2 || traj.states.size() != traj.grid.size())
        throw GridMismatch("trajectory grid and states are inconsistent");
    if (std::abs(traj.grid.front()) > 1e-9 * params.T ||
        std::abs(traj.grid.back() - params.T) > 1e-9 * params.T)
        throw GridMismatch("trajectory must cover [0, T]");

    const double activation =
        params.c1 * params.zeta * std::max(0.0, policy.t_off - policy.t_on);
    if (params.c2 == 0.0) return activation;

    const int d = code.d;
    double transfer = 0.0;
    double prev_rate = 0.0;
    for (std::size_t i = 0; i < traj.grid.size(); ++i) {
        double rate = 0.0;
        for (int k = 0; k < d; ++k)
            rate += params.lambda * (d - k) * traj.states[i][static_cast<std::size_t>(k)];
        if (i > 0)
            transfer += 0.5 * (prev_rate + rate) * (traj.grid[i] - traj.grid[i - 1]);
        prev_rate = rate;
    }
    return activation + params.c2 * code.beta * transfer;
}

/// Relaxed objective J_gamma = J + gamma (n_tight - x_d_terminal).
inline double relaxed_cost(double j, double gamma, double x_d_terminal, double n_tight) {
    return j + gamma * (n_tight - x_d_terminal);
}

// ---------------------------------------------------------------------------
// Relaxed-problem evaluation and the constrained solve
// ---------------------------------------------------------------------------

/// Solves the relaxed problem for one multiplier: obtains p0 (closed form or
/// backward integration), extracts the threshold policy, and integrates the
/// dynamics forward under it.
inline EvalResult evaluate_gamma(const SystemParams& params, const CodeSpec& code,
                                 double gamma, double step,
                                 P0Route route = P0Route::ClosedForm) {
    EvalResult res;
    if (route == P0Route::ClosedForm) {
        res.policy = extract_policy(
            [&](double t) { return p0_closed_form(t, params, code, gamma); }, params);
    } else {
        const auto costates = adjoint_backward(params, code, gamma, step);
        res.policy = extract_policy(costates, params);
    }
    FluidState x0;
    x0.x.assign(static_cast<std::size_t>(code.d) + 1, 0.0);
    x0.x.back() = params.x_d0;
    res.trajectory = integrate(params, code, to_control(res.policy), x0, step);
    res.x_d_terminal = res.trajectory.terminal_xd();
    return res;
}

/// Constrained solve: feasibility gate, bracket discovery by doubling, then
/// bisection on gamma (left half when X_d(T) overshoots n_tight, right half
/// otherwise) until |X_d(T) - n_tight| <= epsilon. The path constraint is
/// verified on the final trajectory and reported, not enforced.
inline SolveResult solve(const SystemParams& params, const CodeSpec& code,
                         double epsilon = 0.05, double step = 0.0,
                         P0Route route = P0Route::ClosedForm) {
    if (!(epsilon > 0)) throw InvalidParams("epsilon must be positive");
    if (step <= 0) step = params.T / 2000.0;
    validate_params(params, code);
    const auto tb = tightened(params, code);

    const auto feas = feasibility_check(params, code, tb.n_tight, tb.d_tight, step);
    if (!feas.feasible) throw Infeasible(feas);

    SolveResult out;
    const auto finish = [&](double gamma, EvalResult eval, int iterations) {
        out.gamma_star = gamma;
        out.policy = eval.policy;
        out.x_d_terminal = eval.x_d_terminal;
        out.iterations = iterations;
        out.converged = true;
        out.path_constraint_ok = eval.trajectory.min_xd() >= tb.d_tight - 1e-9;
        out.cost = running_cost(eval.trajectory, eval.policy, params, code);
        out.relaxed_cost = relaxed_cost(out.cost, gamma, eval.x_d_terminal, tb.n_tight);
        out.trajectory = std::move(eval.trajectory);
        return out;
    };

    // gamma = 0 probe; the constraint may already hold (e.g. x_d0 = n, mu = 0).
    auto eval0 = evaluate_gamma(params, code, 0.0, step, route);
    const double x_at_zero = eval0.x_d_terminal;
    out.history.push_back({0.0, x_at_zero, x_at_zero, x_at_zero});
    if (std::abs(x_at_zero - tb.n_tight) <= epsilon) return finish(0.0, std::move(eval0), 0);

    // Bracket discovery: double gamma until the terminal constraint is met.
    double gamma_hi = 1.0;
    double x_hi = 0.0;
    bool bracketed = false;
    for (int i = 0; i < 60; ++i) {
        auto eval = evaluate_gamma(params, code, gamma_hi, step, route);
        x_hi = eval.x_d_terminal;
        out.history.push_back({gamma_hi, x_hi, x_at_zero, x_hi});
        if (std::abs(x_hi - tb.n_tight) <= epsilon)
            return finish(gamma_hi, std::move(eval), static_cast<int>(out.history.size()) - 1);
        if (x_hi >= tb.n_tight) {
            bracketed = true;
            break;
        }
        gamma_hi *= 2.0;
    }
    if (!bracketed)
        throw GammaDiscoveryFailed("no multiplier with X_d(T) >= n found within 60 doublings");

    double gamma_lo = 0.0;
    double x_lo = x_at_zero;
    for (int it = 1; it <= 200; ++it) {
        const double gamma = 0.5 * (gamma_lo + gamma_hi);
        auto eval = evaluate_gamma(params, code, gamma, step, route);
        out.history.push_back({gamma, eval.x_d_terminal, x_lo, x_hi});
        if (std::abs(eval.x_d_terminal - tb.n_tight) <= epsilon)
            return finish(gamma, std::move(eval), it);
        if (eval.x_d_terminal > tb.n_tight) {
            gamma_hi = gamma;
            x_hi = eval.x_d_terminal;
        } else {
            gamma_lo = gamma;
            x_lo = eval.x_d_terminal;
        }
    }
    throw NoConvergence("bisection did not meet |X_d(T) - n| <= epsilon in 200 iterations");
}

// ---------------------------------------------------------------------------
// Cost sweep
// ---------------------------------------------------------------------------

struct SweepCell {
    double c1 = 0;
    double c2 = 0;
    double j_star = std::nan("");
    double gamma_star = std::nan("");
    double t_on = std::nan("");
    double t_off = std::nan("");
    int iterations = 0;
    bool converged = false;
    std::string error;  ///< empty on success
};

/// Runs solve() per (c1, c2) cell; per-cell failures are recorded in the cell
/// and the sweep continues.
inline std::vector<SweepCell> sweep(const SystemParams& params_base, const CodeSpec& code,
                                    const std::vector<double>& c1_list,
                                    const std::vector<double>& c2_list,
                                    double epsilon = 0.05, double step = 0.0) {
    if (c1_list.empty() || c2_list.empty())
        throw InvalidParams("sweep requires nonempty cost lists");
    std::vector<SweepCell> cells;
    cells.reserve(c1_list.size() * c2_list.size());
    for (double c1 : c1_list) {
        for (double c2 : c2_list) {
            SweepCell cell;
            cell.c1 = c1;
            cell.c2 = c2;
            SystemParams p = params_base;
            p.c1 = c1;
            p.c2 = c2;
            try {
                const auto sol = solve(p, code, epsilon, step);
                cell.j_star = sol.cost;
                cell.gamma_star = sol.gamma_star;
                cell.t_on = sol.policy.t_on;
                cell.t_off = sol.policy.t_off;
                cell.iterations = sol.iterations;
                cell.converged = sol.converged;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

/// Sweep table as CSV: c1, c2, J_star, gamma_star, t_on, t_off, iterations,
/// converged. Failed cells carry nan values and converged = 0.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
    os << "c1,c2,J_star,gamma_star,t_on,t_off,iterations,converged\n";
    char buf[32];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        os << buf;
    };
    for (const auto& c : cells) {
        put(c.c1);
        os << ',';
        put(c.c2);
        os << ',';
        put(c.j_star);
        os << ',';
        put(c.gamma_star);
        os << ',';
        put(c.t_on);
        os << ',';
        put(c.t_off);
        os << ',' << c.iterations << ',' << (c.converged ? 1 : 0) << '\n';
    }
}

}  // namespace regen
