#pragma once

// Adjoint (costate) machinery: backward integration of the dual ODE system,
// the closed form of the switching multiplier p0, extrema classification,
// threshold-policy extraction and the pure-activation analytic solution.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "regen/core.hpp"
#include "regen/fluid.hpp"

namespace regen {

struct MultipleIntervals : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPureActivation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Bang-bang control fully described by its switch epochs:
/// u(t) = 1 on (t_on, t_off), 0 elsewhere. t_on == t_off is the null control.
struct ThresholdPolicy {
    double t_on = 0;
    double t_off = 0;

    bool is_null() const { return t_off <= t_on; }
    double u(double t) const { return (t > t_on && t < t_off) ? 1.0 : 0.0; }
};

inline Control to_control(const ThresholdPolicy& policy) {
    Control c;
    c.u = [policy](double t) { return policy.u(t); };
    if (!policy.is_null()) c.switch_epochs = {policy.t_on, policy.t_off};
    return c;
}

/// Costates p_0..p_d on a time grid, integrated backward from the terminal
/// conditions p_k(T) = 0 (k < d), p_d(T) = -gamma.
struct CostateTrajectory {
    std::vector<double> grid;
    std::vector<std::vector<double>> p;
    double gamma = 0;

    double p0(std::size_t i) const { return p[i].front(); }
    /// p0 at time t by linear interpolation.
    double p0_at(double t) const {
        const auto it = std::lower_bound(grid.begin(), grid.end(), t);
        if (it == grid.begin()) return p.front().front();
        if (it == grid.end()) return p.back().front();
        const auto hi = static_cast<std::size_t>(it - grid.begin());
        const double w = (t - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
        return (1.0 - w) * p[hi - 1].front() + w * p[hi].front();
    }
    /// Full costate vector at time t by linear interpolation.
    std::vector<double> p_at(double t) const {
        const auto it = std::lower_bound(grid.begin(), grid.end(), t);
        if (it == grid.begin()) return p.front();
        if (it == grid.end()) return p.back();
        const auto hi = static_cast<std::size_t>(it - grid.begin());
        const double w = (t - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
        std::vector<double> out(p[hi].size());
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = (1.0 - w) * p[hi - 1][j] + w * p[hi][j];
        return out;
    }
};

enum class ExtremaKind { Empty, MinOnly, MaxOnly, MinMax };

inline const char* to_string(ExtremaKind k) {
    switch (k) {
        case ExtremaKind::Empty: return "Empty";
        case ExtremaKind::MinOnly: return "MinOnly";
        case ExtremaKind::MaxOnly: return "MaxOnly";
        default: return "MinMax";
    }
}

/// Interior extremal points of p0 on (0,T). With a positive transfer cost the
/// possible shapes are Empty, MaxOnly and MinMax; with c2 == 0 the trailing
/// maximum degenerates into the boundary t = T and an interior minimum stands
/// alone, reported as MinOnly.
struct ExtremaSet {
    ExtremaKind kind = ExtremaKind::Empty;
    std::optional<double> t_m;  ///< minimizer, present iff a minimum exists
    std::optional<double> m;    ///< p0(t_m)
    std::optional<double> t_M;  ///< maximizer, present iff a maximum exists
    std::optional<double> M;    ///< p0(t_M)
};

/// Auxiliary quantities of the pure-activation (c2 == 0) analytic solution.
struct PureActivationDiagnostics {
    double mu_crit = 0;  ///< critical failure rate (clamped at 0)
    double t_min = 0;    ///< argmin of p0 over the real line (-inf if mu == 0)
    double m_value = 0;  ///< min of p0 over the real line
    double z_on = 0;     ///< left root of (1-z) = (c1/gamma)^{1/d} z^{-mu/(lambda d)}
    double z_off = 0;    ///< right root
};

// ---------------------------------------------------------------------------
// Adjoint system
// ---------------------------------------------------------------------------

/// Integrates the costate ODE backward from t = T with fixed-step RK4:
///   dp_k/dt = mu_k p_k - (d-k) lambda p_{k+1} - c2 beta lambda (d-k),  k < d
///   dp_d/dt = mu p_d
/// On feasible arcs the augmentation costate is identically zero and is not
/// carried. The returned grid is ascending.
inline CostateTrajectory adjoint_backward(const SystemParams& params, const CodeSpec& code,
                                          double gamma, double step) {
    if (!(step > 0) || step > params.T) throw StepTooLarge("step must lie in (0, T]");
    if (gamma < 0) throw InvalidParams("gamma must be nonnegative");

    const int d = code.d;
    const auto dim = static_cast<std::size_t>(d) + 1;
    const auto n_steps = static_cast<std::size_t>(std::ceil(params.T / step - 1e-12));
    const double h = params.T / static_cast<double>(n_steps);

    const auto rhs = [&](const std::vector<double>& p, std::vector<double>& out) {
        for (int k = 0; k < d; ++k) {
            const double mu_k = params.mu + params.lambda * (d - k);
            out[static_cast<std::size_t>(k)] =
                mu_k * p[static_cast<std::size_t>(k)] -
                (d - k) * params.lambda * p[static_cast<std::size_t>(k + 1)] -
                params.c2 * code.beta * params.lambda * (d - k);
        }
        out[static_cast<std::size_t>(d)] = params.mu * p[static_cast<std::size_t>(d)];
    };

    std::vector<double> p(dim, 0.0);
    p.back() = -gamma;

    CostateTrajectory traj;
    traj.gamma = gamma;
    traj.grid.resize(n_steps + 1);
    traj.p.assign(n_steps + 1, std::vector<double>());
    traj.grid[n_steps] = params.T;
    traj.p[n_steps] = p;

    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    for (std::size_t i = n_steps; i-- > 0;) {
        // one RK4 step of size -h
        rhs(p, k1);
        for (std::size_t j = 0; j < dim; ++j) tmp[j] = p[j] - 0.5 * h * k1[j];
        rhs(tmp, k2);
        for (std::size_t j = 0; j < dim; ++j) tmp[j] = p[j] - 0.5 * h * k2[j];
        rhs(tmp, k3);
        for (std::size_t j = 0; j < dim; ++j) tmp[j] = p[j] - h * k3[j];
        rhs(tmp, k4);
        for (std::size_t j = 0; j < dim; ++j) {
            p[j] -= h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if (!std::isfinite(p[j])) throw NonFiniteState("non-finite costate");
        }
        traj.grid[i] = params.T * static_cast<double>(i) / static_cast<double>(n_steps);
        traj.p[i] = p;
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Closed form of p0
// ---------------------------------------------------------------------------

namespace detail {

/// Adaptive Simpson quadrature (recursive bisection with Richardson check).
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// rel_tol is interpreted relative to a coarse whole-interval estimate;
/// intended for nonnegative integrands.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol) {
    if (!(b > a)) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole,
                            std::max(std::abs(whole), 1e-300) * rel_tol, 48);
}

}  // namespace detail

/// I_k(tau) = integral_0^tau (e^{lambda v} - 1)^k e^{-(mu + lambda d) v} dv,
/// the inner integral of the p0 closed form.
///
/// Evaluated by the binomial expansion
///   sum_{j=0}^{k} C(k,j) (-1)^{k-j} (1 - e^{-(mu+lambda(d-j)) tau}) / (mu+lambda(d-j))
/// with compensated summation; the alternating terms cancel catastrophically
/// for large k, so when more than six decimal digits are lost the evaluation
/// falls back to adaptive quadrature of the integrand.
inline double g_integral(int k, double tau, const SystemParams& params, const CodeSpec& code) {
    if (k < 0 || k >= code.d)
        throw IndexOutOfRange("g_integral requires 0 <= k <= d-1");
    if (tau < 0) throw InvalidParams("tau must be nonnegative");
    if (tau == 0) return 0.0;

    const double lam = params.lambda, mu = params.mu;
    const int d = code.d;

    double sum = 0.0, comp = 0.0, max_term = 0.0;
    double binom = 1.0;  // C(k, j), updated incrementally
    for (int j = 0; j <= k; ++j) {
        const double r = mu + lam * (d - j);
        const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
        const double term = sign * binom * (-std::expm1(-r * tau)) / r;
        max_term = std::max(max_term, std::abs(term));
        const double y = term - comp;  // Kahan
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        binom *= static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
    if (max_term <= 1e6 * std::abs(sum) && std::isfinite(sum)) return sum;

    // Cancellation guard tripped (more than ~6 digits lost). Substitute
    // w = e^{-lambda v}: I_k = (1/lambda) int_{e^{-lambda tau}}^{1}
    // (1-w)^k w^{mu/lambda + d - k - 1} dw, a bounded Beta-type kernel.
    const double p = mu / lam + static_cast<double>(d - k) - 1.0;
    const auto integrand = [&](double w) {
        return std::pow(1.0 - w, static_cast<double>(k)) * std::pow(w, p);
    };
    return detail::integrate_adaptive(integrand, std::exp(-lam * tau), 1.0, 1e-12) / lam;
}

/// F(t) = gamma (1 - e^{-lambda (T-t)})^d e^{-mu (T-t)}, the homogeneous part
/// of the p0 closed form (and all of it when c2 == 0).
inline double p0_homogeneous(double t, const SystemParams& params, const CodeSpec& code,
                             double gamma) {
    const double tau = params.T - t;
    return gamma * std::pow(-std::expm1(-params.lambda * tau), code.d) *
           std::exp(-params.mu * tau);
}

/// p0(t) = -F(t) + G(t) with
///   F(t) = gamma (1-e^{-lambda(T-t)})^d e^{-mu(T-t)}
///   G(t) = c2 beta d lambda sum_k C(d-1,k) I_k(T-t)
/// The binomial sum over I_k telescopes to a single exponential
/// (differentiate: sum_k C(d-1,k)(e^{lambda v}-1)^k = e^{lambda(d-1)v}), which
/// is what is evaluated here; the per-term form is g_integral().
inline double p0_closed_form(double t, const SystemParams& params, const CodeSpec& code,
                             double gamma) {
    const double tau = params.T - t;
    const double F = p0_homogeneous(t, params, code, gamma);
    if (params.c2 == 0.0) return -F;
    const double r = params.mu + params.lambda;
    const double G = params.c2 * code.beta * code.d * params.lambda *
                     (-std::expm1(-r * tau)) / r;
    return -F + G;
}

/// Analytic derivative of p0:
///   dp0/dt = gamma e^{-mu tau} (1-e^{-lambda tau})^{d-1}
///                ((mu + lambda d) e^{-lambda tau} - mu)
///            - c2 beta lambda d e^{-(lambda+mu) tau},        tau = T - t.
inline double p0_derivative(double t, const SystemParams& params, const CodeSpec& code,
                            double gamma) {
    const double tau = params.T - t;
    const double lam = params.lambda, mu = params.mu;
    const int d = code.d;
    const double pure = gamma * std::exp(-mu * tau) *
                        std::pow(-std::expm1(-lam * tau), d - 1) *
                        ((mu + lam * d) * std::exp(-lam * tau) - mu);
    return pure - params.c2 * code.beta * lam * d * std::exp(-(lam + mu) * tau);
}

// ---------------------------------------------------------------------------
// Policy extraction
// ---------------------------------------------------------------------------

namespace detail {

/// Bisects f to a sign change inside [a,b]; f(a) and f(b) must differ in sign.
/// Runs past the requested tolerance down to floating-point resolution so the
/// residual at the returned root is evaluation-limited.
inline double bisect_root(const std::function<double(double)>& f, double a, double b,
                          double fa) {
    for (int i = 0; i < 120 && b - a > 0; ++i) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Extracts the threshold policy induced by the switching law u = 1 exactly
/// where p0(t) < -c1. The active set is located by sign-change bracketing on
/// a dense grid followed by bisection refinement of p0(t) + c1 = 0 (absolute
/// time tolerance well under 1e-6 T). Returns the null policy when p0 >= -c1
/// everywhere; more than one crossing interval violates the threshold
/// structure and raises MultipleIntervals.
inline ThresholdPolicy extract_policy(const std::function<double(double)>& p0,
                                      const SystemParams& params,
                                      std::size_t scan_points = 4096) {
    const double T = params.T;
    const auto f = [&](double t) { return p0(t) + params.c1; };

    std::vector<std::pair<std::size_t, std::size_t>> runs;  // index ranges with f < 0
    bool in_run = false;
    std::size_t run_start = 0;
    std::vector<double> ts(scan_points + 1), fs(scan_points + 1);
    for (std::size_t i = 0; i <= scan_points; ++i) {
        ts[i] = T * static_cast<double>(i) / static_cast<double>(scan_points);
        fs[i] = f(ts[i]);
        const bool neg = fs[i] < 0.0;
        if (neg && !in_run) {
            in_run = true;
            run_start = i;
        } else if (!neg && in_run) {
            in_run = false;
            runs.emplace_back(run_start, i - 1);
        }
    }
    if (in_run) runs.emplace_back(run_start, scan_points);

    if (runs.empty()) return ThresholdPolicy{0.0, 0.0};
    if (runs.size() > 1)
        throw MultipleIntervals("switching function crosses -c1 on " +
                                std::to_string(runs.size()) + " disjoint intervals");

    const auto [lo, hi] = runs.front();
    ThresholdPolicy pol;
    pol.t_on = (lo == 0) ? 0.0 : detail::bisect_root(f, ts[lo - 1], ts[lo], fs[lo - 1]);
    pol.t_off = (hi == scan_points) ? T : detail::bisect_root(f, ts[hi], ts[hi + 1], fs[hi]);
    return pol;
}

inline ThresholdPolicy extract_policy(const CostateTrajectory& costates,
                                      const SystemParams& params) {
    return extract_policy([&](double t) { return costates.p0_at(t); }, params);
}

// ---------------------------------------------------------------------------
// Extrema classification
// ---------------------------------------------------------------------------

/// Locates the interior critical points of p0 on (0,T) from sign changes of
/// its analytic derivative. With c2 > 0 the outcome is one of Empty, MaxOnly,
/// MinMax; the degenerate c2 == 0 shape (interior minimum, boundary maximum
/// at T) is reported as MinOnly.
inline ExtremaSet classify_extrema(const SystemParams& params, const CodeSpec& code,
                                   double gamma, std::size_t scan_points = 8192) {
    const double T = params.T;
    const auto dp = [&](double t) { return p0_derivative(t, params, code, gamma); };

    struct Crossing {
        double t;
        bool minimum;  // derivative goes - to +
    };
    std::vector<Crossing> crossings;
    double prev_t = 0.0, prev_v = dp(0.0);
    for (std::size_t i = 1; i <= scan_points; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(scan_points);
        const double v = dp(t);
        if (prev_v != 0.0 && v != 0.0 && (prev_v < 0) != (v < 0)) {
            const double root = detail::bisect_root(dp, prev_t, t, prev_v);
            if (root > 0.0 && root < T) crossings.push_back({root, prev_v < 0});
        }
        prev_t = t;
        prev_v = v;
    }

    ExtremaSet out;
    const auto value = [&](double t) { return p0_closed_form(t, params, code, gamma); };
    if (crossings.empty()) {
        out.kind = ExtremaKind::Empty;
    } else if (crossings.size() == 1) {
        const auto& c = crossings.front();
        if (c.minimum) {
            out.kind = ExtremaKind::MinOnly;
            out.t_m = c.t;
            out.m = value(c.t);
        } else {
            out.kind = ExtremaKind::MaxOnly;
            out.t_M = c.t;
            out.M = value(c.t);
        }
    } else {
        // Two sign changes: a minimum followed by a maximum. More than two is
        // numerically spurious (near-tangency); keep the first min / last max.
        out.kind = ExtremaKind::MinMax;
        for (const auto& c : crossings) {
            if (c.minimum && !out.t_m) {
                out.t_m = c.t;
                out.m = value(c.t);
            }
            if (!c.minimum) {
                out.t_M = c.t;
                out.M = value(c.t);
            }
        }
        if (!out.t_m || !out.t_M) {
            // inconsistent pattern; fall back to the single dominant extremum
            const auto& c = crossings.front();
            out = ExtremaSet{};
            out.kind = c.minimum ? ExtremaKind::MinOnly : ExtremaKind::MaxOnly;
            (c.minimum ? out.t_m : out.t_M) = c.t;
            (c.minimum ? out.m : out.M) = value(c.t);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pure activation (c2 == 0) analytic solution
// ---------------------------------------------------------------------------

/// Analytic threshold policy for the pure-activation relaxed problem.
///
/// The switching epochs come from the roots z_on <= z_off in [0,1] of
///   (1 - z) = (c1/gamma)^{1/d} z^{-mu/(lambda d)}
/// via t = T + log(z)/lambda. Case selection follows the sign of
/// p0(0) + c1 (single switch when p0(0) <= -c1) and the minimum value m
/// (null policy when m >= -c1).
inline std::pair<ThresholdPolicy, PureActivationDiagnostics> pure_activation_solve(
    const SystemParams& params, const CodeSpec& code, double gamma) {
    if (params.c2 != 0.0)
        throw NotPureActivation("analytic solution requires c2 == 0");
    if (gamma < 0) throw InvalidParams("gamma must be nonnegative");

    const double lam = params.lambda, mu = params.mu, T = params.T, c1 = params.c1;
    const int d = code.d;

    PureActivationDiagnostics diag;
    const double ramp_T = -std::expm1(-lam * T);  // 1 - e^{-lambda T}
    const double ratio = gamma > 0 ? std::pow(gamma / std::max(c1, 1e-300), 1.0 / d) : 0.0;
    diag.mu_crit = std::max(0.0, (d / T) * std::log(std::max(ratio * ramp_T, 1e-300)));

    if (mu > 0) {
        diag.t_min = T - std::log1p(d * lam / mu) / lam;
        diag.m_value = -gamma * std::pow(lam * d / (mu + lam * d), d) *
                       std::pow(mu / (mu + lam * d), mu / lam);
    } else {
        // p0 is increasing everywhere; the infimum -gamma is approached as t -> -inf.
        diag.t_min = -std::numeric_limits<double>::infinity();
        diag.m_value = -gamma;
    }

    // psi(z) = (1-z) z^{mu/(lambda d)} peaks at z* = mu/(mu+lambda d);
    // roots exist iff psi(z*) exceeds the target (c1/gamma)^{1/d},
    // which is exactly m < -c1.
    const double expo = mu / (lam * d);
    const double target = gamma > 0 ? std::pow(c1 / gamma, 1.0 / d)
                                    : std::numeric_limits<double>::infinity();
    const auto psi = [&](double z) { return (1.0 - z) * std::pow(z, expo); };
    const double z_star = mu / (mu + lam * d);

    ThresholdPolicy pol{0.0, 0.0};
    const double psi_peak = mu > 0 ? psi(z_star) : 1.0;
    if (psi_peak <= target) return {pol, diag};  // null control (case ii)

    // Right root on [z*, 1]: psi decreasing.
    {
        double lo = z_star, hi = 1.0;
        for (int i = 0; i < 200 && hi - lo > 0; ++i) {
            const double m = 0.5 * (lo + hi);
            (psi(m) > target ? lo : hi) = m;
        }
        diag.z_off = 0.5 * (lo + hi);
    }
    // Left root on (0, z*]: psi increasing; bisect geometrically since the
    // root can be astronomically small when mu/(lambda d) is tiny.
    if (mu > 0) {
        double lo = std::numeric_limits<double>::min(), hi = z_star;
        for (int i = 0; i < 400 && hi > lo; ++i) {
            const double m = std::sqrt(lo * hi);
            if (m <= lo || m >= hi) break;
            (psi(m) < target ? lo : hi) = m;
        }
        diag.z_on = 0.5 * (lo + hi);
    } else {
        diag.z_on = 0.0;
    }

    pol.t_off = T + std::log(diag.z_off) / lam;
    pol.t_on = diag.z_on > 0 ? std::max(0.0, T + std::log(diag.z_on) / lam) : 0.0;
    if (pol.t_on >= pol.t_off) pol = ThresholdPolicy{0.0, 0.0};
    return {pol, diag};
}

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

/// H(X, u, p) = zeta (c1 + p0) u + sum_k [-mu_k X_k] p_k
///            + sum_{k>=1} lambda (d-k+1) X_{k-1} p_k
///            + c2 beta sum_{i<d} lambda (d-i) X_i,
/// the augmentation term being zero on feasible arcs (X_d >= d).
inline double hamiltonian(const std::vector<double>& state, double u,
                          const std::vector<double>& costate,
                          const SystemParams& params, const CodeSpec& code) {
    const auto dim = static_cast<std::size_t>(code.d) + 1;
    if (state.size() != dim || costate.size() != dim)
        throw DimensionMismatch("state and costate must both have d+1 entries");
    const int d = code.d;
    double h = params.zeta * (params.c1 + costate[0]) * u;
    for (int k = 0; k <= d; ++k) {
        const double mu_k = params.mu + params.lambda * (d - k);
        h -= mu_k * state[static_cast<std::size_t>(k)] * costate[static_cast<std::size_t>(k)];
        if (k >= 1)
            h += params.lambda * (d - k + 1) * state[static_cast<std::size_t>(k - 1)] *
                 costate[static_cast<std::size_t>(k)];
        if (k < d)
            h += params.c2 * code.beta * params.lambda * (d - k) *
                 state[static_cast<std::size_t>(k)];
    }
    return h;
}

/// Writes the costate trajectory as CSV with columns t, p0, ..., pd.
inline void write_costate_csv(std::ostream& os, const CostateTrajectory& traj) {
    const std::size_t dim = traj.p.front().size();
    os << "t";
    for (std::size_t j = 0; j < dim; ++j) os << ",p" << j;
    os << "\n";
    char buf[32];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < traj.grid.size(); ++i) {
        put(traj.grid[i]);
        for (std::size_t j = 0; j < dim; ++j) {
            os << ',';
            put(traj.p[i][j]);
        }
        os << '\n';
    }
}

}  // namespace regen
