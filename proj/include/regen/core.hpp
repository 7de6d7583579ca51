#pragma once

// Repairing-code parameterization, system parameters and restoration-mode
// classification shared by every other header in this library.

#include <cmath>
#include <stdexcept>
#include <string>

namespace regen {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct InvalidTriple : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonPositiveSize : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IndexOutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class CodeVariant { MBR, MSR };

inline const char* to_string(CodeVariant v) {
    return v == CodeVariant::MBR ? "MBR" : "MSR";
}

/// Repairing code C=(n,k,d) with state size B and the derived chunk sizes.
/// alpha is the per-server stored chunk size, beta the per-helper transfer
/// size; both in gigabytes. Immutable after construction via make_code().
struct CodeSpec {
    CodeVariant variant = CodeVariant::MBR;
    int n = 0;        ///< total encoded chunks (= servers)
    int k = 0;        ///< data chunks
    int d = 0;        ///< repair degree (helpers per regeneration)
    double B = 0;     ///< state size, GB
    double alpha = 0; ///< stored chunk size, GB
    double beta = 0;  ///< repair transfer size, GB
};

/// Rates, costs and horizon of one regeneration scenario.
/// All counts are real-valued; the fluid model never rounds.
struct SystemParams {
    double mu = 0;     ///< repair-server failure rate, 1/s
    double lambda = 0; ///< chunk transfer completion rate, 1/s
    double zeta = 0;   ///< maximum activation rate, servers/s
    double c1 = 0;     ///< activation cost, $/server
    double c2 = 0;     ///< transfer cost, $/GB
    double T = 0;      ///< deadline, s
    double x_d0 = 0;   ///< operational repair servers at t=0
    double eps1 = 0;   ///< relative margin on the path constraint
    double eps2 = 0;   ///< relative margin on the terminal constraint
};

enum class RestorationMode { StateLost, FullRestorationOnly, Regeneration };

inline const char* to_string(RestorationMode m) {
    switch (m) {
        case RestorationMode::StateLost: return "StateLost";
        case RestorationMode::FullRestorationOnly: return "FullRestorationOnly";
        default: return "Regeneration";
    }
}

/// Constraint levels after applying the relative margins.
struct TightenedBounds {
    double n_tight = 0;
    double d_tight = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Builds a CodeSpec, deriving (alpha, beta) from the variant:
///   MBR: alpha = 2dB / (k(2d-k+1)),  beta = alpha / d
///   MSR: alpha = B / k,              beta = alpha / (d-k+1)
inline CodeSpec make_code(CodeVariant variant, int n, int k, int d, double B) {
    if (!(n > d && d > k && k > 0))
        throw InvalidTriple("code triple must satisfy n > d > k > 0, got (" +
                            std::to_string(n) + ", " + std::to_string(k) + ", " +
                            std::to_string(d) + ")");
    if (!(B > 0))
        throw NonPositiveSize("state size B must be positive, got " + std::to_string(B));

    CodeSpec c;
    c.variant = variant;
    c.n = n;
    c.k = k;
    c.d = d;
    c.B = B;
    if (variant == CodeVariant::MBR) {
        c.beta = 2.0 * B / (static_cast<double>(k) * (2.0 * d - k + 1.0));
        c.alpha = c.beta * d;
    } else {
        c.alpha = B / static_cast<double>(k);
        c.beta = c.alpha / static_cast<double>(d - k + 1);
    }
    return c;
}

/// Classifies what the surviving server count still allows.
/// Regeneration needs at least d operational repair servers; with at least
/// k the state can still be rebuilt by full restoration; below k it is lost.
inline RestorationMode restoration_mode(double x_d, const CodeSpec& code) {
    if (x_d < 0) throw InvalidParams("x_d must be nonnegative");
    if (x_d >= code.d) return RestorationMode::Regeneration;
    if (x_d >= code.k) return RestorationMode::FullRestorationOnly;
    return RestorationMode::StateLost;
}

/// Tightened constraint levels d' = (1+eps1) d, n' = (1+eps2) n.
/// Every downstream feasibility / terminal check uses these.
inline TightenedBounds apply_margins(double n, double d, double eps1, double eps2) {
    if (eps1 < 0 || eps2 < 0) throw InvalidParams("margins must be nonnegative");
    return TightenedBounds{(1.0 + eps2) * n, (1.0 + eps1) * d};
}

/// Compartment departure rate mu_k = mu + lambda (d - k): failure plus
/// next-chunk completion for a node holding k chunks. mu_d = mu.
inline double mu_rate(int k_index, const SystemParams& params, const CodeSpec& code) {
    if (k_index < 0 || k_index > code.d)
        throw IndexOutOfRange("compartment index " + std::to_string(k_index) +
                              " outside [0, " + std::to_string(code.d) + "]");
    return params.mu + params.lambda * static_cast<double>(code.d - k_index);
}

/// Validates the SystemParams invariants against a code.
inline void validate_params(const SystemParams& p, const CodeSpec& code) {
    if (p.mu < 0) throw InvalidParams("mu must be >= 0");
    if (!(p.lambda > 0)) throw InvalidParams("lambda must be > 0");
    if (!(p.zeta > 0)) throw InvalidParams("zeta must be > 0");
    if (!(p.T > 0)) throw InvalidParams("T must be > 0");
    if (p.c1 < 0 || p.c2 < 0) throw InvalidParams("costs must be >= 0");
    if (p.eps1 < 0 || p.eps2 < 0) throw InvalidParams("margins must be >= 0");
    if (p.x_d0 < code.d || p.x_d0 > code.n)
        throw InvalidParams("x_d0 must lie in [d, n] = [" + std::to_string(code.d) +
                            ", " + std::to_string(code.n) + "]");
}

inline TightenedBounds tightened(const SystemParams& p, const CodeSpec& code) {
    return apply_margins(code.n, code.d, p.eps1, p.eps2);
}

}  // namespace regen
