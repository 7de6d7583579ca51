#pragma once

// Test-only quadrature oracle, independent of the library's evaluation path:
// composite Gauss-Legendre panels with interval doubling until two successive
// refinements agree. Used to check closed-form integrals.

#include <cmath>
#include <functional>

namespace testing {

/// 10-point Gauss-Legendre on [a, b].
inline double gauss10(const std::function<double(double)>& f, double a, double b) {
    static const double xs[5] = {0.1488743389816312, 0.4333953941292472,
                                 0.6794095682990244, 0.8650633666889845,
                                 0.9739065285171717};
    static const double ws[5] = {0.2955242247147529, 0.2692667193099963,
                                 0.2190863625159820, 0.1494513491505806,
                                 0.0666713443086881};
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 5; ++i)
        s += ws[i] * (f(c + h * xs[i]) + f(c - h * xs[i]));
    return s * h;
}

/// Composite Gauss-Legendre with panel doubling to ~1e-13 relative agreement.
inline double integrate_oracle(const std::function<double(double)>& f, double a, double b) {
    double prev = gauss10(f, a, b);
    for (int panels = 2; panels <= 1 << 16; panels *= 2) {
        double s = 0.0;
        for (int i = 0; i < panels; ++i) {
            const double x0 = a + (b - a) * i / panels;
            const double x1 = a + (b - a) * (i + 1) / panels;
            s += gauss10(f, x0, x1);
        }
        if (std::abs(s - prev) <= 1e-13 * std::max(std::abs(s), 1e-300)) return s;
        prev = s;
    }
    return prev;
}

}  // namespace testing
