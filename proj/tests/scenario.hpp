#pragma once

// Shared test fixtures: the reference MBR(50,10,20) scenario and a smaller
// fast-transfer variant whose optimal policy has a genuine activation delay.

#include "regen/core.hpp"

namespace testing {

/// MBR(50,10,20), B = 10 GB, 1 Gbit/s repair throughput, 11 failed servers.
inline regen::CodeSpec reference_code() {
    return regen::make_code(regen::CodeVariant::MBR, 50, 10, 20, 10.0);
}

inline regen::SystemParams reference_params(double c1 = 10.0, double c2 = 0.0) {
    const auto code = reference_code();
    regen::SystemParams p;
    p.mu = 0.001;
    p.lambda = 1.0 / (8.0 * code.beta);  // 1 Gbit/s over beta-sized chunks
    p.zeta = 10.0;
    p.c1 = c1;
    p.c2 = c2;
    p.T = 3.5;
    p.x_d0 = 39.0;
    return p;
}

/// Lighter code whose repair pipeline fills fast enough that a delayed start
/// keeps the path constraint intact; pairs with delayed_params().
inline regen::CodeSpec delayed_code() {
    return regen::make_code(regen::CodeVariant::MBR, 50, 5, 10, 10.0);
}

/// Fast transfers and a high failure rate: the optimal policy waits before
/// activating (t_on > 0), exercising the two-switch case.
inline regen::SystemParams delayed_params(double c1 = 10.0, double c2 = 0.0) {
    regen::SystemParams p;
    p.mu = 0.4;
    p.lambda = 10.0;
    p.zeta = 40.0;
    p.c1 = c1;
    p.c2 = c2;
    p.T = 3.5;
    p.x_d0 = 39.0;
    return p;
}

}  // namespace testing
