#pragma once

#include "aoi/cost.hpp"

namespace aoi {

/// Per-user two-dimensional state: queuing delay of the newest buffered
/// packet (a >= 1) and the generation-time gap between that packet and the
/// freshest delivered one (d >= 0, 0 = nothing fresher to send).
/// Age of the delivered information is h = a + d.
struct UeState {
    int a = 1;
    int d = 0;

    int age() const { return a + d; }

    friend bool operator==(const UeState& x, const UeState& y) {
        return x.a == y.a && x.d == y.d;
    }
};

/// Per-user parameters: packet generation probability, transmission error
/// probability, and the cost-of-age function charged each slot.
struct UeConfig {
    double lambda = 1.0;
    double epsilon = 0.0;
    CostFunction cost = CostFunction::linear();
};

} // namespace aoi
