#pragma once

#include "chb/fem.hpp"

namespace chb {

/// Discrete fields at one time level.
struct State {
    double t = 0.0;
    FeFunction phi;
    FeFunction mu;
    FeFunction sigma;
    FeFunction v;
    FeFunction p;
};

} // namespace chb
