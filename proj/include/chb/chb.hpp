#pragma once

#include "chb/cahn_hilliard.hpp"
#include "chb/config.hpp"
#include "chb/diagnostics.hpp"
#include "chb/discretization.hpp"
#include "chb/fem.hpp"
#include "chb/flow.hpp"
#include "chb/mesh.hpp"
#include "chb/nutrient.hpp"
#include "chb/params.hpp"
#include "chb/radial.hpp"
#include "chb/solvers.hpp"
#include "chb/sparse.hpp"
#include "chb/state.hpp"
#include "chb/stepper.hpp"
