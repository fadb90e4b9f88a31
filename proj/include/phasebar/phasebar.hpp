#pragma once

#include "phasebar/error.hpp"
#include "phasebar/phase_type.hpp"
#include "phasebar/valuefn.hpp"
#include "phasebar/solver.hpp"
#include "phasebar/verifier.hpp"
#include "phasebar/simulator.hpp"
#include "phasebar/io.hpp"
