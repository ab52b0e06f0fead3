#pragma once

#include "analysis.hpp"
#include "assembly.hpp"
#include "core.hpp"
#include "element.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"
#include "simulation.hpp"
#include "timeloop.hpp"
#include "verification.hpp"
