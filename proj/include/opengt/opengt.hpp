#pragma once

#include "opengt/agent.hpp"
#include "opengt/costs.hpp"
#include "opengt/engine.hpp"
#include "opengt/errors.hpp"
#include "opengt/oracle.hpp"
#include "opengt/scenario.hpp"
#include "opengt/scenario_io.hpp"
#include "opengt/topology.hpp"
#include "opengt/trace_io.hpp"
#include "opengt/world.hpp"
