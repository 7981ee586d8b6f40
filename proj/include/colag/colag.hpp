#pragma once

#include "colag/config.hpp"
#include "colag/engine.hpp"
#include "colag/estimation.hpp"
#include "colag/geometry.hpp"
#include "colag/grid_map.hpp"
#include "colag/mapsync.hpp"
#include "colag/rng.hpp"
#include "colag/scenario.hpp"
#include "colag/sensors.hpp"
#include "colag/trace.hpp"
#include "colag/uav_sched.hpp"
#include "colag/ugv_nav.hpp"
