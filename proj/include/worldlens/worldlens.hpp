#pragma once

// Umbrella header: the full library.

#include "worldlens/agents.hpp"
#include "worldlens/binomial.hpp"
#include "worldlens/csv.hpp"
#include "worldlens/extract.hpp"
#include "worldlens/goal.hpp"
#include "worldlens/harness.hpp"
#include "worldlens/monitor.hpp"
#include "worldlens/parse.hpp"
#include "worldlens/prob.hpp"
#include "worldlens/reach.hpp"
#include "worldlens/rng.hpp"
#include "worldlens/simulate.hpp"
#include "worldlens/svg.hpp"
#include "worldlens/world.hpp"
#include "worldlens/worldio.hpp"
