#pragma once

#include "pdpm/errors.hpp"
#include "pdpm/random.hpp"
#include "pdpm/var_core.hpp"
#include "pdpm/dp_engine.hpp"
#include "pdpm/model.hpp"
#include "pdpm/samplers.hpp"
#include "pdpm/chain.hpp"
#include "pdpm/simgen.hpp"
#include "pdpm/metrics.hpp"
#include "pdpm/io.hpp"
#include "pdpm/cli.hpp"
