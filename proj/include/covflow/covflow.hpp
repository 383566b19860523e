#pragma once

#include "covflow/grid.hpp"
#include "covflow/cutoff.hpp"
#include "covflow/fields.hpp"
#include "covflow/gauge.hpp"
#include "covflow/evolve.hpp"
#include "covflow/transform.hpp"
#include "covflow/monitors.hpp"
#include "covflow/carleman.hpp"
#include "covflow/config.hpp"
#include "covflow/pipeline.hpp"
