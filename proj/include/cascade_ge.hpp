#pragma once

// Umbrella header for the cascade-ge library.

#include "cascade_ge/common.hpp"
#include "cascade_ge/csv.hpp"
#include "cascade_ge/iotable.hpp"
#include "cascade_ge/cascade.hpp"
#include "cascade_ge/cces.hpp"
#include "cascade_ge/equilibrium.hpp"
#include "cascade_ge/fluctuations.hpp"
#include "cascade_ge/household.hpp"
#include "cascade_ge/dynge.hpp"
#include "cascade_ge/elasticity.hpp"
#include "cascade_ge/reference_values.hpp"
