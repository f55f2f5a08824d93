#ifndef SPILLOVER_IV_HPP
#define SPILLOVER_IV_HPP

#include "spillover_iv/assumptions.hpp"
#include "spillover_iv/bounds.hpp"
#include "spillover_iv/compliance.hpp"
#include "spillover_iv/dataset.hpp"
#include "spillover_iv/diagnostics.hpp"
#include "spillover_iv/enumeration.hpp"
#include "spillover_iv/estimand.hpp"
#include "spillover_iv/estimate.hpp"
#include "spillover_iv/fixtures.hpp"
#include "spillover_iv/moments.hpp"
#include "spillover_iv/oracle.hpp"
#include "spillover_iv/parallel.hpp"
#include "spillover_iv/population.hpp"
#include "spillover_iv/random_spec.hpp"
#include "spillover_iv/rng.hpp"
#include "spillover_iv/search.hpp"
#include "spillover_iv/simulate.hpp"

#endif  // SPILLOVER_IV_HPP
