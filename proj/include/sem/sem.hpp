#pragma once

#include "sem/audit.hpp"
#include "sem/demand.hpp"
#include "sem/equilibrium.hpp"
#include "sem/experiments.hpp"
#include "sem/lindahl.hpp"
#include "sem/market.hpp"
#include "sem/market_io.hpp"
#include "sem/mechanism.hpp"
#include "sem/report.hpp"
#include "sem/rounding.hpp"
#include "sem/service.hpp"
#include "sem/trace.hpp"
