#pragma once

#include "limitest/classify.hpp"
#include "limitest/dist.hpp"
#include "limitest/envelope.hpp"
#include "limitest/estimate.hpp"
#include "limitest/experiments.hpp"
#include "limitest/numeric.hpp"
#include "limitest/oracle.hpp"
#include "limitest/polyapprox.hpp"
#include "limitest/prob.hpp"
#include "limitest/regime.hpp"
