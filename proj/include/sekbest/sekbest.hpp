#pragma once

#include "sekbest/channel.hpp"
#include "sekbest/complexity.hpp"
#include "sekbest/config.hpp"
#include "sekbest/detector.hpp"
#include "sekbest/error.hpp"
#include "sekbest/harness.hpp"
#include "sekbest/modem.hpp"
#include "sekbest/numerics.hpp"
