#pragma once

// Umbrella header.

#include "nsp/config.hpp"
#include "nsp/domain.hpp"
#include "nsp/gibbs.hpp"
#include "nsp/io.hpp"
#include "nsp/mask.hpp"
#include "nsp/math.hpp"
#include "nsp/metrics.hpp"
#include "nsp/models/document.hpp"
#include "nsp/models/gaussian.hpp"
#include "nsp/models/sequence.hpp"
#include "nsp/oracle.hpp"
#include "nsp/parallel.hpp"
#include "nsp/partition.hpp"
#include "nsp/rng.hpp"
#include "nsp/samplers.hpp"
#include "nsp/urn.hpp"
#include "nsp/vcoeff.hpp"
