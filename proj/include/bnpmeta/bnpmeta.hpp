#pragma once

#include "bnpmeta/chain_io.hpp"
#include "bnpmeta/correlations.hpp"
#include "bnpmeta/csv.hpp"
#include "bnpmeta/dataset.hpp"
#include "bnpmeta/design.hpp"
#include "bnpmeta/digest.hpp"
#include "bnpmeta/distributions.hpp"
#include "bnpmeta/effect_size.hpp"
#include "bnpmeta/key_value.hpp"
#include "bnpmeta/mcmc.hpp"
#include "bnpmeta/model.hpp"
#include "bnpmeta/predictive.hpp"
#include "bnpmeta/random.hpp"
#include "bnpmeta/sbc.hpp"
#include "bnpmeta/version.hpp"
