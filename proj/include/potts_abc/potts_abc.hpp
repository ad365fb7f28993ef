#pragma once

// Umbrella header.

#include "abc_beta.hpp"
#include "align.hpp"
#include "alpha_rayleigh.hpp"
#include "alpha_rayleigh_model.hpp"
#include "array_io.hpp"
#include "config.hpp"
#include "experiment.hpp"
#include "gamma_model.hpp"
#include "hybrid_gibbs.hpp"
#include "label_field.hpp"
#include "lattice.hpp"
#include "observation_field.hpp"
#include "oracle.hpp"
#include "potts.hpp"
#include "rng.hpp"
#include "trunc_normal.hpp"
