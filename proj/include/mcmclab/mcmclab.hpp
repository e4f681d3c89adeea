#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "markov_core.hpp"
#include "spectral.hpp"
#include "lyapunov.hpp"
#include "models.hpp"
#include "sampler.hpp"
#include "contkernel.hpp"
#include "io.hpp"
