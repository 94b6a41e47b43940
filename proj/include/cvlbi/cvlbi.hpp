#pragma once

#include "cvlbi/errors.hpp"
#include "cvlbi/gaussian_core.hpp"
#include "cvlbi/states.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/random.hpp"
#include "cvlbi/fisher.hpp"
#include "cvlbi/schemes.hpp"
#include "cvlbi/estimate.hpp"
