#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "field.hpp"
#include "fft.hpp"
#include "spectrum.hpp"
#include "random.hpp"
#include "expression.hpp"
#include "htpf.hpp"
#include "parallel.hpp"
#include "time_calculus.hpp"
#include "cylinder.hpp"
#include "coefficients.hpp"
#include "operator.hpp"
#include "gmres.hpp"
#include "solver.hpp"
#include "oscillation.hpp"
