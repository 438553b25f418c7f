#pragma once

#include "vfp/chang_cooper.hpp"
#include "vfp/config.hpp"
#include "vfp/diagnostics.hpp"
#include "vfp/error.hpp"
#include "vfp/experiment.hpp"
#include "vfp/fiber_jko.hpp"
#include "vfp/fibered_transport.hpp"
#include "vfp/functionals.hpp"
#include "vfp/grid.hpp"
#include "vfp/io.hpp"
#include "vfp/monotone_cdf.hpp"
#include "vfp/parallel.hpp"
#include "vfp/phase_space.hpp"
#include "vfp/reference.hpp"
#include "vfp/remap.hpp"
#include "vfp/scheme.hpp"
#include "vfp/tridiagonal.hpp"
