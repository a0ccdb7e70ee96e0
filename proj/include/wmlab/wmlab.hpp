#pragma once

#include "wmlab/diagnostics.hpp"
#include "wmlab/errors.hpp"
#include "wmlab/fem1d.hpp"
#include "wmlab/kriging.hpp"
#include "wmlab/matern.hpp"
#include "wmlab/matern_check.hpp"
#include "wmlab/matrix_io.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/quadrature.hpp"
#include "wmlab/spectral.hpp"
#include "wmlab/version.hpp"
