#pragma once

#include "hyperbench/core.hpp"
#include "hyperbench/degrade.hpp"
#include "hyperbench/error.hpp"
#include "hyperbench/groundtruth.hpp"
#include "hyperbench/io.hpp"
#include "hyperbench/method.hpp"
#include "hyperbench/metrics.hpp"
#include "hyperbench/psf.hpp"
#include "hyperbench/runner.hpp"
#include "hyperbench/srf.hpp"
#include "hyperbench/synthetic.hpp"
