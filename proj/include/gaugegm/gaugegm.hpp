#pragma once

#include "gaugegm/errors.hpp"
#include "gaugegm/model.hpp"
#include "gaugegm/exact.hpp"
#include "gaugegm/convert.hpp"
#include "gaugegm/gauge.hpp"
#include "gaugegm/cycle.hpp"
#include "gaugegm/optimizer.hpp"
#include "gaugegm/mean_field.hpp"
#include "gaugegm/bp.hpp"
#include "gaugegm/bethe_gauge.hpp"
#include "gaugegm/gauged.hpp"
#include "gaugegm/correction.hpp"
#include "gaugegm/generators.hpp"
#include "gaugegm/metrics.hpp"
#include "gaugegm/experiment.hpp"
