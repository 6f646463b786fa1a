#pragma once

#include "lmmg/baselines.hpp"
#include "lmmg/fit.hpp"
#include "lmmg/gradients.hpp"
#include "lmmg/init.hpp"
#include "lmmg/io.hpp"
#include "lmmg/metrics.hpp"
#include "lmmg/model.hpp"
#include "lmmg/oracle.hpp"
#include "lmmg/predict.hpp"
#include "lmmg/select.hpp"
#include "lmmg/synth.hpp"
#include "lmmg/types.hpp"
