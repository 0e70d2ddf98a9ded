#pragma once

#include "twoport/errors.hpp"
#include "twoport/linalg.hpp"
#include "twoport/model.hpp"
#include "twoport/fisher.hpp"
#include "twoport/nelder_mead.hpp"
#include "twoport/parallel.hpp"
#include "twoport/estimation.hpp"
#include "twoport/experiments/config.hpp"
#include "twoport/experiments/runners.hpp"
#include "twoport/experiments/artifacts.hpp"
