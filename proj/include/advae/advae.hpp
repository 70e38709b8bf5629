#pragma once

#include "advae/common.hpp"
#include "advae/data.hpp"
#include "advae/distributions.hpp"
#include "advae/games.hpp"
#include "advae/grad_suites.hpp"
#include "advae/models.hpp"
#include "advae/nn.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"
#include "advae/training.hpp"
