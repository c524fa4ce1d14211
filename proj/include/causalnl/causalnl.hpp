#ifndef CAUSALNL_CAUSALNL_HPP
#define CAUSALNL_CAUSALNL_HPP

#include "causalnl/adam.hpp"
#include "causalnl/checkpoint.hpp"
#include "causalnl/common.hpp"
#include "causalnl/conv.hpp"
#include "causalnl/datasets.hpp"
#include "causalnl/evaluation.hpp"
#include "causalnl/graph.hpp"
#include "causalnl/losses.hpp"
#include "causalnl/matrix.hpp"
#include "causalnl/model.hpp"
#include "causalnl/nn.hpp"
#include "causalnl/noise.hpp"
#include "causalnl/plot.hpp"
#include "causalnl/png.hpp"
#include "causalnl/training.hpp"

#endif
