#pragma once

// Umbrella header.

#include "pcnn/autograd.hpp"
#include "pcnn/centered.hpp"
#include "pcnn/checkpoint.hpp"
#include "pcnn/config.hpp"
#include "pcnn/coupling.hpp"
#include "pcnn/csv.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/dft.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/footprint.hpp"
#include "pcnn/geometry.hpp"
#include "pcnn/layers.hpp"
#include "pcnn/linalg.hpp"
#include "pcnn/metrics.hpp"
#include "pcnn/network.hpp"
#include "pcnn/noise.hpp"
#include "pcnn/quadrature.hpp"
#include "pcnn/sweep.hpp"
#include "pcnn/trainer.hpp"
#include "pcnn/transfer.hpp"
