#pragma once

// Umbrella header.

#include "aqua/autodiff.hpp"
#include "aqua/backbone.hpp"
#include "aqua/checkpoint.hpp"
#include "aqua/config.hpp"
#include "aqua/dataset.hpp"
#include "aqua/errors.hpp"
#include "aqua/fft.hpp"
#include "aqua/illumination.hpp"
#include "aqua/image.hpp"
#include "aqua/metrics.hpp"
#include "aqua/ops.hpp"
#include "aqua/rng.hpp"
#include "aqua/spectral.hpp"
#include "aqua/tensor.hpp"
#include "aqua/training.hpp"
