#pragma once

// Umbrella header for the conditional-diffusion MRI reconstruction library.

#include "diffrecon/image.hpp"
#include "diffrecon/random.hpp"
#include "diffrecon/fft.hpp"
#include "diffrecon/masks.hpp"
#include "diffrecon/forward_model.hpp"
#include "diffrecon/schedule.hpp"
#include "diffrecon/denoiser.hpp"
#include "diffrecon/sampler.hpp"
#include "diffrecon/metrics.hpp"
#include "diffrecon/tensor_io.hpp"
#include "diffrecon/phantom.hpp"
#include "diffrecon/checkpoint.hpp"
