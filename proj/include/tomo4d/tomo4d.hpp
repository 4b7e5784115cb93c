#pragma once

#include "tomo4d/artifact.hpp"
#include "tomo4d/common.hpp"
#include "tomo4d/config.hpp"
#include "tomo4d/fft.hpp"
#include "tomo4d/inr.hpp"
#include "tomo4d/io.hpp"
#include "tomo4d/metrics.hpp"
#include "tomo4d/motion.hpp"
#include "tomo4d/optimize.hpp"
#include "tomo4d/phantom.hpp"
#include "tomo4d/radon.hpp"
#include "tomo4d/recon.hpp"
#include "tomo4d/rng.hpp"
#include "tomo4d/schedule.hpp"
#include "tomo4d/sinogram.hpp"
#include "tomo4d/volume.hpp"
