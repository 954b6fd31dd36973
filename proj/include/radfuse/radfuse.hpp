#pragma once

#include "radfuse/core.hpp"
#include "radfuse/imaging.hpp"
#include "radfuse/image_io.hpp"
#include "radfuse/segmentation.hpp"
#include "radfuse/features.hpp"
#include "radfuse/learners/subensemble.hpp"
#include "radfuse/calibration.hpp"
#include "radfuse/evaluation.hpp"
#include "radfuse/manifest.hpp"
#include "radfuse/phantoms.hpp"
#include "radfuse/config.hpp"
#include "radfuse/commands.hpp"
