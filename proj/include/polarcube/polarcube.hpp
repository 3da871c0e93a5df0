/**
 * @file polarcube.hpp
 * @brief Umbrella header.
 */
#pragma once

#include "analysis.hpp"
#include "camera.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "image.hpp"
#include "inr.hpp"
#include "labels.hpp"
#include "parallel.hpp"
#include "pca.hpp"
#include "reconstruct.hpp"
#include "scenes.hpp"
#include "spsi.hpp"
#include "stokes.hpp"
#include "system_matrix.hpp"
