#pragma once

// Umbrella header.

#include "errors.hpp"
#include "geometry.hpp"
#include "network.hpp"
#include "delaunay.hpp"
#include "mesh.hpp"
#include "elasticity.hpp"
#include "contact.hpp"
#include "aperture.hpp"
#include "flow.hpp"
#include "upscaling.hpp"
#include "config.hpp"
#include "runner.hpp"
