#pragma once

// Umbrella header.

#include "wallforge/error.hpp"
#include "wallforge/linalg.hpp"
#include "wallforge/model.hpp"
#include "wallforge/asymptotics.hpp"
#include "wallforge/heteroclinic.hpp"
#include "wallforge/quadrature.hpp"
#include "wallforge/spectral.hpp"
#include "wallforge/bifurcation.hpp"
#include "wallforge/config.hpp"
#include "wallforge/io.hpp"
#include "wallforge/cli.hpp"
