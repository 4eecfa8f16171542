#pragma once

#include "cavityctl/linalg.hpp"
#include "cavityctl/hilbert.hpp"
#include "cavityctl/dynamics.hpp"
#include "cavityctl/bump.hpp"
#include "cavityctl/merit.hpp"
#include "cavityctl/controllability.hpp"
#include "cavityctl/optimize.hpp"
#include "cavityctl/config.hpp"
#include "cavityctl/io.hpp"
#include "cavityctl/workflows.hpp"
