#pragma once

// Umbrella header. Pull in everything: system representation, analytic
// continuation, monodromy, deformation flows, the worked example family,
// and file formats.

#include "version.hpp"
#include "errors.hpp"
#include "core.hpp"
#include "linalg.hpp"
#include "geometry.hpp"
#include "continuation.hpp"
#include "monodromy.hpp"
#include "schlesinger.hpp"
#include "reference.hpp"
#include "io.hpp"
