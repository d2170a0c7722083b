#pragma once

// Everything: synthesis, occupancy, mapping, feature field, renderer,
// training, codec, bundles, HTTP service and the CLI driver.

#include "featvid/cli.hpp"
#include "featvid/reference_render.hpp"
