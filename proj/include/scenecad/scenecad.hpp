#pragma once

// Umbrella header: the full reconstruction stack.

#include "scenecad/align.hpp"
#include "scenecad/config.hpp"
#include "scenecad/datagen.hpp"
#include "scenecad/error.hpp"
#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"
#include "scenecad/metrics.hpp"
#include "scenecad/mlp.hpp"
#include "scenecad/mpnn.hpp"
#include "scenecad/pipeline.hpp"
#include "scenecad/random.hpp"
#include "scenecad/relations.hpp"
#include "scenecad/scene_io.hpp"
