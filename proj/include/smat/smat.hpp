#ifndef SMAT_SMAT_HPP
#define SMAT_SMAT_HPP

#include "smat/geometry.hpp"
#include "smat/range_image.hpp"
#include "smat/voxel_map.hpp"
#include "smat/box.hpp"
#include "smat/kv_config.hpp"
#include "smat/ray_traversal.hpp"
#include "smat/clustering.hpp"
#include "smat/tracking.hpp"
#include "smat/sim_world.hpp"
#include "smat/front_end.hpp"
#include "smat/back_end.hpp"
#include "smat/pipeline.hpp"
#include "smat/assignment.hpp"
#include "smat/eval_metrics.hpp"
#include "smat/quality_series.hpp"
#include "smat/nav_select.hpp"
#include "smat/io.hpp"
#include "smat/commands.hpp"

#endif  // SMAT_SMAT_HPP
