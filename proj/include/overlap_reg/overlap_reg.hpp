#pragma once

// Umbrella header: the whole registration toolkit.

#include "overlap_reg/point_cloud.hpp"
#include "overlap_reg/transform.hpp"
#include "overlap_reg/fov.hpp"
#include "overlap_reg/kdtree.hpp"
#include "overlap_reg/correspondence.hpp"
#include "overlap_reg/horn.hpp"
#include "overlap_reg/omega.hpp"
#include "overlap_reg/icp.hpp"
#include "overlap_reg/gmm.hpp"
#include "overlap_reg/eoe.hpp"
#include "overlap_reg/view_sim.hpp"
#include "overlap_reg/io/ply.hpp"
#include "overlap_reg/io/kitti.hpp"
#include "overlap_reg/io/dataset.hpp"
#include "overlap_reg/io/results.hpp"
#include "overlap_reg/bench/config.hpp"
#include "overlap_reg/bench/runner.hpp"
