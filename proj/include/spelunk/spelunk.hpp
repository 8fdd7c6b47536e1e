#ifndef SPELUNK_SPELUNK_HPP
#define SPELUNK_SPELUNK_HPP

#include "spelunk/bench.hpp"
#include "spelunk/bulk.hpp"
#include "spelunk/camera.hpp"
#include "spelunk/closest.hpp"
#include "spelunk/empty_space.hpp"
#include "spelunk/frustum.hpp"
#include "spelunk/intersect.hpp"
#include "spelunk/mesh.hpp"
#include "spelunk/network.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/ray.hpp"
#include "spelunk/render.hpp"
#include "spelunk/sampling.hpp"
#include "spelunk/tree.hpp"

#endif
