#pragma once

#include <string>

#include "hrnav/env.hpp"
#include "hrnav/trajlog.hpp"

namespace hrnav {

/// Top-down SVG: obstacles, inflated band, start, goal, the path coloured by
/// plan token (one polyline per plan) and hatched revisit cells. A null log
/// renders the map alone.
std::string render_svg(const GridMap& map, const EpisodeLog* log, double px_per_m = 60.0);

}  // namespace hrnav
