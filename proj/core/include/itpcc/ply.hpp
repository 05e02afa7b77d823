#pragma once

#include <string>

#include "itpcc/pointcloud.hpp"

namespace itpcc {

// Reads an ASCII or binary-little-endian PLY with x,y,z properties and
// optional red,green,blue. Coordinates are rounded to integers (half
// away from zero), duplicates merged. Throws std::runtime_error on
// malformed input, non-finite or negative coordinates.
PointCloud load_ply(const std::string& path);

// Writes binary-little-endian PLY (float x,y,z, uchar colours when
// present). load_ply(save_ply(pc)) reproduces pc exactly.
void save_ply(const PointCloud& pc, const std::string& path);

}  // namespace itpcc
