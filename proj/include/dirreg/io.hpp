#pragma once

#include <string>

#include "dirreg/geometry.hpp"

namespace dirreg {

// PLY 1.0, ascii or binary_little_endian. Vertex properties x/y/z required,
// nx/ny/nz optional (renormalized when off-unit by < 1e-3, rejected beyond),
// unknown properties skipped, faces optional.
OrientedPointSet read_ply(const std::string& path);

void write_ply(const std::string& path, const OrientedPointSet& shape,
               bool binary = false);

// CSV with header row: x,y[,z][,nx,ny[,nz]]. Row order defines polyline
// connectivity when `connectivity` says so.
OrientedPointSet read_points_csv(
    const std::string& path, int dim,
    OrientedPointSet::Connectivity connectivity = OrientedPointSet::Connectivity::none);

void write_points_csv(const std::string& path, const OrientedPointSet& shape);

}  // namespace dirreg
