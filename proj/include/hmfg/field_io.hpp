#pragma once

#include "hmfg/torus_grid.hpp"

#include <iosfwd>
#include <string>

namespace hmfg {

// CSV: one row per node, coordinates then value. Time fields add a leading t column.
void write_csv(std::ostream& os, const Field& f);
void write_csv(std::ostream& os, const TimeField& f);

// Binary layout, little-endian:
//   uint16 dim | uint16 n | uint32 frames | float64 dt   (16 bytes)
//   float64 values, frame-major, nodes x-fastest.
// A plain field is written with frames = 1 and dt = 0.
void write_binary(std::ostream& os, const Field& f);
void write_binary(std::ostream& os, const TimeField& f);
TimeField read_binary(std::istream& is);

void save_csv(const std::string& path, const Field& f);
void save_csv(const std::string& path, const TimeField& f);
void save_binary(const std::string& path, const Field& f);
void save_binary(const std::string& path, const TimeField& f);
TimeField load_binary(const std::string& path);

}  // namespace hmfg
