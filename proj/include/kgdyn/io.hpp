#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "kgdyn/field.hpp"

namespace kg {

/*
 * Field snapshot file, version 1 (little endian):
 *   bytes 0..7   magic "KGDYNF01"
 *   u32          grid kind (0 = radial, 1 = box)
 *   u32          n (interior nodes / nodes per axis)
 *   f64          R (radial) or L (box period)
 *   f64          time
 *   payload      node-ordered (Re, Im) f64 pairs; radial: m = 0..n-1;
 *                box: index ((ix*n)+iy)*n+iz.
 */
void write_snapshot(const std::filesystem::path& path, const Field& f);
Field read_snapshot(const std::filesystem::path& path);

// reuse an existing grid when the header matches (avoids re-planning)
Field read_snapshot(const std::filesystem::path& path,
                    std::shared_ptr<const RadialGrid> rg,
                    std::shared_ptr<const BoxGrid> bg);

// write text atomically: temp file in the same directory, then rename
void write_text_atomic(const std::filesystem::path& path, const std::string& body);

std::string fmt_double(double v);  // shortest round-trip decimal, locale-free

}  // namespace kg
