#pragma once

#include <array>
#include <iosfwd>
#include <string>

#include "dutrpca/tensor3.hpp"

namespace dutrpca {

/**
 * Binary cube container:
 *   8 bytes magic "DUTCUBE\0", 1 byte version,
 *   n1, n2, n3 as little-endian uint32,
 *   n1*n2*n3 little-endian float32, band-major (band 0 first), row-major within a band.
 */
inline constexpr std::array<char, 8> kCubeMagic = {'D', 'U', 'T', 'C', 'U', 'B', 'E', '\0'};
inline constexpr unsigned char kCubeVersion = 1;

void write_cube(std::ostream& os, const Tensor3& t);
Tensor3 read_cube(std::istream& is);

void write_cube_file(const std::string& path, const Tensor3& t);
Tensor3 read_cube_file(const std::string& path);

/// Rounds every entry through float32, as a cube round-trip would.
Tensor3 quantize_f32(const Tensor3& t);

namespace binio {

void put_u32(std::ostream& os, std::uint32_t v);
void put_f32(std::ostream& os, float v);
std::uint32_t get_u32(std::istream& is);
float get_f32(std::istream& is);

} // namespace binio

} // namespace dutrpca
