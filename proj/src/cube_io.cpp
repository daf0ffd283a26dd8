#include "dutrpca/cube_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "dutrpca/errors.hpp"

namespace dutrpca {

namespace binio {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError("unexpected end of file");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

} // namespace binio

void write_cube(std::ostream& os, const Tensor3& t) {
    constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
    if (t.n1() > kMax || t.n2() > kMax || t.n3() > kMax) {
        throw InvalidArgument("cube dimensions exceed 32 bits");
    }
    os.write(kCubeMagic.data(), kCubeMagic.size());
    os.put(static_cast<char>(kCubeVersion));
    binio::put_u32(os, static_cast<std::uint32_t>(t.n1()));
    binio::put_u32(os, static_cast<std::uint32_t>(t.n2()));
    binio::put_u32(os, static_cast<std::uint32_t>(t.n3()));
    for (Index k = 0; k < t.n3(); ++k) {
        for (Index i = 0; i < t.n1(); ++i) {
            for (Index j = 0; j < t.n2(); ++j) {
                binio::put_f32(os, static_cast<float>(t(i, j, k)));
            }
        }
    }
    if (!os) {
        throw FormatError("failed writing cube");
    }
}

Tensor3 read_cube(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kCubeMagic) {
        throw FormatError("not a cube file (bad magic)");
    }
    const int version = is.get();
    if (version != kCubeVersion) {
        throw FormatError("unsupported cube version " + std::to_string(version));
    }
    const Index n1 = binio::get_u32(is);
    const Index n2 = binio::get_u32(is);
    const Index n3 = binio::get_u32(is);
    if (n1 < 1 || n2 < 1 || n3 < 1) {
        throw FormatError("cube dimensions must be >= 1");
    }
    Tensor3 t(n1, n2, n3);
    for (Index k = 0; k < n3; ++k) {
        for (Index i = 0; i < n1; ++i) {
            for (Index j = 0; j < n2; ++j) {
                t(i, j, k) = binio::get_f32(is);
            }
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after cube payload");
    }
    if (!t.all_finite()) {
        throw NonFinite("cube contains non-finite values");
    }
    return t;
}

void write_cube_file(const std::string& path, const Tensor3& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    write_cube(os, t);
}

Tensor3 read_cube_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("cannot open '" + path + "'");
    }
    return read_cube(is);
}

Tensor3 quantize_f32(const Tensor3& t) {
    Tensor3 out = t;
    for (double& v : out.values()) {
        v = static_cast<float>(v);
    }
    return out;
}

} // namespace dutrpca
