#include "dutrpca/checkpoint.hpp"

#include <array>
#include <fstream>
#include <map>

#include "dutrpca/cube_io.hpp"
#include "dutrpca/errors.hpp"
#include "dutrpca/unfolding.hpp"

namespace dutrpca {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'U', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr unsigned char kVersion = 1;
constexpr std::uint32_t kMaxName = 4096;

} // namespace

void write_checkpoint(std::ostream& os, const std::vector<NamedArray>& tensors) {
    os.write(kMagic.data(), kMagic.size());
    os.put(static_cast<char>(kVersion));
    binio::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        binio::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        binio::put_u32(os, static_cast<std::uint32_t>(t.value.shape.size()));
        for (Index d : t.value.shape) {
            binio::put_u32(os, static_cast<std::uint32_t>(d));
        }
        for (double v : t.value.data) {
            binio::put_f32(os, static_cast<float>(v));
        }
    }
    if (!os) {
        throw FormatError("failed writing checkpoint");
    }
}

std::vector<NamedArray> read_checkpoint(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError("not a checkpoint (bad magic)");
    }
    if (is.get() != kVersion) {
        throw FormatError("unsupported checkpoint version");
    }
    const std::uint32_t count = binio::get_u32(is);
    std::vector<NamedArray> out;
    for (std::uint32_t n = 0; n < count; ++n) {
        NamedArray t;
        const std::uint32_t len = binio::get_u32(is);
        if (len > kMaxName) {
            throw FormatError("checkpoint tensor name too long");
        }
        t.name.resize(len);
        if (!is.read(t.name.data(), len)) {
            throw FormatError("unexpected end of checkpoint");
        }
        const std::uint32_t ndim = binio::get_u32(is);
        if (ndim > 8) {
            throw FormatError("checkpoint tensor rank too large");
        }
        std::vector<Index> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(binio::get_u32(is));
        }
        t.value = ad::Array(shape);
        for (double& v : t.value.data) {
            v = binio::get_f32(is);
        }
        out.push_back(std::move(t));
    }
    return out;
}

void save_checkpoint(const std::string& path, UnfoldingNet& net) {
    std::vector<NamedArray> tensors;
    for (ad::Parameter* p : net.all_parameters()) {
        tensors.push_back({p->name(), p->value});
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    write_checkpoint(os, tensors);
}

void load_checkpoint(const std::string& path, UnfoldingNet& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::map<std::string, ad::Array> stored;
    for (auto& t : read_checkpoint(is)) {
        stored[t.name] = std::move(t.value);
    }
    for (ad::Parameter* p : net.all_parameters()) {
        auto it = stored.find(p->name());
        if (it == stored.end()) {
            throw FormatError("checkpoint lacks parameter '" + p->name() + "'");
        }
        if (it->second.shape != p->value.shape) {
            throw ShapeMismatch("checkpoint shape " + ad::shape_string(it->second.shape) + " for '" + p->name() +
                                "' does not match " + ad::shape_string(p->value.shape));
        }
        p->value = it->second;
    }
}

} // namespace dutrpca
