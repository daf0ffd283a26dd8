#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dutrpca/autodiff.hpp"

namespace dutrpca {

class UnfoldingNet;

/**
 * Flat weight container:
 *   8 bytes magic "DUTCKPT\0", 1 byte version, uint32 tensor count, then per tensor
 *   uint32 name length, name bytes, uint32 ndim, ndim x uint32 dims, float32 payload.
 * All integers and floats little-endian.
 */
struct NamedArray {
    std::string name;
    ad::Array value;
};

void write_checkpoint(std::ostream& os, const std::vector<NamedArray>& tensors);
std::vector<NamedArray> read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, UnfoldingNet& net);
/// Copies every stored tensor into the parameter of the same name; all parameters must be covered.
void load_checkpoint(const std::string& path, UnfoldingNet& net);

} // namespace dutrpca
