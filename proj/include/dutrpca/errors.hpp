#pragma once

#include <stdexcept>
#include <string>

namespace dutrpca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DUTRPCA_DEFINE_ERROR(Name)                                                                 \
    class Name : public Error {                                                                    \
    public:                                                                                        \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}                       \
    }

DUTRPCA_DEFINE_ERROR(InvalidArgument);
DUTRPCA_DEFINE_ERROR(ShapeMismatch);
DUTRPCA_DEFINE_ERROR(SymmetryViolation);
DUTRPCA_DEFINE_ERROR(NonFinite);
DUTRPCA_DEFINE_ERROR(NonScalarLoss);
DUTRPCA_DEFINE_ERROR(EmptySelection);
DUTRPCA_DEFINE_ERROR(MissingGrad);
DUTRPCA_DEFINE_ERROR(RangeError);
DUTRPCA_DEFINE_ERROR(WindowTooLarge);
DUTRPCA_DEFINE_ERROR(AllSpectraZero);
DUTRPCA_DEFINE_ERROR(DataShapeMismatch);
DUTRPCA_DEFINE_ERROR(FormatError);

#undef DUTRPCA_DEFINE_ERROR

} // namespace dutrpca
