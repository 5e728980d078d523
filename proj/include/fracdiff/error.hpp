#pragma once

#include <stdexcept>
#include <string>

namespace fracdiff {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag that ends up in run manifests.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define FRACDIFF_ERROR_KIND(Name, tag)                                       \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(tag, what) {}         \
    }

FRACDIFF_ERROR_KIND(DomainError, "domain");
FRACDIFF_ERROR_KIND(MeshError, "mesh");
FRACDIFF_ERROR_KIND(ShapeError, "shape");
FRACDIFF_ERROR_KIND(GeometryError, "geometry");
FRACDIFF_ERROR_KIND(ResolutionError, "resolution");
FRACDIFF_ERROR_KIND(NumericError, "numeric");
FRACDIFF_ERROR_KIND(DegenerateDataError, "degenerate-data");
FRACDIFF_ERROR_KIND(IllPosedError, "ill-posed");
FRACDIFF_ERROR_KIND(ConfigError, "config");

#undef FRACDIFF_ERROR_KIND

/// Raised when an internal regime switch could not reach the requested
/// accuracy; carries the bound that was actually achieved.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double achieved)
        : Error("accuracy", what), achieved_(achieved) {}
    double achieved_bound() const noexcept { return achieved_; }

private:
    double achieved_;
};

}  // namespace fracdiff
