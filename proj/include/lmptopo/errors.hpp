#pragma once

#include <stdexcept>
#include <string>

namespace lmptopo {

// Input errors map to CLI exit code 1, numerical failures to exit code 2.
enum class ErrorKind { Input, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define LMPTOPO_DEFINE_ERROR(Name, Kind)                                  \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& what) : Error(Kind, what) {}     \
    };

LMPTOPO_DEFINE_ERROR(InvalidTopology, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(DisconnectedGrid, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(SingularMatrix, ErrorKind::Numerical)
LMPTOPO_DEFINE_ERROR(Unbalanced, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(NonConvexOffer, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(UnboundedLp, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(EmptyHorizon, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(DegenerateEstimate, ErrorKind::Numerical)
LMPTOPO_DEFINE_ERROR(DimensionMismatch, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(BadConfig, ErrorKind::Input)
LMPTOPO_DEFINE_ERROR(ParseError, ErrorKind::Input)

#undef LMPTOPO_DEFINE_ERROR

}  // namespace lmptopo
