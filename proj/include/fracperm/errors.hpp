#pragma once

#include <stdexcept>
#include <string>

namespace fracperm {

/// Base class for all errors raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error report.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define FRACPERM_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(#Name, what) {}     \
    }

FRACPERM_DEFINE_ERROR(ParseError);
FRACPERM_DEFINE_ERROR(DegenerateGeometry);
FRACPERM_DEFINE_ERROR(EmptyNetwork);
FRACPERM_DEFINE_ERROR(MeshFailure);
FRACPERM_DEFINE_ERROR(TopologyError);
FRACPERM_DEFINE_ERROR(InvalidModuli);
FRACPERM_DEFINE_ERROR(SingularElement);
FRACPERM_DEFINE_ERROR(MissingMidNode);
FRACPERM_DEFINE_ERROR(SolveFailure);
FRACPERM_DEFINE_ERROR(NegativeStress);
FRACPERM_DEFINE_ERROR(InvalidArgument);
FRACPERM_DEFINE_ERROR(ConfigError);

#undef FRACPERM_DEFINE_ERROR

}  // namespace fracperm
