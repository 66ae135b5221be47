#pragma once

#include <stdexcept>
#include <string>

namespace fuchs {

/// Stable error codes. Every throwing operation in the library raises
/// fuchs::Error with one of these codes; the CLI maps them to structured
/// error entries in result documents.
enum class Errc {
    invalid_argument,        // precondition violated by the caller
    pole_collision,          // two singularities coincide (or nearly so)
    irregular_infinity,      // residues do not sum to zero within tolerance
    evaluation_at_singularity, // right-hand side requested at a pole
    path_through_singularity,  // a path vertex or segment hits a pole exactly
    realization_failure,     // loop realization cannot keep clearance
    step_underflow,          // adaptive integrator step shrank below limit
    determinant_collapse,    // fundamental matrix lost invertibility
    branch_cut,              // matrix logarithm hit a defective branch split
    confinement_violation,   // deformation path left its confinement disk
    singular_configuration,  // Schlesinger right-hand side undefined
    numerical_failure,       // eigensolver or similar backend failure
    parse_error              // malformed input file
};

/// Short stable identifier for an error code (used in result documents).
inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_argument:          return "invalid_argument";
    case Errc::pole_collision:            return "pole_collision";
    case Errc::irregular_infinity:        return "irregular_infinity";
    case Errc::evaluation_at_singularity: return "evaluation_at_singularity";
    case Errc::path_through_singularity:  return "path_through_singularity";
    case Errc::realization_failure:       return "realization_failure";
    case Errc::step_underflow:            return "step_underflow";
    case Errc::determinant_collapse:      return "determinant_collapse";
    case Errc::branch_cut:                return "branch_cut";
    case Errc::confinement_violation:     return "confinement_violation";
    case Errc::singular_configuration:    return "singular_configuration";
    case Errc::numerical_failure:         return "numerical_failure";
    case Errc::parse_error:               return "parse_error";
    }
    return "unknown";
}

/// Library exception type. `index()` identifies the offending pole or path
/// vertex where that is meaningful (1-based for poles, to match file format
/// and loop-word conventions); -1 otherwise.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, int index = -1)
        : std::runtime_error(message), code_(code), index_(index) {}

    Errc code() const noexcept { return code_; }
    int index() const noexcept { return index_; }

private:
    Errc code_;
    int index_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message, int index = -1) {
    throw Error(code, message, index);
}

} // namespace fuchs
