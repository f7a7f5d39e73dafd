#pragma once

#include <stdexcept>
#include <string>

namespace qcreg {

/// Malformed or inconsistent input: bad files, invalid meshes, parameter ranges.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed: singular systems, non-convergence, degenerate faces.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for a specific face so callers can report which triangle is at fault.
class DegenerateFaceError : public NumericalError {
public:
    DegenerateFaceError(const std::string& what, std::size_t face)
        : NumericalError(what + " (face " + std::to_string(face) + ")"), face_(face)
    {
    }

    std::size_t face() const noexcept { return face_; }

private:
    std::size_t face_;
};

} // namespace qcreg
