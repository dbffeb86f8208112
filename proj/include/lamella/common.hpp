#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace lamella {

using complexd = std::complex<double>;

inline constexpr double two_pi = 6.283185307179586476925286766559;
inline constexpr double pi = 3.1415926535897932384626433832795;

/// Base class for all recoverable solver/domain errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class EigensolverFailure : public Error {
public:
    using Error::Error;
};

class SingularMatching : public Error {
public:
    using Error::Error;
};

class BelowGratingTop : public Error {
public:
    using Error::Error;
};

class NotLossless : public Error {
public:
    using Error::Error;
};

class SolverDiverged : public Error {
public:
    using Error::Error;
};

class GridMisaligned : public Error {
public:
    using Error::Error;
};

class IllConditionedFit : public Error {
public:
    using Error::Error;
};

class NotHarmonic : public Error {
public:
    using Error::Error;
};

class NoFeasibleStart : public Error {
public:
    using Error::Error;
};

} // namespace lamella
