#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bmt {

// Default tolerances used across the solver stack. Every run report echoes
// the values actually in effect.
struct Tolerances {
    double linear_solve = 1e-10;   // relative residual for Poisson-type solves
    double psor = 1e-9;            // PSOR sup-norm update criterion
    double contact = 1e-6;         // active-set / barrier slack threshold
    double monotonicity = 1e-6;    // stop-go quadruple slack
    double mass = 1e-12;           // probability-measure normalization
    double lp_rel_gap = 1e-10;     // primal-dual certification of the LP oracle
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class EmptyGridError : public Error {
public:
    explicit EmptyGridError(const std::string& what) : Error(what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual)
        : Error(what), residual(residual) {}
    double residual;
};

class MaxIterationsError : public Error {
public:
    MaxIterationsError(const std::string& what, long budget, double residual)
        : Error(what), budget(budget), residual(residual) {}
    long budget;
    double residual;
};

class LpNumericalError : public Error {
public:
    explicit LpNumericalError(const std::string& what) : Error(what) {}
};

class InstanceTooLargeError : public Error {
public:
    InstanceTooLargeError(const std::string& what, long size, long cap)
        : Error(what), size(size), cap(cap) {}
    long size;
    long cap;
};

// Raised when a pair of marginals cannot be linked by a stopped walk. Carries
// the separating subharmonic witness (values per node) when one is available.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::vector<double> witness,
                    double separation)
        : Error(what), witness(std::move(witness)), separation(separation) {}
    std::vector<double> witness;
    double separation;
};

class SubharmonicityRequiredError : public Error {
public:
    SubharmonicityRequiredError(const std::string& what, double min_laplacian)
        : Error(what), min_laplacian(min_laplacian) {}
    double min_laplacian;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

class ArtifactMismatchError : public Error {
public:
    explicit ArtifactMismatchError(const std::string& what) : Error(what) {}
};

// splitmix64: cheap counter-based stream derivation, used to derive one
// independent seed per Monte Carlo path from the single run seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace bmt
