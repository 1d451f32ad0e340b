#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace schwarzflow {

using Real = double;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// ====== error taxonomy ======
// All recoverable failures derive from Error; the CLI maps the leaf types to
// distinct exit codes.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid inputs: bad parameter ranges, points inside the horizon, surfaces
// that are not graphs over the sphere, stencils that would cross the horizon.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Graph condition chi > eps_graph violated at some node.
class GraphConditionError : public DomainError {
public:
    GraphConditionError(const std::string& msg, int node, Real theta, Real phi, Real chi)
        : DomainError(msg), node(node), theta(theta), phi(phi), chi(chi) {}
    int node;
    Real theta, phi, chi;
};

// APMCF speed undefined: integral of H over the surface is nonpositive.
class FlowUndefinedError : public Error {
public:
    explicit FlowUndefinedError(const std::string& msg) : Error(msg) {}
};

// Non-finite values during time stepping (after one dt/2 retry).
class BlowupError : public Error {
public:
    BlowupError(const std::string& msg, int step) : Error(msg), step(step) {}
    int step;
};

// A caller violated a documented precondition of an operator.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

// Malformed or out-of-range configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// ====== reductions ======

// Pairwise summation over a contiguous range. Used for every surface integral
// so that results are reproducible bit-for-bit across runs and insensitive to
// accumulation order bugs; error grows like log(n) rather than n.
inline Real pairwise_sum(const Real* x, Eigen::Index n) {
    if (n <= 8) {
        Real s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const Eigen::Index h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline Real pairwise_sum(const VecX& x) { return pairwise_sum(x.data(), x.size()); }

// Sum of coefficient products a_i * b_i without forming a temporary at call sites.
inline Real weighted_sum(const VecX& a, const VecX& b) {
    VecX prod = a.cwiseProduct(b);
    return pairwise_sum(prod);
}

}  // namespace schwarzflow
