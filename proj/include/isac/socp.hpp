#pragma once

// Second-order cone programs over real variables:
//
//   maximize    c^T x + c0
//   subject to  a_i^T x <= b_i
//               || A_j x + b_j || <= c_j^T x + d_j
//
// solved with a homogeneous self-dual primal-dual interior-point method
// using Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
// Complex decision variables are split by the caller into [Re; Im] blocks.

#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac::socp {

struct AffineInequality {
    RVector a;
    double b = 0.0;
};

struct SocConstraint {
    RMatrix A;
    RVector b;
    RVector c;
    double d = 0.0;
};

struct ConeProgram {
    int num_vars = 0;
    RVector objective;
    double objective_constant = 0.0;
    std::vector<AffineInequality> affine_ineqs;
    std::vector<SocConstraint> soc_constraints;

    explicit ConeProgram(int n = 0) : num_vars(n), objective(RVector::Zero(n)) {}

    void add_affine(RVector a, double b) { affine_ineqs.push_back({std::move(a), b}); }
    void add_soc(SocConstraint s) { soc_constraints.push_back(std::move(s)); }

    /// Throws std::invalid_argument on inconsistent dimensions or
    /// non-finite coefficients.
    void validate() const;

    double evaluate_objective(const RVector& x) const { return objective.dot(x) + objective_constant; }

    /// Largest violation of any constraint at x (0 when feasible).
    double max_violation(const RVector& x) const;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(Status s);

struct Options {
    double tol = 1e-7;
    int max_iter = 200;
};

struct ConeSolution {
    Status status = Status::iteration_limit;
    RVector x;
    double objective_value = 0.0;
    // Upper bound on the optimum from the dual iterate (valid when optimal).
    double dual_bound = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    // Infeasibility certificate, ordered like the constraints (affine rows
    // first, then each cone block as (t, u)): z in the cone with
    // G^T z = 0 and h^T z = -1.
    RVector certificate;
};

ConeSolution solve(const ConeProgram& prog, const Options& opt = {});

/// ||M x + m||^2 <= t^T x + t0 written as the cone
/// ||[2(M x + m); t^T x + t0 - 1]|| <= t^T x + t0 + 1.
SocConstraint lift_quadratic_bound(const RMatrix& M, const RVector& m, const RVector& t, double t0);

/// One constraint per line; for cross-checking with external tools.
std::string dump(const ConeProgram& prog);

} // namespace isac::socp
