#pragma once

// Small dense semidefinite programs solved by a primal log-det barrier
// path-following method with a slack-based phase I.

#include <functional>
#include <optional>
#include <string>

#include "lipobs/lmi.hpp"

namespace lipobs::sdp {

struct IterationLog {
    std::string phase;  // "phase1" or "barrier"
    int iteration = 0;
    double t = 0.0;
    double objective = 0.0;
    double decrement = 0.0;
    double worst_margin = 0.0;
};

struct SolverSettings {
    double tol_gap = 1e-8;
    double tol_feas = 1e-9;
    int max_outer = 60;
    int max_newton = 50;
    double barrier_reduction = 0.1;
    double line_search_backtrack = 0.5;
    double initial_t = 1.0;
    // Box |y_i| <= bound on the scaled decision variables. Keeps barrier level
    // sets compact when the LMI region is unbounded in objective-neutral directions.
    double variable_bound = 1e6;
    std::function<void(const IterationLog&)> log;

    void validate() const;
};

enum class Status { Optimal, Infeasible, MaxIterations, NumericalFailure };

const char* to_string(Status s);

struct SdpSolution {
    Vector x;
    double objective = 0.0;
    Status status = Status::NumericalFailure;
    double worst_margin = 0.0;
    int iterations = 0;  // total Newton steps, both phases
    double certified_gap = 0.0;
    std::string note;
};

struct InteriorPoint {
    std::optional<Vector> x;  // empty when infeasible
    Status status = Status::Infeasible;
    int iterations = 0;
    std::string note;
};

// Phase I: minimize s subject to block(x) - margin*I + s*I > 0 until s < 0.
InteriorPoint find_interior_point(const lmi::LmiProblem& problem, const SolverSettings& settings = {});

SdpSolution solve(const lmi::LmiProblem& problem, const SolverSettings& settings = {},
                  const std::optional<Vector>& start = std::nullopt);

struct NewtonStep {
    Vector direction;
    double decrement = 0.0;
    Vector gradient;
    Matrix hessian;
};

// Newton step for t*c'x - sum log det(block_i(x) - margin*I) at a strictly feasible x,
// in the problem's own (unscaled) coordinates.
NewtonStep newton_step(const lmi::LmiProblem& problem, const Vector& x, double t);

// The barrier objective above; nullopt when x is not strictly feasible.
std::optional<double> barrier_value(const lmi::LmiProblem& problem, const Vector& x, double t);

}  // namespace lipobs::sdp
