#pragma once

// Observer synthesis for Lipschitz systems
//
//   x' = A x + Phi(x,u) + B w,   y = C x + D w,   z = H (x - xhat)
//   xhat' = A xhat + Phi(xhat,u) + L (y - C xhat)
//
// Each design_* call builds one LMI problem, solves it with the SDP core and
// returns the gain L = P^{-1} F together with the certificate P and the
// performance indices gamma* (admissible Lipschitz constant) and mu* (w -> z gain).

#include <optional>
#include <string>
#include <vector>

#include "lipobs/expr.hpp"
#include "lipobs/lmi.hpp"
#include "lipobs/sdp.hpp"

namespace lipobs {

struct Box {
    Vector lower;
    Vector upper;
};

struct PlantModel {
    Matrix A;  // n x n
    Matrix B;  // n x q
    Matrix C;  // p x n
    Matrix D;  // p x q
    Matrix H;  // r x n
    expr::VectorField phi;
    std::optional<double> gamma;
    std::optional<Box> region;
    // Coordinate change x_bar = T x applied to produce this model, if any.
    std::optional<Matrix> transform;

    [[nodiscard]] int n() const { return static_cast<int>(A.rows()); }
    [[nodiscard]] int p() const { return static_cast<int>(C.rows()); }
    [[nodiscard]] int q() const { return static_cast<int>(B.cols()); }
    [[nodiscard]] int r() const { return static_cast<int>(H.rows()); }
    [[nodiscard]] int m() const { return phi.m(); }

    // Throws InvalidInput on inconsistent dimensions or a non-positive gamma.
    void validate() const;
    [[nodiscard]] int observability_rank() const;
};

// Convenience constructor: B, D default to zero columns and H to zero rows.
PlantModel make_plant(Matrix a, Matrix c, expr::VectorField phi = {});

enum class Theorem { T1, T3, T4, T5, Feasibility, FixedGain };

const char* to_string(Theorem t);

struct ObserverDesign {
    Theorem theorem = Theorem::T1;
    Matrix L;
    Matrix P;
    Matrix F;  // P * L as solved; kept so verification does not re-multiply
    double epsilon = 0.0;
    std::optional<double> alpha;
    std::optional<double> xi;
    std::optional<double> zeta;
    // Certified Lipschitz constant: 1/xi when maximized, the prescribed gamma otherwise.
    double gamma_star = 0.0;
    std::optional<double> mu_star;
    double beta = 0.0;
    std::optional<double> lambda;
    sdp::Status status = sdp::Status::Optimal;
    double objective = 0.0;
    double certified_gap = 0.0;
    int iterations = 0;
};

struct DesignOptions {
    sdp::SolverSettings solver;
    double margin = lmi::kDefaultMargin;
    // Relative slack added to an optimal xi before it is frozen for a follow-up solve.
    double backoff = 1e-5;
    // After the optimum is found, re-solve with the objective capped at optimum * (1 + gain_relax)
    // and minimize kappa with L'PL <= kappa I. Near-optimal LMI solutions otherwise drift to
    // very large gains. Zero keeps the raw optimizer output.
    double gain_relax = 1e-3;
};

// Theorem 1: maximize the admissible Lipschitz constant (beta = 0).
ObserverDesign design_max_lipschitz(const PlantModel& plant, const DesignOptions& opts = {});
// Theorem 3: as above with guaranteed decay rate beta > 0.
ObserverDesign design_with_decay(const PlantModel& plant, double beta, const DesignOptions& opts = {});
// Theorem 4: minimize the w -> z gain for a given Lipschitz constant gamma; beta = 0 drops the decay term.
ObserverDesign design_hinf(const PlantModel& plant, double beta, double gamma, const DesignOptions& opts = {});
// Theorem 5: minimize lambda*xi + (1-lambda)*zeta.
ObserverDesign design_multiobjective(const PlantModel& plant, double beta, double lambda,
                                     const DesignOptions& opts = {});
// Constraint satisfaction only, with xi = 1/gamma and (if given) zeta = mu^2.
ObserverDesign design_feasibility(const PlantModel& plant, double gamma, std::optional<double> mu, double beta,
                                  const DesignOptions& opts = {});
// Largest certified Lipschitz constant for a fixed gain L (P re-solved).
ObserverDesign analyze_gain(const PlantModel& plant, const Matrix& L, double beta, const DesignOptions& opts = {});

struct SequentialDesign {
    ObserverDesign stage1;  // maximized gamma with decay
    ObserverDesign stage2;  // minimized mu at gamma_used
    double gamma_used = 0.0;
    // True when the stage-1 gamma was infeasible for the H-infinity constraints and
    // stage 2 ran at the largest gamma those constraints admit.
    bool gamma_reduced = false;
    std::optional<double> margin;  // gamma_used - plant.gamma when the plant states one
};

SequentialDesign sequential_design(const PlantModel& plant, double beta, const DesignOptions& opts = {});

double robustness_margin(const ObserverDesign& design, double gamma_actual);

struct Check {
    std::string name;
    double margin = 0.0;
    bool passed = false;
};

struct VerificationReport {
    std::vector<Check> checks;
    double kappa_p = 0.0;  // condition number of P
    bool pass = false;

    [[nodiscard]] const Check* find(const std::string& name) const;
};

VerificationReport verify_design(const PlantModel& plant, const ObserverDesign& design,
                                 double margin = lmi::kDefaultMargin);

// The LMI problem a design_* call would solve; exposed for inspection and dumps.
lmi::LmiProblem build_problem(const PlantModel& plant, Theorem theorem, double beta, std::optional<double> gamma,
                              std::optional<double> lambda, double margin = lmi::kDefaultMargin);

}  // namespace lipobs
