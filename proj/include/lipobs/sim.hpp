#pragma once

// Fixed-step RK4 simulation of a plant together with its observer
//
//   x'    = A x    + Phi_true(x, u) + B w
//   xhat' = A xhat + Phi(xhat, u)   + L (C x + D w - C xhat)
//
// with error e = x - xhat and performance output z = H e.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lipobs/expr.hpp"
#include "lipobs/lipschitz.hpp"
#include "lipobs/synthesis.hpp"

namespace lipobs::sim {

// Vector-valued signal of time, one expression in t per component.
class TimeSignal {
public:
    TimeSignal() = default;
    static TimeSignal parse(const std::vector<std::string>& texts);

    [[nodiscard]] int size() const { return static_cast<int>(components_.size()); }
    [[nodiscard]] Vector eval(double t) const;
    [[nodiscard]] const std::vector<expr::Expression>& components() const { return components_; }

private:
    std::vector<expr::Expression> components_;
};

struct SimulationConfig {
    double t_end = 10.0;
    double dt = 1e-3;
    Vector x0;
    Vector xhat0;
    std::optional<TimeSignal> disturbance;  // dimension q
    std::optional<TimeSignal> input;        // dimension m
    // RK4 steps per sample. 0 picks the smallest count with h * rho <= 1, where rho is the
    // largest eigenvalue modulus of A and A - LC.
    int substeps = 0;

    void validate(const PlantModel& plant) const;
};

struct Trace {
    Vector t;
    Matrix x;     // samples x n
    Matrix xhat;  // samples x n
    Matrix e;     // x - xhat
    Matrix w;     // samples x q
    Matrix z;     // samples x r
    Vector e_norm;
    int substeps = 1;

    [[nodiscard]] Eigen::Index samples() const { return t.size(); }
    // States re-expressed as M * x (e.g. T^{-1} to return to original coordinates).
    [[nodiscard]] Trace map_states(const Matrix& m) const;
};

// Thrown when the state becomes non-finite; code() is SimulationBlowUp.
class BlowUp : public Error {
public:
    explicit BlowUp(double time);
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

Trace simulate(const PlantModel& plant, const Matrix& L, const SimulationConfig& config);

enum class Perturbation {
    PlantOnly,  // true plant uses Phi + delta, the observer keeps the nominal Phi
    Shared,     // plant and observer both use Phi + delta
};

Trace simulate_perturbed(const PlantModel& plant, const Matrix& L, const expr::VectorField& delta,
                         const SimulationConfig& config, Perturbation mode = Perturbation::PlantOnly);

struct DecayReport {
    bool pass = false;
    bool disturbance_free = true;
    double worst_ratio = 0.0;  // max ||e(t)|| / (exp(-beta t) sqrt(kappa(P)) ||e(0)||)
    double worst_time = 0.0;
    double kappa_p = 0.0;
    double tolerance = 1.0 + 1e-6;
};

DecayReport decay_check(const Trace& trace, const ObserverDesign& design);

// (int ||z||^2 dt / int ||w||^2 dt)^{1/2} by the trapezoidal rule; nullopt when w is zero.
std::optional<double> empirical_gain(const Trace& trace);

struct PerturbationReport {
    double delta_lipschitz = 0.0;  // estimated on the box spanned by the perturbed trajectory
    std::optional<double> margin;  // design.gamma_star - plant.gamma
    bool within_certificate = false;
    bool blew_up = false;
    double blow_up_time = 0.0;
    double final_ratio = 0.0;  // ||e(t_end)|| / ||e(0)||
    bool converged = false;    // final_ratio <= convergence_ratio
    std::string note;
};

inline constexpr double kConvergenceRatio = 1e-3;

PerturbationReport perturbation_test(const PlantModel& plant, const ObserverDesign& design,
                                     const expr::VectorField& delta, const SimulationConfig& config,
                                     Perturbation mode = Perturbation::PlantOnly, int samples_per_axis = 11);

struct CsvOptions {
    int stride = 1;
};

// Header: t,x1..xn,xhat1..xhatn,e_norm,w1..wq,z1..zr
void write_csv(const Trace& trace, std::ostream& os, const CsvOptions& options = {});

}  // namespace lipobs::sim
