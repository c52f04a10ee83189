#pragma once

// Lipschitz constant estimation over a box and linear coordinate changes of a plant.

#include "lipobs/expr.hpp"
#include "lipobs/synthesis.hpp"

namespace lipobs::lipschitz {

inline constexpr int kDefaultSamples = 21;

struct Region {
    Vector lower;
    Vector upper;
    int samples_per_axis = kDefaultSamples;

    void validate() const;
};

struct Estimate {
    double value = 0.0;
    Vector argmax;  // grid point attaining value
    long evaluations = 0;
};

// Largest spectral norm of the Jacobian over a regular grid, the cell centres and
// successively finer grids around the best point. A lower bound on the true constant.
Estimate estimate_lipschitz(const expr::VectorField& field, const Region& region, const Vector& u_fixed);

// Plant in x_bar = T x coordinates. The region, if any, becomes the bounding box of its image.
PlantModel transform(const PlantModel& plant, const Matrix& T);

// L = T^{-1} L_bar.
Matrix backmap_gain(const Matrix& l_bar, const Matrix& T);

}  // namespace lipobs::lipschitz
