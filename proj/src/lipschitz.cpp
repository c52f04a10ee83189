#include "lipobs/lipschitz.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

namespace lipobs::lipschitz {

namespace {

constexpr double kSingularCondition = 1e14;
constexpr int kRefineSamples = 9;
constexpr int kRefineRounds = 12;
constexpr double kRefineWidth = 1e-7;

Eigen::FullPivLU<Matrix> invertible(const Matrix& T, const char* what)
{
    if (T.rows() != T.cols() || T.rows() == 0)
        throw invalid_input(std::string(what) + ": T must be square");
    if (!T.allFinite())
        throw invalid_input(std::string(what) + ": T has non-finite entries");
    Eigen::FullPivLU<Matrix> lu(T);
    const double cond = lu.isInvertible() ? T.norm() * lu.inverse().norm() : INFINITY;
    if (!lu.isInvertible() || !(cond < kSingularCondition))
        throw invalid_input(std::string(what) + ": T is singular (condition number " + std::to_string(cond) + ")");
    return lu;
}

struct Search {
    const expr::VectorField& field;
    const Vector& u;
    Estimate best;

    void probe(const Vector& x)
    {
        const double s = linalg::max_singular_value(expr::jacobian(field, x, u));
        ++best.evaluations;
        if (s > best.value || best.argmax.size() == 0) {
            best.value = s;
            best.argmax = x;
        }
    }

    // Visit every point lower + k * step (k = 0..count-1 per axis).
    void grid(const Vector& lower, const Vector& step, int count)
    {
        const auto n = lower.size();
        std::vector<int> k(static_cast<std::size_t>(n), 0);
        Vector x(n);
        while (true) {
            for (Eigen::Index i = 0; i < n; ++i)
                x(i) = lower(i) + k[static_cast<std::size_t>(i)] * step(i);
            probe(x);
            Eigen::Index i = 0;
            for (; i < n; ++i) {
                auto& ki = k[static_cast<std::size_t>(i)];
                if (++ki < count)
                    break;
                ki = 0;
            }
            if (i == n)
                return;
        }
    }
};

}  // namespace

void Region::validate() const
{
    if (lower.size() != upper.size())
        throw invalid_input("region bounds differ in dimension");
    if (samples_per_axis < 2)
        throw invalid_input("region needs at least 2 samples per axis");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || lower(i) > upper(i))
            throw invalid_input("region lower bound exceeds upper bound in coordinate " + std::to_string(i + 1));
}

Estimate estimate_lipschitz(const expr::VectorField& field, const Region& region, const Vector& u_fixed)
{
    region.validate();
    if (region.lower.size() != field.n())
        throw invalid_input("region dimension does not match the field");
    if (u_fixed.size() != field.m())
        throw invalid_input("input vector dimension does not match the field");
    Search s{field, u_fixed, {}};
    if (field.n() == 0 || field.is_identically_zero()) {
        s.best.argmax = region.lower;
        return s.best;
    }
    const int count = region.samples_per_axis;
    const Vector width = region.upper - region.lower;
    const Vector step = width / (count - 1);
    s.grid(region.lower, step, count);
    if (width.maxCoeff() > 0.0)
        s.grid(region.lower + 0.5 * step, step, count - 1);

    // Zoom: grids one cell wide on each side of the best point, shrinking each round.
    const int fine = std::min(count, kRefineSamples);
    const double floor = kRefineWidth * std::max(1.0, width.maxCoeff());
    Vector cell = step;
    for (int round = 0; round < kRefineRounds && cell.maxCoeff() > floor; ++round) {
        const Vector lo = (s.best.argmax - cell).cwiseMax(region.lower);
        const Vector hi = (s.best.argmax + cell).cwiseMin(region.upper);
        cell = (hi - lo) / (fine - 1);
        s.grid(lo, cell, fine);
    }
    return s.best;
}

PlantModel transform(const PlantModel& plant, const Matrix& T)
{
    plant.validate();
    if (T.rows() != plant.n())
        throw invalid_input("transform: T must be n x n");
    const auto lu = invertible(T, "transform");
    const Matrix Ti = lu.inverse();
    PlantModel out = plant;
    out.A = T * plant.A * Ti;
    out.B = T * plant.B;
    out.C = plant.C * Ti;
    out.H = plant.H.rows() > 0 ? Matrix(plant.H * Ti) : plant.H;
    out.phi = plant.phi.wrapped(Ti, T);
    if (plant.region) {
        // Interval image of the box under T.
        Box b{Vector::Zero(plant.n()), Vector::Zero(plant.n())};
        for (int i = 0; i < plant.n(); ++i)
            for (int j = 0; j < plant.n(); ++j) {
                const double a = T(i, j) * plant.region->lower(j), c = T(i, j) * plant.region->upper(j);
                b.lower(i) += std::min(a, c);
                b.upper(i) += std::max(a, c);
            }
        out.region = b;
    }
    out.transform = plant.transform ? Matrix(T * *plant.transform) : T;
    return out;
}

Matrix backmap_gain(const Matrix& l_bar, const Matrix& T)
{
    if (T.rows() != l_bar.rows())
        throw invalid_input("backmap_gain: T must have as many rows as the gain");
    return invertible(T, "backmap_gain").solve(l_bar);
}

}  // namespace lipobs::lipschitz
