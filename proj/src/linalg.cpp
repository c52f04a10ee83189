#include "lipobs/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <limits>

namespace lipobs::linalg {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eig(const Matrix& sym)
{
    if (sym.size() == 0)
        return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eig(const Matrix& sym)
{
    if (sym.size() == 0)
        return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double spectral_abscissa(const Matrix& m)
{
    if (m.size() == 0)
        return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().real().maxCoeff();
}

double max_singular_value(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double condition_number_spd(const Matrix& sym)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
    if (lo <= 0.0)
        return std::numeric_limits<double>::infinity();
    return hi / lo;
}

int observability_rank(const Matrix& a, const Matrix& c, double tol)
{
    const auto n = a.rows();
    if (n == 0 || c.rows() == 0)
        return 0;
    Matrix obs(c.rows() * n, n);
    Matrix block = c;
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * c.rows(), c.rows()) = block;
        block = block * a;
    }
    Eigen::JacobiSVD<Matrix> svd(obs);
    const auto& s = svd.singularValues();
    const double cutoff = tol * std::max(1.0, s(0));
    return static_cast<int>((s.array() > cutoff).count());
}

double spectral_radius(const Matrix& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::EigenSolver<Matrix> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::string format_double(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace lipobs::linalg
