#include "lipobs/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace lipobs::lmi {

void AffineExpr::add_term(int index, const Matrix& coeff)
{
    if (coeff.rows() != rows() || coeff.cols() != cols())
        throw invalid_input("affine term shape mismatch");
    auto [it, inserted] = terms_.try_emplace(index, coeff);
    if (!inserted)
        it->second += coeff;
}

AffineExpr AffineExpr::transpose() const
{
    AffineExpr r(Matrix(constant_.transpose()));
    for (const auto& [i, c] : terms_)
        r.terms_.emplace(i, c.transpose());
    return r;
}

Matrix AffineExpr::evaluate(const Vector& x) const
{
    Matrix r = constant_;
    for (const auto& [i, c] : terms_)
        r += x(i) * c;
    return r;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other)
{
    if (other.rows() != rows() || other.cols() != cols())
        throw invalid_input("affine expression shape mismatch in +");
    constant_ += other.constant_;
    for (const auto& [i, c] : other.terms_)
        add_term(i, c);
    return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other)
{
    if (other.rows() != rows() || other.cols() != cols())
        throw invalid_input("affine expression shape mismatch in -");
    constant_ -= other.constant_;
    for (const auto& [i, c] : other.terms_)
        add_term(i, -c);
    return *this;
}

AffineExpr& AffineExpr::operator*=(double s)
{
    constant_ *= s;
    for (auto& [i, c] : terms_)
        c *= s;
    return *this;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& a)
{
    if (m.cols() != a.rows())
        throw invalid_input("affine expression shape mismatch in left product");
    AffineExpr r(Matrix(m * a.constant_));
    for (const auto& [i, c] : a.terms_)
        r.terms_.emplace(i, m * c);
    return r;
}

AffineExpr operator*(const AffineExpr& a, const Matrix& m)
{
    if (a.cols() != m.rows())
        throw invalid_input("affine expression shape mismatch in right product");
    AffineExpr r(Matrix(a.constant_ * m));
    for (const auto& [i, c] : a.terms_)
        r.terms_.emplace(i, c * m);
    return r;
}

AffineExpr AffineExpr::times(const Matrix& m) const
{
    if (rows() != 1 || cols() != 1)
        throw invalid_input("times() requires a scalar expression");
    AffineExpr r(Matrix(constant_(0, 0) * m));
    for (const auto& [i, c] : terms_)
        r.terms_.emplace(i, c(0, 0) * m);
    return r;
}

AffineExpr block(const std::vector<std::vector<AffineExpr>>& rows)
{
    if (rows.empty() || rows.front().empty())
        throw invalid_input("empty block matrix");
    const std::size_t ncols = rows.front().size();
    std::vector<Eigen::Index> heights, widths(ncols);
    for (std::size_t j = 0; j < ncols; ++j)
        widths[j] = rows.front()[j].cols();
    Eigen::Index total_rows = 0, total_cols = 0;
    for (const auto& row : rows) {
        if (row.size() != ncols)
            throw invalid_input("ragged block matrix");
        heights.push_back(row.front().rows());
        total_rows += row.front().rows();
    }
    for (auto w : widths)
        total_cols += w;

    AffineExpr out(total_rows, total_cols);
    Eigen::Index r0 = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Eigen::Index c0 = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            const AffineExpr& e = rows[i][j];
            if (e.rows() != heights[i] || e.cols() != widths[j])
                throw invalid_input("block matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") has inconsistent shape");
            AffineExpr placed(total_rows, total_cols);
            Matrix c = Matrix::Zero(total_rows, total_cols);
            c.block(r0, c0, e.rows(), e.cols()) = e.constant();
            placed = AffineExpr(c);
            for (const auto& [idx, coeff] : e.terms()) {
                Matrix t = Matrix::Zero(total_rows, total_cols);
                t.block(r0, c0, e.rows(), e.cols()) = coeff;
                placed.add_term(idx, t);
            }
            out += placed;
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    return out;
}

const DecisionEntry& DecisionLayout::push(DecisionEntry e)
{
    if (contains(e.name))
        throw invalid_input("duplicate decision variable name '" + e.name + "'");
    e.offset = dimension_;
    dimension_ += e.size();
    entries_.push_back(std::move(e));
    return entries_.back();
}

AffineExpr DecisionLayout::add_symmetric(const std::string& name, int n)
{
    const auto& e = push(DecisionEntry{name, VarKind::Symmetric, n, n, std::nullopt, 0});
    AffineExpr r(n, n);
    int k = e.offset;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j, ++k) {
            Matrix basis = Matrix::Zero(n, n);
            basis(i, j) = 1.0;
            basis(j, i) = 1.0;
            r.add_term(k, basis);
        }
    return r;
}

AffineExpr DecisionLayout::add_matrix(const std::string& name, int rows, int cols)
{
    const auto& e = push(DecisionEntry{name, VarKind::Rectangular, rows, cols, std::nullopt, 0});
    AffineExpr r(rows, cols);
    int k = e.offset;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j, ++k) {
            Matrix basis = Matrix::Zero(rows, cols);
            basis(i, j) = 1.0;
            r.add_term(k, basis);
        }
    return r;
}

AffineExpr DecisionLayout::add_scalar(const std::string& name, std::optional<double> lower_bound)
{
    const auto& e = push(DecisionEntry{name, VarKind::Scalar, 1, 1, lower_bound, 0});
    AffineExpr r(1, 1);
    r.add_term(e.offset, Matrix::Ones(1, 1));
    return r;
}

bool DecisionLayout::contains(const std::string& name) const
{
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

const DecisionEntry& DecisionLayout::entry(const std::string& name) const
{
    for (const auto& e : entries_)
        if (e.name == name)
            return e;
    throw invalid_input("unknown decision variable '" + name + "'");
}

Matrix DecisionLayout::value(const std::string& name, const Vector& x) const
{
    const auto& e = entry(name);
    Matrix m(e.rows, e.cols);
    int k = e.offset;
    if (e.kind == VarKind::Symmetric) {
        for (int i = 0; i < e.rows; ++i)
            for (int j = i; j < e.rows; ++j, ++k)
                m(i, j) = m(j, i) = x(k);
    }
    else {
        for (int i = 0; i < e.rows; ++i)
            for (int j = 0; j < e.cols; ++j, ++k)
                m(i, j) = x(k);
    }
    return m;
}

double DecisionLayout::scalar(const std::string& name, const Vector& x) const
{
    return x(entry(name).offset);
}

void DecisionLayout::set_value(const std::string& name, const Matrix& value, Vector& x) const
{
    const auto& e = entry(name);
    if (value.rows() != e.rows || value.cols() != e.cols)
        throw invalid_input("set_value shape mismatch for '" + name + "'");
    int k = e.offset;
    if (e.kind == VarKind::Symmetric) {
        for (int i = 0; i < e.rows; ++i)
            for (int j = i; j < e.rows; ++j, ++k)
                x(k) = 0.5 * (value(i, j) + value(j, i));
    }
    else {
        for (int i = 0; i < e.rows; ++i)
            for (int j = 0; j < e.cols; ++j, ++k)
                x(k) = value(i, j);
    }
}

AffineBlock make_block(const std::string& name, const AffineExpr& e)
{
    if (e.rows() != e.cols())
        throw invalid_input("block '" + name + "' is not square");
    auto asym = [](const Matrix& m) {
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
    };
    if (asym(e.constant()) > 1e-12)
        throw invalid_input("block '" + name + "' constant is not symmetric");
    AffineBlock b{name, linalg::symmetrize(e.constant()), {}};
    for (const auto& [i, c] : e.terms()) {
        if (asym(c) > 1e-12)
            throw invalid_input("block '" + name + "' coefficient of variable " + std::to_string(i) +
                                " is not symmetric");
        if (c.cwiseAbs().maxCoeff() == 0.0)
            continue;
        b.coeffs.emplace(i, linalg::symmetrize(c));
    }
    return b;
}

LmiProblem assemble(DecisionLayout layout, Vector objective, std::vector<AffineBlock> blocks, double margin)
{
    if (!(margin > 0.0))
        throw invalid_input("LMI margin must be positive");
    if (objective.size() != layout.dimension())
        throw invalid_input("objective has " + std::to_string(objective.size()) + " coefficients, layout has " +
                            std::to_string(layout.dimension()) + " scalars");
    std::set<std::string> names;
    for (const auto& b : blocks) {
        if (!names.insert(b.name).second)
            throw invalid_input("duplicate block name '" + b.name + "'");
        const auto d = b.constant.rows();
        if (b.constant.cols() != d || d == 0)
            throw invalid_input("block '" + b.name + "' constant is not a non-empty square matrix");
        for (const auto& [i, c] : b.coeffs) {
            if (i < 0 || i >= layout.dimension())
                throw invalid_input("block '" + b.name + "' references variable index " + std::to_string(i) +
                                    " outside the layout");
            if (c.rows() != d || c.cols() != d)
                throw invalid_input("block '" + b.name + "' has a " + std::to_string(c.rows()) + "x" +
                                    std::to_string(c.cols()) + " coefficient in a " + std::to_string(d) + "x" +
                                    std::to_string(d) + " block");
        }
    }
    LmiProblem p;
    p.layout_ = std::move(layout);
    p.objective_ = std::move(objective);
    p.blocks_ = std::move(blocks);
    p.margin_ = margin;
    return p;
}

std::vector<AffineBlock> LmiProblem::constraint_blocks() const
{
    std::vector<AffineBlock> all = blocks_;
    for (const auto& e : layout_.entries()) {
        if (e.kind != VarKind::Scalar || !e.lower_bound)
            continue;
        AffineBlock b{e.name + " lower bound", Matrix::Constant(1, 1, -*e.lower_bound), {}};
        b.coeffs.emplace(e.offset, Matrix::Ones(1, 1));
        all.push_back(std::move(b));
    }
    return all;
}

Matrix evaluate_block(const AffineBlock& block, const Vector& x)
{
    Matrix r = block.constant;
    for (const auto& [i, c] : block.coeffs)
        r += x(i) * c;
    return r;
}

Matrix evaluate_block(const LmiProblem& problem, std::size_t block_index, const Vector& x)
{
    if (block_index >= problem.blocks().size())
        throw invalid_input("block index " + std::to_string(block_index) + " out of range");
    if (x.size() != problem.dimension())
        throw invalid_input("point dimension does not match the layout");
    return evaluate_block(problem.blocks()[block_index], x);
}

double roundoff_tolerance(const Matrix& m)
{
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, m.norm());
}

PointReport check_point(const LmiProblem& problem, const Vector& x)
{
    PointReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    if (x.size() != problem.dimension() || !x.allFinite()) {
        report.worst_margin = -std::numeric_limits<double>::infinity();
        return report;
    }
    bool resolved = true;
    for (const auto& b : problem.constraint_blocks()) {
        Matrix m = evaluate_block(b, x);
        m.diagonal().array() -= problem.margin();
        const double e = linalg::min_eig(m);
        report.blocks.push_back({b.name, e});
        report.worst_margin = std::min(report.worst_margin, e);
        resolved = resolved && e >= -roundoff_tolerance(m);
    }
    report.feasible = resolved;
    return report;
}

namespace {

void print_matrix(const Matrix& m, std::ostream& os)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << "  ";
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << (j ? " " : "") << linalg::format_double(m(i, j));
        os << '\n';
    }
}

const char* kind_name(VarKind k)
{
    switch (k) {
    case VarKind::Symmetric: return "symmetric";
    case VarKind::Rectangular: return "matrix";
    case VarKind::Scalar: return "scalar";
    }
    return "?";
}

}  // namespace

void dump(const LmiProblem& problem, std::ostream& os)
{
    os << "format=1\n";
    os << "margin=" << problem.margin() << '\n';
    os << "variables=" << problem.dimension() << '\n';
    for (const auto& e : problem.layout().entries()) {
        os << "var " << e.name << ' ' << kind_name(e.kind) << ' ' << e.rows << 'x' << e.cols << " offset=" << e.offset;
        if (e.lower_bound)
            os << " lower=" << *e.lower_bound;
        os << '\n';
    }
    os << "objective\n";
    print_matrix(problem.objective().transpose(), os);
    for (const auto& b : problem.constraint_blocks()) {
        os << "block " << b.name << " dim=" << b.dim() << '\n';
        os << " constant\n";
        print_matrix(b.constant, os);
        for (const auto& [i, c] : b.coeffs) {
            os << " coeff " << i << '\n';
            print_matrix(c, os);
        }
    }
}

}  // namespace lipobs::lmi
