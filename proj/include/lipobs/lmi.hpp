#pragma once

// Linear matrix inequality problems: a linear objective over named decision
// variables subject to affine symmetric blocks that must stay positive
// semidefinite with a uniform margin.

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lipobs/error.hpp"
#include "lipobs/linalg.hpp"

namespace lipobs::lmi {

inline constexpr double kDefaultMargin = 1e-6;

// Matrix-valued affine function of the decision vector: constant + sum_i x_i * coeff_i.
class AffineExpr {
public:
    AffineExpr() = default;
    AffineExpr(Eigen::Index rows, Eigen::Index cols) : constant_(Matrix::Zero(rows, cols)) {}
    explicit AffineExpr(Matrix constant) : constant_(std::move(constant)) {}

    static AffineExpr zero(Eigen::Index rows, Eigen::Index cols) { return AffineExpr(rows, cols); }
    static AffineExpr identity(Eigen::Index n, double scale = 1.0)
    {
        return AffineExpr(Matrix(scale * Matrix::Identity(n, n)));
    }

    [[nodiscard]] Eigen::Index rows() const { return constant_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return constant_.cols(); }
    [[nodiscard]] const Matrix& constant() const { return constant_; }
    [[nodiscard]] const std::map<int, Matrix>& terms() const { return terms_; }

    void add_term(int index, const Matrix& coeff);

    [[nodiscard]] AffineExpr transpose() const;
    [[nodiscard]] Matrix evaluate(const Vector& x) const;

    AffineExpr& operator+=(const AffineExpr& other);
    AffineExpr& operator-=(const AffineExpr& other);
    AffineExpr& operator*=(double s);

    friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
    friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
    friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
    friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
    friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
    friend AffineExpr operator*(const Matrix& m, const AffineExpr& a);
    friend AffineExpr operator*(const AffineExpr& a, const Matrix& m);
    friend AffineExpr operator+(AffineExpr a, const Matrix& m) { return a += AffineExpr(m); }
    friend AffineExpr operator-(AffineExpr a, const Matrix& m) { return a -= AffineExpr(m); }

    // Scalar expression times a constant matrix, e.g. xi * I.
    [[nodiscard]] AffineExpr times(const Matrix& m) const;

private:
    Matrix constant_;
    std::map<int, Matrix> terms_;
};

// Block matrix of affine expressions; every row shares heights and every column shares widths.
AffineExpr block(const std::vector<std::vector<AffineExpr>>& rows);

enum class VarKind { Symmetric, Rectangular, Scalar };

struct DecisionEntry {
    std::string name;
    VarKind kind = VarKind::Scalar;
    int rows = 1;
    int cols = 1;
    std::optional<double> lower_bound;
    int offset = 0;  // first scalar index
    [[nodiscard]] int size() const
    {
        return kind == VarKind::Symmetric ? rows * (rows + 1) / 2 : rows * cols;
    }
};

class DecisionLayout {
public:
    // Symmetric n x n matrix stored by upper triangle; an off-diagonal scalar sets both mirror entries.
    AffineExpr add_symmetric(const std::string& name, int n);
    AffineExpr add_matrix(const std::string& name, int rows, int cols);
    // Scalar as a 1x1 expression. lower_bound is enforced as x - lower >= margin.
    AffineExpr add_scalar(const std::string& name, std::optional<double> lower_bound = std::nullopt);

    [[nodiscard]] int dimension() const { return dimension_; }
    [[nodiscard]] const std::vector<DecisionEntry>& entries() const { return entries_; }
    [[nodiscard]] const DecisionEntry& entry(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const;

    // Reassemble a named variable's value from the decision vector.
    [[nodiscard]] Matrix value(const std::string& name, const Vector& x) const;
    [[nodiscard]] double scalar(const std::string& name, const Vector& x) const;
    // Write a variable's value into a decision vector (inverse of value()).
    void set_value(const std::string& name, const Matrix& value, Vector& x) const;

private:
    const DecisionEntry& push(DecisionEntry e);

    std::vector<DecisionEntry> entries_;
    int dimension_ = 0;
};

// One constraint block(x) - margin * I >= 0.
struct AffineBlock {
    std::string name;
    Matrix constant;
    std::map<int, Matrix> coeffs;

    [[nodiscard]] Eigen::Index dim() const { return constant.rows(); }
};

// Validate symmetry and squareness of an expression and turn it into a constraint block.
AffineBlock make_block(const std::string& name, const AffineExpr& e);

class LmiProblem {
public:
    [[nodiscard]] const DecisionLayout& layout() const { return layout_; }
    [[nodiscard]] const Vector& objective() const { return objective_; }
    [[nodiscard]] const std::vector<AffineBlock>& blocks() const { return blocks_; }
    [[nodiscard]] double margin() const { return margin_; }
    [[nodiscard]] int dimension() const { return layout_.dimension(); }

    // User blocks followed by 1x1 blocks for each scalar lower bound.
    [[nodiscard]] std::vector<AffineBlock> constraint_blocks() const;

    friend LmiProblem assemble(DecisionLayout layout, Vector objective, std::vector<AffineBlock> blocks,
                               double margin);

private:
    DecisionLayout layout_;
    Vector objective_;
    std::vector<AffineBlock> blocks_;
    double margin_ = kDefaultMargin;
};

LmiProblem assemble(DecisionLayout layout, Vector objective, std::vector<AffineBlock> blocks,
                    double margin = kDefaultMargin);

Matrix evaluate_block(const AffineBlock& block, const Vector& x);
Matrix evaluate_block(const LmiProblem& problem, std::size_t block_index, const Vector& x);

struct BlockMargin {
    std::string name;
    double min_eig = 0.0;  // of block(x) - margin * I
};

struct PointReport {
    bool feasible = false;
    double worst_margin = 0.0;  // raw, without the roundoff allowance
    std::vector<BlockMargin> blocks;  // includes lower-bound blocks
};

// A block counts as satisfied when min_eig(block - margin*I) >= -roundoff_tolerance(block):
// the eigenvalue cannot be resolved more finely than the matrix's own rounding error.
double roundoff_tolerance(const Matrix& m);

PointReport check_point(const LmiProblem& problem, const Vector& x);

// Human-readable dump of layout, objective and dense block coefficients.
void dump(const LmiProblem& problem, std::ostream& os);

}  // namespace lipobs::lmi
