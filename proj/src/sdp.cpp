#include "lipobs/sdp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace lipobs::sdp {

namespace {

constexpr double kUnboundedObjective = -1e12;
constexpr double kHessianRegularization = 1e-12;

struct Block {
    Matrix constant;           // already shifted by -margin*I
    std::vector<int> index;    // variables with nonzero coefficients
    std::vector<Matrix> coeff;
};

// min c'y  s.t.  constant_i + sum_j y_j coeff_ij > 0,  |y_j| < bound for j < boxed.
struct Form {
    int dim = 0;
    std::vector<Block> blocks;
    Vector c;
    double bound = 0.0;  // <= 0 disables the box
    int boxed = 0;

    [[nodiscard]] int barrier_degree() const
    {
        int m = 0;
        for (const auto& b : blocks)
            m += static_cast<int>(b.constant.rows());
        return m + (bound > 0.0 ? 2 * boxed : 0);
    }
};

Form make_form(const lmi::LmiProblem& problem, const Vector& scale, double bound)
{
    Form f;
    f.dim = problem.dimension();
    f.c = problem.objective().cwiseProduct(scale);
    f.bound = bound;
    f.boxed = f.dim;
    for (const auto& b : problem.constraint_blocks()) {
        Block blk;
        blk.constant = b.constant;
        blk.constant.diagonal().array() -= problem.margin();
        for (const auto& [i, c] : b.coeffs) {
            blk.index.push_back(i);
            blk.coeff.push_back(scale(i) * c);
        }
        f.blocks.push_back(std::move(blk));
    }
    return f;
}

// Column scaling so every variable's coefficients have unit Frobenius norm across blocks.
Vector column_scaling(const lmi::LmiProblem& problem)
{
    Vector sq = Vector::Zero(problem.dimension());
    for (const auto& b : problem.constraint_blocks())
        for (const auto& [i, c] : b.coeffs)
            sq(i) += c.squaredNorm();
    Vector s(problem.dimension());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        s(i) = sq(i) > 0.0 ? 1.0 / std::sqrt(sq(i)) : 1.0;
    return s;
}

Matrix slack(const Block& b, const Vector& y)
{
    Matrix s = b.constant;
    for (std::size_t k = 0; k < b.index.size(); ++k)
        s += y(b.index[k]) * b.coeff[k];
    return s;
}

std::optional<double> barrier(const Form& f, const Vector& y, double t)
{
    double v = t * f.c.dot(y);
    for (const auto& b : f.blocks) {
        Eigen::LLT<Matrix> llt(slack(b, y));
        if (llt.info() != Eigen::Success)
            return std::nullopt;
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < l.rows(); ++i) {
            const double d = l(i, i);
            if (!(d > 0.0) || !std::isfinite(d))
                return std::nullopt;
            v -= 2.0 * std::log(d);
        }
    }
    if (f.bound > 0.0) {
        for (int j = 0; j < f.boxed; ++j) {
            const double lo = f.bound + y(j), hi = f.bound - y(j);
            if (!(lo > 0.0) || !(hi > 0.0))
                return std::nullopt;
            v -= std::log(lo) + std::log(hi);
        }
    }
    return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

bool derivatives(const Form& f, const Vector& y, double t, Vector& g, Matrix& h)
{
    g = t * f.c;
    h = Matrix::Zero(f.dim, f.dim);
    for (const auto& b : f.blocks) {
        const Matrix s = slack(b, y);
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success)
            return false;
        const Matrix sinv = llt.solve(Matrix::Identity(s.rows(), s.cols()));
        std::vector<Matrix> w(b.index.size());
        for (std::size_t k = 0; k < b.index.size(); ++k) {
            w[k] = sinv * b.coeff[k];
            g(b.index[k]) -= w[k].trace();
        }
        for (std::size_t a = 0; a < b.index.size(); ++a)
            for (std::size_t c = a; c < b.index.size(); ++c) {
                const double v = w[a].cwiseProduct(w[c].transpose()).sum();
                h(b.index[a], b.index[c]) += v;
                if (c != a)
                    h(b.index[c], b.index[a]) += v;
            }
    }
    if (f.bound > 0.0) {
        for (int j = 0; j < f.boxed; ++j) {
            const double lo = f.bound + y(j), hi = f.bound - y(j);
            g(j) += -1.0 / lo + 1.0 / hi;
            h(j, j) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
    }
    return g.allFinite() && h.allFinite();
}

// Solve h d = -g; regularize once if the Cholesky factorization fails.
std::optional<Vector> solve_newton(const Matrix& h, const Vector& g)
{
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() == Eigen::Success) {
        Vector d = llt.solve(-g);
        if (d.allFinite())
            return d;
    }
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    Matrix reg = h;
    reg.diagonal().array() += kHessianRegularization * scale;
    Eigen::LLT<Matrix> retry(reg);
    if (retry.info() != Eigen::Success)
        return std::nullopt;
    Vector d = retry.solve(-g);
    if (!d.allFinite())
        return std::nullopt;
    return d;
}

enum class CenterResult { Centered, Stalled, Failed, Stopped };

struct CenterOutcome {
    CenterResult result = CenterResult::Failed;
    double decrement = 0.0;
    int steps = 0;
};

// Damped Newton with backtracking on the barrier objective at fixed t.
template <typename StopFn>
CenterOutcome center(const Form& f, Vector& y, double t, const SolverSettings& settings, StopFn&& stop)
{
    CenterOutcome out;
    Vector g;
    Matrix h;
    auto fval = barrier(f, y, t);
    if (!fval)
        return out;
    for (int it = 0; it < settings.max_newton; ++it) {
        if (!derivatives(f, y, t, g, h))
            return out;
        const auto d = solve_newton(h, g);
        if (!d)
            return out;
        const double gd = g.dot(*d);
        out.decrement = std::sqrt(std::max(0.0, -gd));
        if (0.5 * out.decrement * out.decrement <= 1e-10) {
            out.result = CenterResult::Centered;
            return out;
        }
        double step = 1.0;
        const double slack_tol = 1e-13 * (1.0 + std::abs(*fval));
        bool accepted = false;
        while (step * d->norm() > 1e-14 * (1.0 + y.norm())) {
            const Vector trial = y + step * *d;
            const auto ft = barrier(f, trial, t);
            if (ft && *ft <= *fval + 0.25 * step * gd + slack_tol) {
                y = trial;
                fval = ft;
                accepted = true;
                break;
            }
            step *= settings.line_search_backtrack;
        }
        ++out.steps;
        if (!accepted) {
            // No representable decrease left: the iterate is as centered as double precision allows.
            out.result = out.decrement < 1e-3 ? CenterResult::Centered : CenterResult::Stalled;
            return out;
        }
        if (stop(y)) {
            out.result = CenterResult::Stopped;
            return out;
        }
    }
    out.result = out.decrement < 1e-3 ? CenterResult::Centered : CenterResult::Stalled;
    return out;
}

double worst_slack(const Form& f, const Vector& y)
{
    double w = std::numeric_limits<double>::infinity();
    for (const auto& b : f.blocks)
        w = std::min(w, linalg::min_eig(slack(b, y)));
    return w;
}

void emit(const SolverSettings& s, const char* phase, int it, double t, double obj, double dec, double margin)
{
    if (s.log)
        s.log(IterationLog{phase, it, t, obj, dec, margin});
}

struct PhaseOneResult {
    std::optional<Vector> y;
    Status status = Status::Infeasible;
    int iterations = 0;
    std::string note;
};

PhaseOneResult phase_one(const Form& base, const SolverSettings& settings)
{
    PhaseOneResult res;
    Form f;
    f.dim = base.dim + 1;
    f.bound = base.bound;
    f.boxed = base.dim;
    f.c = Vector::Zero(f.dim);
    f.c(base.dim) = 1.0;
    for (const auto& b : base.blocks) {
        Block blk = b;
        blk.index.push_back(base.dim);
        blk.coeff.push_back(Matrix::Identity(b.constant.rows(), b.constant.cols()));
        f.blocks.push_back(std::move(blk));
    }

    Vector y = Vector::Zero(f.dim);
    const double w0 = worst_slack(base, y.head(base.dim));
    if (w0 > 0.0) {
        res.y = y.head(base.dim);
        res.status = Status::Optimal;
        return res;
    }
    y(base.dim) = -w0 + 1.0;

    const int m = f.barrier_degree();
    double t = settings.initial_t;
    auto feasible = [&](const Vector& v) { return v(base.dim) < 0.0; };
    for (int outer = 0; outer < settings.max_outer; ++outer) {
        const auto c = center(f, y, t, settings, feasible);
        res.iterations += c.steps;
        emit(settings, "phase1", outer, t, y(base.dim), c.decrement, -y(base.dim));
        if (c.result == CenterResult::Stopped || feasible(y)) {
            res.y = y.head(base.dim);
            res.status = Status::Optimal;
            return res;
        }
        if (c.result == CenterResult::Failed) {
            res.status = Status::NumericalFailure;
            res.note = "phase I Newton system could not be solved";
            return res;
        }
        // Lower bound on the optimal slack from the barrier duality gap.
        if (y(base.dim) - m / t >= 0.0) {
            res.status = Status::Infeasible;
            res.note = "phase I slack bounded below by " + std::to_string(y(base.dim) - m / t);
            return res;
        }
        if (c.result == CenterResult::Stalled && m / t < settings.tol_feas) {
            res.status = Status::Infeasible;
            res.note = "phase I stalled with nonnegative slack";
            return res;
        }
        t /= settings.barrier_reduction;
    }
    res.status = Status::Infeasible;
    res.note = "phase I exhausted outer iterations without a strictly feasible point";
    return res;
}

}  // namespace

void SolverSettings::validate() const
{
    if (!(tol_gap > 0.0) || !(tol_feas > 0.0) || max_outer <= 0 || max_newton <= 0 || !(initial_t > 0.0) ||
        !(line_search_backtrack > 0.0 && line_search_backtrack < 1.0) ||
        !(barrier_reduction > 0.0 && barrier_reduction < 1.0))
        throw invalid_input("invalid solver settings");
}

const char* to_string(Status s)
{
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

InteriorPoint find_interior_point(const lmi::LmiProblem& problem, const SolverSettings& settings)
{
    settings.validate();
    const Vector scale = column_scaling(problem);
    const Form f = make_form(problem, scale, settings.variable_bound);
    auto p1 = phase_one(f, settings);
    InteriorPoint ip;
    ip.status = p1.status == Status::Optimal ? Status::Optimal : p1.status;
    ip.iterations = p1.iterations;
    ip.note = p1.note;
    if (p1.y)
        ip.x = Vector(p1.y->cwiseProduct(scale));
    return ip;
}

SdpSolution solve(const lmi::LmiProblem& problem, const SolverSettings& settings, const std::optional<Vector>& start)
{
    settings.validate();
    SdpSolution sol;
    const Vector scale = column_scaling(problem);
    const Form f = make_form(problem, scale, settings.variable_bound);

    Vector y;
    if (start && start->size() == problem.dimension()) {
        y = start->cwiseQuotient(scale);
        if (!barrier(f, y, 1.0))
            y.resize(0);
    }
    if (y.size() == 0) {
        auto p1 = phase_one(f, settings);
        sol.iterations += p1.iterations;
        if (!p1.y) {
            sol.status = p1.status;
            sol.note = p1.note;
            return sol;
        }
        y = *p1.y;
    }

    const int m = f.barrier_degree();
    double t = settings.initial_t;
    auto never = [](const Vector&) { return false; };
    for (int outer = 0; outer < settings.max_outer; ++outer) {
        const auto c = center(f, y, t, settings, never);
        sol.iterations += c.steps;
        const double obj = f.c.dot(y);
        emit(settings, "barrier", outer, t, obj, c.decrement, worst_slack(f, y));
        if (c.result == CenterResult::Failed) {
            sol.status = Status::NumericalFailure;
            sol.note = "Newton system could not be solved";
            break;
        }
        if (obj < kUnboundedObjective) {
            sol.status = Status::NumericalFailure;
            sol.note = "objective appears unbounded";
            break;
        }
        sol.certified_gap = m / t;
        if (sol.certified_gap <= settings.tol_gap) {
            sol.status = Status::Optimal;
            break;
        }
        t /= settings.barrier_reduction;
        sol.status = Status::MaxIterations;
    }

    sol.x = y.cwiseProduct(scale);
    sol.objective = problem.objective().dot(sol.x);
    const auto report = lmi::check_point(problem, sol.x);
    sol.worst_margin = report.worst_margin;
    if (sol.status == Status::Optimal && !report.feasible) {
        sol.status = Status::NumericalFailure;
        sol.note = "returned point violates a block after unscaling";
        for (const auto& b : report.blocks)
            if (b.min_eig == report.worst_margin) {
                sol.note += " (" + b.name + ", min eigenvalue " + std::to_string(b.min_eig) + ")";
                break;
            }
    }
    return sol;
}

NewtonStep newton_step(const lmi::LmiProblem& problem, const Vector& x, double t)
{
    const Form f = make_form(problem, Vector::Ones(problem.dimension()), 0.0);
    NewtonStep step;
    if (!derivatives(f, x, t, step.gradient, step.hessian))
        throw Error(ErrorCode::NumericalFailure, "newton_step requires a strictly feasible point");
    auto d = solve_newton(step.hessian, step.gradient);
    if (!d)
        throw Error(ErrorCode::NumericalFailure, "Newton system is not positive definite");
    step.direction = *d;
    step.decrement = std::sqrt(std::max(0.0, -step.gradient.dot(*d)));
    return step;
}

std::optional<double> barrier_value(const lmi::LmiProblem& problem, const Vector& x, double t)
{
    const Form f = make_form(problem, Vector::Ones(problem.dimension()), 0.0);
    return barrier(f, x, t);
}

}  // namespace lipobs::sdp
