#include "lipobs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lipobs::sim {

TimeSignal TimeSignal::parse(const std::vector<std::string>& texts)
{
    TimeSignal s;
    const expr::Symbols symbols{0, 0, true};
    for (const auto& text : texts)
        s.components_.push_back(expr::parse(text, symbols));
    return s;
}

Vector TimeSignal::eval(double t) const
{
    Vector v(size());
    const expr::Bindings b{{}, {}, t};
    for (int i = 0; i < size(); ++i)
        v(i) = components_[static_cast<std::size_t>(i)].eval(b);
    return v;
}

void SimulationConfig::validate(const PlantModel& plant) const
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw invalid_input("dt must be positive");
    if (!(t_end >= dt) || !std::isfinite(t_end))
        throw invalid_input("t_end must be at least dt");
    if (x0.size() != plant.n() || xhat0.size() != plant.n())
        throw invalid_input("initial states must have dimension n = " + std::to_string(plant.n()));
    if (!x0.allFinite() || !xhat0.allFinite())
        throw invalid_input("initial states must be finite");
    if (disturbance && disturbance->size() != plant.q())
        throw invalid_input("disturbance must have dimension q = " + std::to_string(plant.q()));
    if (input && input->size() != plant.m())
        throw invalid_input("input must have dimension m = " + std::to_string(plant.m()));
    if (substeps < 0)
        throw invalid_input("substeps must be non-negative");
}

Trace Trace::map_states(const Matrix& m) const
{
    Trace out = *this;
    out.x = x * m.transpose();
    out.xhat = xhat * m.transpose();
    out.e = out.x - out.xhat;
    out.e_norm = out.e.rowwise().norm();
    return out;
}

namespace {

struct Model {
    const PlantModel& plant;
    const Matrix& L;
    const expr::VectorField* delta;
    bool delta_in_observer;
    const SimulationConfig& config;
    int n;

    [[nodiscard]] Vector w(double t) const
    {
        return config.disturbance ? config.disturbance->eval(t) : Vector(Vector::Zero(plant.q()));
    }
    [[nodiscard]] Vector u(double t) const
    {
        return config.input ? config.input->eval(t) : Vector(Vector::Zero(plant.m()));
    }

    [[nodiscard]] Vector rhs(double t, const Vector& s) const
    {
        const auto x = s.head(n);
        const auto xh = s.tail(n);
        const Vector wt = w(t);
        const Vector ut = u(t);
        Vector d(2 * n);
        Vector fx = plant.A * x + plant.phi.eval(x, ut);
        if (delta)
            fx += delta->eval(x, ut);
        if (plant.q() > 0)
            fx += plant.B * wt;
        Vector y = plant.C * x;
        if (plant.q() > 0)
            y += plant.D * wt;
        d.head(n) = fx;
        d.tail(n) = plant.A * xh + plant.phi.eval(xh, ut) + L * (y - plant.C * xh);
        if (delta && delta_in_observer)
            d.tail(n) += delta->eval(xh, ut);
        return d;
    }
};

}  // namespace

BlowUp::BlowUp(double time)
    : Error(ErrorCode::SimulationBlowUp, "state became non-finite at t = " + linalg::format_double(time)), time_(time)
{
}

namespace {

int auto_substeps(const PlantModel& plant, const Matrix& L, double dt)
{
    const double rho = std::max(linalg::spectral_radius(plant.A), linalg::spectral_radius(plant.A - L * plant.C));
    const double k = std::ceil(dt * rho);
    if (!std::isfinite(k) || k > 1e7)
        throw Error(ErrorCode::NumericalFailure, "observer is too stiff for fixed-step RK4 (spectral radius " +
                                                     std::to_string(rho) + ")");
    return std::max(1, static_cast<int>(k));
}

Trace run(const PlantModel& plant, const Matrix& L, const expr::VectorField* delta, Perturbation mode,
          const SimulationConfig& config)
{
    plant.validate();
    config.validate(plant);
    const int n = plant.n();
    if (L.rows() != n || L.cols() != plant.p())
        throw invalid_input("gain must be n x p");
    if (delta && (delta->n() != n || delta->m() != plant.m()))
        throw invalid_input("perturbation field dimensions do not match the plant");

    const Model model{plant, L, delta, mode == Perturbation::Shared, config, n};
    const auto steps = static_cast<Eigen::Index>(std::llround(config.t_end / config.dt));
    const int sub = config.substeps > 0 ? config.substeps : auto_substeps(plant, L, config.dt);
    const double h = config.dt / sub;

    Trace tr;
    tr.substeps = sub;
    tr.t.resize(steps + 1);
    tr.x.resize(steps + 1, n);
    tr.xhat.resize(steps + 1, n);
    tr.w.resize(steps + 1, plant.q());
    Vector s(2 * n);
    s << config.x0, config.xhat0;

    auto record = [&](Eigen::Index k, double t) {
        tr.t(k) = t;
        tr.x.row(k) = s.head(n).transpose();
        tr.xhat.row(k) = s.tail(n).transpose();
        tr.w.row(k) = model.w(t).transpose();
    };
    record(0, 0.0);
    for (Eigen::Index k = 1; k <= steps; ++k) {
        const double t0 = static_cast<double>(k - 1) * config.dt;
        for (int j = 0; j < sub; ++j) {
            const double t = t0 + j * h;
            try {
                const Vector k1 = model.rhs(t, s);
                const Vector k2 = model.rhs(t + 0.5 * h, s + 0.5 * h * k1);
                const Vector k3 = model.rhs(t + 0.5 * h, s + 0.5 * h * k2);
                const Vector k4 = model.rhs(t + h, s + h * k3);
                s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            catch (const expr::ExprError& e) {
                if (e.kind() != expr::ExprErrorKind::Overflow)
                    throw;
                s.setConstant(std::numeric_limits<double>::quiet_NaN());
            }
            if (!s.allFinite())
                throw BlowUp(t + h);
        }
        record(k, static_cast<double>(k) * config.dt);
    }
    tr.e = tr.x - tr.xhat;
    tr.e_norm = tr.e.rowwise().norm();
    tr.z = plant.H.rows() > 0 ? Matrix(tr.e * plant.H.transpose()) : Matrix(steps + 1, 0);
    return tr;
}

}  // namespace

Trace simulate(const PlantModel& plant, const Matrix& L, const SimulationConfig& config)
{
    return run(plant, L, nullptr, Perturbation::PlantOnly, config);
}

Trace simulate_perturbed(const PlantModel& plant, const Matrix& L, const expr::VectorField& delta,
                         const SimulationConfig& config, Perturbation mode)
{
    return run(plant, L, &delta, mode, config);
}

DecayReport decay_check(const Trace& trace, const ObserverDesign& design)
{
    DecayReport r;
    r.kappa_p = linalg::condition_number_spd(linalg::symmetrize(design.P));
    r.disturbance_free = trace.w.size() == 0 || trace.w.cwiseAbs().maxCoeff() == 0.0;
    if (trace.samples() == 0 || !std::isfinite(r.kappa_p))
        return r;
    const double e0 = trace.e_norm(0);
    const double scale = std::sqrt(r.kappa_p) * e0;
    for (Eigen::Index k = 0; k < trace.samples(); ++k) {
        const double bound = std::exp(-design.beta * trace.t(k)) * scale;
        double ratio;
        if (bound > 0.0)
            ratio = trace.e_norm(k) / bound;
        else
            ratio = trace.e_norm(k) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        if (k == 0 || ratio > r.worst_ratio) {
            r.worst_ratio = ratio;
            r.worst_time = trace.t(k);
        }
    }
    r.pass = r.worst_ratio <= r.tolerance;
    return r;
}

std::optional<double> empirical_gain(const Trace& trace)
{
    const Eigen::Index k = trace.samples();
    if (k < 2 || trace.w.cols() == 0)
        return std::nullopt;
    const Vector wn = trace.w.rowwise().squaredNorm();
    const Vector zn = trace.z.cols() > 0 ? Vector(trace.z.rowwise().squaredNorm()) : Vector(Vector::Zero(k));
    double iw = 0.0, iz = 0.0;
    for (Eigen::Index i = 1; i < k; ++i) {
        const double h = trace.t(i) - trace.t(i - 1);
        iw += 0.5 * h * (wn(i) + wn(i - 1));
        iz += 0.5 * h * (zn(i) + zn(i - 1));
    }
    if (!(iw > 0.0))
        return std::nullopt;
    return std::sqrt(iz / iw);
}

PerturbationReport perturbation_test(const PlantModel& plant, const ObserverDesign& design,
                                     const expr::VectorField& delta, const SimulationConfig& config,
                                     Perturbation mode, int samples_per_axis)
{
    PerturbationReport r;
    if (plant.gamma)
        r.margin = robustness_margin(design, *plant.gamma);
    Trace tr;
    try {
        tr = simulate_perturbed(plant, design.L, delta, config, mode);
    }
    catch (const BlowUp& e) {
        r.blew_up = true;
        r.blow_up_time = e.time();
        r.note = e.what();
    }
    lipschitz::Region box;
    box.samples_per_axis = samples_per_axis;
    if (!r.blew_up) {
        box.lower = tr.x.colwise().minCoeff().cwiseMin(tr.xhat.colwise().minCoeff()).transpose();
        box.upper = tr.x.colwise().maxCoeff().cwiseMax(tr.xhat.colwise().maxCoeff()).transpose();
    }
    else {
        box.lower = config.x0.cwiseMin(config.xhat0);
        box.upper = config.x0.cwiseMax(config.xhat0);
    }
    r.delta_lipschitz = lipschitz::estimate_lipschitz(delta, box, Vector::Zero(plant.m())).value;
    r.within_certificate = r.margin && r.delta_lipschitz <= *r.margin;
    if (!r.blew_up) {
        const double e0 = tr.e_norm(0);
        r.final_ratio = e0 > 0.0 ? tr.e_norm(tr.samples() - 1) / e0 : tr.e_norm(tr.samples() - 1);
        r.converged = r.final_ratio <= kConvergenceRatio;
    }
    if (!r.within_certificate) {
        if (!r.note.empty())
            r.note += "; ";
        r.note += r.margin ? "outside certificate" : "outside certificate (plant gamma unknown)";
    }
    return r;
}

void write_csv(const Trace& trace, std::ostream& os, const CsvOptions& options)
{
    if (options.stride < 1)
        throw invalid_input("CSV stride must be at least 1");
    const auto n = trace.x.cols(), q = trace.w.cols(), r = trace.z.cols();
    os << "t";
    for (Eigen::Index i = 0; i < n; ++i)
        os << ",x" << i + 1;
    for (Eigen::Index i = 0; i < n; ++i)
        os << ",xhat" << i + 1;
    os << ",e_norm";
    for (Eigen::Index i = 0; i < q; ++i)
        os << ",w" << i + 1;
    for (Eigen::Index i = 0; i < r; ++i)
        os << ",z" << i + 1;
    os << '\n';
    const auto last = trace.samples() - 1;
    for (Eigen::Index k = 0; k <= last; k += options.stride) {
        os << linalg::format_double(trace.t(k));
        for (Eigen::Index i = 0; i < n; ++i)
            os << ',' << linalg::format_double(trace.x(k, i));
        for (Eigen::Index i = 0; i < n; ++i)
            os << ',' << linalg::format_double(trace.xhat(k, i));
        os << ',' << linalg::format_double(trace.e_norm(k));
        for (Eigen::Index i = 0; i < q; ++i)
            os << ',' << linalg::format_double(trace.w(k, i));
        for (Eigen::Index i = 0; i < r; ++i)
            os << ',' << linalg::format_double(trace.z(k, i));
        os << '\n';
    }
}

}  // namespace lipobs::sim
