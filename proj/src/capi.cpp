#include "lipobs/lipobs.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "lipobs/io.hpp"
#include "lipobs/lipschitz.hpp"
#include "lipobs/sim.hpp"

using namespace lipobs;

struct lipobs_plant {
    io::PlantFile file;
};

struct lipobs_design {
    io::DesignFile file;
};

struct lipobs_trace {
    sim::Trace trace;  // original coordinates
    sim::DecayReport decay;
    std::vector<std::string> columns;
};

namespace {

thread_local std::string last_error;

struct Logger {
    std::mutex mutex;
    int level = 0;
    lipobs_log_fn fn = nullptr;
    void* user = nullptr;
};

Logger& logger()
{
    static Logger l;
    return l;
}

void log(int level, const std::string& msg)
{
    auto& l = logger();
    std::lock_guard lock(l.mutex);
    if (l.fn && level <= l.level)
        l.fn(level, msg.c_str(), l.user);
}

bool logging(int level)
{
    auto& l = logger();
    std::lock_guard lock(l.mutex);
    return l.fn && level <= l.level;
}

int fail(int code, const std::string& msg)
{
    last_error = msg;
    return code;
}

template <class F>
int guard(F&& f)
{
    try {
        f();
        return LIPOBS_OK;
    }
    catch (const Error& e) {
        return fail(static_cast<int>(e.code()), e.what());
    }
    catch (const std::bad_alloc&) {
        return fail(LIPOBS_E_NUMERICAL, "out of memory");
    }
    catch (const std::exception& e) {
        return fail(LIPOBS_E_NUMERICAL, std::string("internal error: ") + e.what());
    }
}

void require(const void* p, const char* what)
{
    if (!p)
        throw invalid_input(std::string(what) + " must not be NULL");
}

Matrix from_rows(const double* data, int rows, int cols)
{
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = data[static_cast<std::size_t>(i) * cols + j];
    return m;
}

Vector from_array(const double* data, int n)
{
    Vector v(n);
    for (int i = 0; i < n; ++i)
        v(i) = data[i];
    return v;
}

std::vector<std::string> strings(const char* const* items, std::size_t count, const char* what)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        if (!items[i])
            throw invalid_input(std::string(what) + " entry " + std::to_string(i + 1) + " is NULL");
        out.emplace_back(items[i]);
    }
    return out;
}

bool given(double v) { return !std::isnan(v); }

DesignOptions design_options(const lipobs_synth_options& o)
{
    DesignOptions opts;
    if (given(o.margin)) {
        if (!(o.margin > 0.0))
            throw invalid_input("margin must be positive");
        opts.margin = o.margin;
    }
    if (given(o.gain_relax)) {
        if (!(o.gain_relax >= 0.0))
            throw invalid_input("gain_relax must be non-negative");
        opts.gain_relax = o.gain_relax;
    }
    if (logging(2))
        opts.solver.log = [](const sdp::IterationLog& it) {
            std::ostringstream s;
            s << it.phase << " iter " << it.iteration << " t=" << it.t << " obj=" << it.objective
              << " decrement=" << it.decrement << " worst_margin=" << it.worst_margin;
            log(2, s.str());
        };
    return opts;
}

ObserverDesign dispatch(const PlantModel& pm, const lipobs_synth_options& o)
{
    const auto opts = design_options(o);
    const double beta = given(o.beta) ? o.beta : 0.0;
    auto reject = [&](bool present, const char* flag, const char* theorem) {
        if (present)
            throw invalid_input(std::string(flag) + " is not used by theorem " + theorem);
    };
    auto gamma_or_plant = [&](const char* theorem) {
        if (given(o.gamma))
            return o.gamma;
        if (!pm.gamma)
            throw invalid_input(std::string("theorem ") + theorem + " needs gamma (option or plant file)");
        return *pm.gamma;
    };
    switch (o.theorem) {
    case LIPOBS_T1:
        reject(given(o.gamma), "gamma", "t1");
        reject(given(o.mu), "mu", "t1");
        reject(given(o.lambda), "lambda", "t1");
        if (beta != 0.0)
            throw invalid_input("theorem t1 has no decay rate; use t3 for beta > 0");
        return design_max_lipschitz(pm, opts);
    case LIPOBS_T3:
        reject(given(o.gamma), "gamma", "t3");
        reject(given(o.mu), "mu", "t3");
        reject(given(o.lambda), "lambda", "t3");
        return design_with_decay(pm, beta, opts);
    case LIPOBS_T4:
        reject(given(o.mu), "mu", "t4");
        reject(given(o.lambda), "lambda", "t4");
        return design_hinf(pm, beta, gamma_or_plant("t4"), opts);
    case LIPOBS_T5:
        reject(given(o.gamma), "gamma", "t5");
        reject(given(o.mu), "mu", "t5");
        if (!given(o.lambda))
            throw invalid_input("theorem t5 needs lambda");
        return design_multiobjective(pm, beta, o.lambda, opts);
    case LIPOBS_FEAS: {
        reject(given(o.lambda), "lambda", "feas");
        std::optional<double> mu;
        if (given(o.mu))
            mu = o.mu;
        return design_feasibility(pm, gamma_or_plant("feas"), mu, beta, opts);
    }
    default: throw invalid_input("unknown theorem " + std::to_string(o.theorem));
    }
}

void copy_out(const Matrix& m, double* out, std::size_t capacity)
{
    if (!out)
        return;
    if (capacity < static_cast<std::size_t>(m.size()))
        throw invalid_input("output buffer holds " + std::to_string(capacity) + " values, need " +
                            std::to_string(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out[i * m.cols() + j] = m(i, j);
}

bool same_transform(const std::optional<Matrix>& a, const std::optional<Matrix>& b)
{
    if (a.has_value() != b.has_value())
        return false;
    return !a || (a->rows() == b->rows() && a->cols() == b->cols() && *a == *b);
}

struct SimSetup {
    PlantModel model;
    Matrix L;
    sim::SimulationConfig config;
};

SimSetup sim_setup(const lipobs_plant* plant, const lipobs_design* design, const lipobs_sim_config* config)
{
    require(plant, "plant");
    require(design, "design");
    require(config, "config");
    if (!same_transform(plant->file.transform, design->file.transform))
        throw invalid_input("design and plant use different coordinates (transform T differs)");
    SimSetup s;
    s.model = plant->file.design_model();
    const int n = s.model.n();
    s.L = design->file.design.L;
    if (s.L.rows() != n || s.L.cols() != s.model.p())
        throw invalid_input("design gain is " + std::to_string(s.L.rows()) + "x" + std::to_string(s.L.cols()) +
                            ", plant needs " + std::to_string(n) + "x" + std::to_string(s.model.p()));
    auto& c = s.config;
    c.t_end = config->t_end;
    c.dt = config->dt;
    c.substeps = config->substeps;
    c.x0 = config->x0 ? from_array(config->x0, n) : Vector(Vector::Zero(n));
    c.xhat0 = config->xhat0 ? from_array(config->xhat0, n) : Vector(Vector::Zero(n));
    if (plant->file.transform) {
        c.x0 = *plant->file.transform * c.x0;
        c.xhat0 = *plant->file.transform * c.xhat0;
    }
    if (config->disturbance)
        c.disturbance = sim::TimeSignal::parse(strings(config->disturbance, config->disturbance_count, "disturbance"));
    if (config->input)
        c.input = sim::TimeSignal::parse(strings(config->input, config->input_count, "input"));
    return s;
}

std::vector<std::string> column_names(const sim::Trace& t)
{
    std::vector<std::string> c{"t"};
    for (Eigen::Index i = 0; i < t.x.cols(); ++i)
        c.push_back("x" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < t.x.cols(); ++i)
        c.push_back("xhat" + std::to_string(i + 1));
    c.emplace_back("e_norm");
    for (Eigen::Index i = 0; i < t.w.cols(); ++i)
        c.push_back("w" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < t.z.cols(); ++i)
        c.push_back("z" + std::to_string(i + 1));
    return c;
}

}  // namespace

extern "C" {

const char* lipobs_version(void) { return "1.0.0"; }

const char* lipobs_last_error(void) { return last_error.c_str(); }

void lipobs_set_logger(int level, lipobs_log_fn fn, void* user)
{
    auto& l = logger();
    std::lock_guard lock(l.mutex);
    l.level = level;
    l.fn = fn;
    l.user = user;
}

int lipobs_plant_load(const char* path, lipobs_plant** out)
{
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        *out = new lipobs_plant{io::load_plant(path)};
    });
}

int lipobs_plant_parse(const char* text, lipobs_plant** out)
{
    return guard([&] {
        require(text, "text");
        require(out, "out");
        *out = nullptr;
        std::istringstream in(text);
        *out = new lipobs_plant{io::read_plant(in)};
    });
}

int lipobs_plant_save(const lipobs_plant* plant, const char* path)
{
    return guard([&] {
        require(plant, "plant");
        require(path, "path");
        io::save_plant(plant->file, path);
    });
}

int lipobs_plant_create(int n, int m, int p, const double* A, const double* C, const char* const* phi,
                        lipobs_plant** out)
{
    return guard([&] {
        require(out, "out");
        *out = nullptr;
        if (n <= 0 || m < 0 || p <= 0)
            throw invalid_input("dimensions must satisfy n > 0, m >= 0, p > 0");
        require(A, "A");
        require(C, "C");
        auto field = phi ? expr::VectorField::parse(strings(phi, static_cast<std::size_t>(n), "phi"), n, m)
                         : expr::VectorField::zero(n, m);
        io::PlantFile f;
        f.model = make_plant(from_rows(A, n, n), from_rows(C, p, n), std::move(field));
        f.model.validate();
        *out = new lipobs_plant{std::move(f)};
    });
}

int lipobs_plant_set_disturbance(lipobs_plant* plant, int q, int r, const double* B, const double* D,
                                 const double* H)
{
    return guard([&] {
        require(plant, "plant");
        if (q < 0 || r < 0)
            throw invalid_input("q and r must be non-negative");
        auto& pm = plant->file.model;
        const int n = pm.n(), p = pm.p();
        if (q > 0)
            require(B, "B");
        if (r > 0)
            require(H, "H");
        PlantModel next = pm;
        next.B = q > 0 ? from_rows(B, n, q) : Matrix(Matrix::Zero(n, 0));
        next.D = D && q > 0 ? from_rows(D, p, q) : Matrix(Matrix::Zero(p, q));
        next.H = r > 0 ? from_rows(H, r, n) : Matrix(Matrix::Zero(0, n));
        next.validate();
        pm = std::move(next);
    });
}

int lipobs_plant_set_gamma(lipobs_plant* plant, double gamma)
{
    return guard([&] {
        require(plant, "plant");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw invalid_input("gamma must be positive");
        plant->file.model.gamma = gamma;
    });
}

int lipobs_plant_set_region(lipobs_plant* plant, const double* lower, const double* upper)
{
    return guard([&] {
        require(plant, "plant");
        require(lower, "lower");
        require(upper, "upper");
        const int n = plant->file.model.n();
        PlantModel next = plant->file.model;
        next.region = Box{from_array(lower, n), from_array(upper, n)};
        next.validate();
        plant->file.model = std::move(next);
    });
}

int lipobs_plant_set_transform(lipobs_plant* plant, const double* T)
{
    return guard([&] {
        require(plant, "plant");
        if (!T) {
            plant->file.transform.reset();
            return;
        }
        const int n = plant->file.model.n();
        io::PlantFile next = plant->file;
        next.transform = from_rows(T, n, n);
        (void)next.design_model();
        plant->file = std::move(next);
    });
}

int lipobs_plant_dims(const lipobs_plant* plant, int* n, int* m, int* p, int* q, int* r)
{
    return guard([&] {
        require(plant, "plant");
        const auto& pm = plant->file.model;
        if (n)
            *n = pm.n();
        if (m)
            *m = pm.m();
        if (p)
            *p = pm.p();
        if (q)
            *q = pm.q();
        if (r)
            *r = pm.r();
    });
}

void lipobs_plant_free(lipobs_plant* plant) { delete plant; }

int lipobs_estimate(const lipobs_plant* plant, const double* lower, const double* upper, int samples,
                    int transformed, double* value, double* argmax)
{
    return guard([&] {
        require(plant, "plant");
        require(value, "value");
        if ((lower == nullptr) != (upper == nullptr))
            throw invalid_input("give both lower and upper, or neither");
        if (transformed && !plant->file.transform)
            throw invalid_input("plant has no transform T");
        const PlantModel pm = transformed ? plant->file.design_model() : plant->file.model;
        lipschitz::Region region;
        region.samples_per_axis = samples > 0 ? samples : lipschitz::kDefaultSamples;
        if (lower) {
            region.lower = from_array(lower, pm.n());
            region.upper = from_array(upper, pm.n());
        }
        else if (pm.region) {
            region.lower = pm.region->lower;
            region.upper = pm.region->upper;
        }
        else {
            throw invalid_input("no region: give bounds or add a region to the plant");
        }
        const auto est = lipschitz::estimate_lipschitz(pm.phi, region, Vector::Zero(pm.m()));
        *value = est.value;
        if (argmax)
            for (Eigen::Index i = 0; i < est.argmax.size(); ++i)
                argmax[i] = est.argmax(i);
    });
}

void lipobs_synth_options_init(lipobs_synth_options* options)
{
    if (!options)
        return;
    options->theorem = LIPOBS_T1;
    options->beta = NAN;
    options->gamma = NAN;
    options->mu = NAN;
    options->lambda = NAN;
    options->margin = NAN;
    options->gain_relax = NAN;
}

int lipobs_synthesize(const lipobs_plant* plant, const lipobs_synth_options* options, lipobs_design** out)
{
    return guard([&] {
        require(plant, "plant");
        require(options, "options");
        require(out, "out");
        *out = nullptr;
        const PlantModel pm = plant->file.design_model();
        io::DesignFile f;
        f.design = dispatch(pm, *options);
        f.transform = plant->file.transform;
        f.verification = verify_design(pm, f.design, given(options->margin) ? options->margin : lmi::kDefaultMargin);
        if (logging(1)) {
            std::ostringstream s;
            s << "synthesize " << to_string(f.design.theorem) << ": " << sdp::to_string(f.design.status)
              << ", objective " << linalg::format_double(f.design.objective) << ", gap "
              << f.design.certified_gap << ", " << f.design.iterations << " Newton steps";
            log(1, s.str());
        }
        *out = new lipobs_design{std::move(f)};
    });
}

int lipobs_design_verify(const lipobs_design* design, const lipobs_plant* plant, int* pass)
{
    return guard([&] {
        require(design, "design");
        require(plant, "plant");
        require(pass, "pass");
        if (!same_transform(plant->file.transform, design->file.transform))
            throw invalid_input("design and plant use different coordinates (transform T differs)");
        const PlantModel pm = plant->file.design_model();
        const auto& d = design->file.design;
        if (d.L.rows() != pm.n() || d.L.cols() != pm.p())
            throw invalid_input("design dimensions do not match the plant");
        *pass = verify_design(pm, d).pass ? 1 : 0;
    });
}

int lipobs_design_load(const char* path, lipobs_design** out)
{
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        *out = new lipobs_design{io::load_design(path)};
    });
}

int lipobs_design_save(const lipobs_design* design, const char* path)
{
    return guard([&] {
        require(design, "design");
        require(path, "path");
        io::save_design(design->file, path);
    });
}

int lipobs_design_dims(const lipobs_design* design, int* n, int* p)
{
    return guard([&] {
        require(design, "design");
        if (n)
            *n = static_cast<int>(design->file.design.L.rows());
        if (p)
            *p = static_cast<int>(design->file.design.L.cols());
    });
}

const char* lipobs_design_theorem(const lipobs_design* design)
{
    return design ? to_string(design->file.design.theorem) : "";
}

int lipobs_design_scalar(const lipobs_design* design, const char* name, double* value)
{
    return guard([&] {
        require(design, "design");
        require(name, "name");
        require(value, "value");
        const auto& d = design->file.design;
        const std::string key = name;
        std::optional<double> v;
        if (key == "gamma_star")
            v = d.gamma_star;
        else if (key == "mu_star")
            v = d.mu_star;
        else if (key == "beta")
            v = d.beta;
        else if (key == "lambda")
            v = d.lambda;
        else if (key == "epsilon")
            v = d.epsilon;
        else if (key == "alpha")
            v = d.alpha;
        else if (key == "xi")
            v = d.xi;
        else if (key == "zeta")
            v = d.zeta;
        else if (key == "objective")
            v = d.objective;
        else if (key == "certified_gap")
            v = d.certified_gap;
        else if (key == "kappa_p")
            v = linalg::condition_number_spd(linalg::symmetrize(d.P));
        else
            throw invalid_input("unknown design scalar '" + key + "'");
        if (!v)
            throw invalid_input("design has no " + key);
        *value = *v;
    });
}

int lipobs_design_matrix(const lipobs_design* design, const char* name, double* out, std::size_t capacity,
                         int* rows, int* cols)
{
    return guard([&] {
        require(design, "design");
        require(name, "name");
        const auto& f = design->file;
        const std::string key = name;
        Matrix m;
        if (key == "L")
            m = f.design.L;
        else if (key == "P")
            m = f.design.P;
        else if (key == "F")
            m = f.design.F;
        else if (key == "L_original")
            m = f.original_gain();
        else if (key == "T") {
            if (!f.transform)
                throw invalid_input("design has no transform");
            m = *f.transform;
        }
        else
            throw invalid_input("unknown design matrix '" + key + "'");
        if (rows)
            *rows = static_cast<int>(m.rows());
        if (cols)
            *cols = static_cast<int>(m.cols());
        copy_out(m, out, capacity);
    });
}

int lipobs_design_verified(const lipobs_design* design, int* pass)
{
    return guard([&] {
        require(design, "design");
        require(pass, "pass");
        if (!design->file.verification)
            throw invalid_input("design carries no verification report");
        *pass = design->file.verification->pass ? 1 : 0;
    });
}

void lipobs_design_free(lipobs_design* design) { delete design; }

int lipobs_sweep(const lipobs_plant* plant, const double* betas, std::size_t nb, const double* lambdas,
                 std::size_t nl, lipobs_sweep_cell* cells)
{
    int first_error = LIPOBS_OK;
    std::string first_message;
    bool any = false;
    const int code = guard([&] {
        require(plant, "plant");
        require(betas, "betas");
        require(lambdas, "lambdas");
        require(cells, "cells");
        if (nb == 0 || nl == 0)
            throw invalid_input("sweep grids must be non-empty");
        const PlantModel pm = plant->file.design_model();
        lipobs_synth_options o;
        lipobs_synth_options_init(&o);
        const auto opts = design_options(o);
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = 0; j < nl; ++j) {
                auto& c = cells[i * nl + j];
                c = {betas[i], lambdas[j], NAN, NAN, NAN, LIPOBS_OK};
                c.status = guard([&] {
                    const auto d = design_multiobjective(pm, betas[i], lambdas[j], opts);
                    c.gamma_star = d.gamma_star;
                    c.mu_star = d.mu_star.value_or(NAN);
                    const Matrix l = plant->file.transform ? lipschitz::backmap_gain(d.L, *plant->file.transform)
                                                           : d.L;
                    c.gain_norm = linalg::max_singular_value(l);
                });
                if (c.status == LIPOBS_OK)
                    any = true;
                else if (first_error == LIPOBS_OK) {
                    first_error = c.status;
                    first_message = last_error;
                }
                log(1, "sweep cell beta=" + linalg::format_double(betas[i]) +
                           " lambda=" + linalg::format_double(lambdas[j]) + ": " +
                           (c.status == LIPOBS_OK ? "ok" : last_error));
            }
    });
    if (code != LIPOBS_OK)
        return code;
    if (!any)
        return fail(first_error, "no sweep cell solved; first failure: " + first_message);
    return LIPOBS_OK;
}

void lipobs_sim_config_init(lipobs_sim_config* config)
{
    if (!config)
        return;
    config->t_end = 10.0;
    config->dt = 1e-3;
    config->x0 = nullptr;
    config->xhat0 = nullptr;
    config->disturbance = nullptr;
    config->disturbance_count = 0;
    config->input = nullptr;
    config->input_count = 0;
    config->substeps = 0;
}

int lipobs_simulate(const lipobs_plant* plant, const lipobs_design* design, const lipobs_sim_config* config,
                    lipobs_trace** out)
{
    return guard([&] {
        require(out, "out");
        *out = nullptr;
        const auto s = sim_setup(plant, design, config);
        if (design->file.verification && !design->file.verification->pass)
            log(1, "warning: simulating a design that failed verification");
        auto t = std::make_unique<lipobs_trace>();
        const auto tr = sim::simulate(s.model, s.L, s.config);
        t->decay = sim::decay_check(tr, design->file.design);
        t->trace = plant->file.transform ? tr.map_states(plant->file.transform->inverse()) : tr;
        t->columns = column_names(t->trace);
        log(1, "simulate: " + std::to_string(tr.samples()) + " samples, " + std::to_string(tr.substeps) +
                   " RK4 steps per sample");
        *out = t.release();
    });
}

int lipobs_trace_samples(const lipobs_trace* trace, std::size_t* samples)
{
    return guard([&] {
        require(trace, "trace");
        require(samples, "samples");
        *samples = static_cast<std::size_t>(trace->trace.samples());
    });
}

int lipobs_trace_column_count(const lipobs_trace* trace, std::size_t* count)
{
    return guard([&] {
        require(trace, "trace");
        require(count, "count");
        *count = trace->columns.size();
    });
}

const char* lipobs_trace_column_name(const lipobs_trace* trace, std::size_t index)
{
    if (!trace || index >= trace->columns.size())
        return nullptr;
    return trace->columns[index].c_str();
}

int lipobs_trace_column(const lipobs_trace* trace, const char* name, double* out, std::size_t capacity)
{
    return guard([&] {
        require(trace, "trace");
        require(name, "name");
        const auto& t = trace->trace;
        const std::string key = name;
        Vector v;
        auto indexed = [&](const std::string& prefix, const Matrix& m) {
            if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0)
                return false;
            const std::string digits = key.substr(prefix.size());
            if (digits.find_first_not_of("0123456789") != std::string::npos || digits[0] == '0')
                return false;
            const long k = std::stol(digits);
            if (k < 1 || k > m.cols())
                return false;
            v = m.col(k - 1);
            return true;
        };
        if (key == "t")
            v = t.t;
        else if (key == "e_norm")
            v = t.e_norm;
        else if (!indexed("xhat", t.xhat) && !indexed("x", t.x) && !indexed("w", t.w) && !indexed("z", t.z))
            throw invalid_input("unknown trace column '" + key + "'");
        copy_out(Matrix(v), out, capacity);
    });
}

int lipobs_trace_decay(const lipobs_trace* trace, lipobs_decay_report* report)
{
    return guard([&] {
        require(trace, "trace");
        require(report, "report");
        const auto& d = trace->decay;
        *report = {d.pass ? 1 : 0, d.disturbance_free ? 1 : 0, d.worst_ratio, d.worst_time, d.kappa_p};
    });
}

int lipobs_trace_gain(const lipobs_trace* trace, double* gain)
{
    return guard([&] {
        require(trace, "trace");
        require(gain, "gain");
        const auto g = sim::empirical_gain(trace->trace);
        if (!g)
            throw invalid_input("empirical gain is undefined for a zero disturbance");
        *gain = *g;
    });
}

int lipobs_trace_write_csv(const lipobs_trace* trace, const char* path, int stride)
{
    return guard([&] {
        require(trace, "trace");
        require(path, "path");
        std::ofstream f(path);
        if (!f)
            throw invalid_input(std::string("cannot open '") + path + "' for writing");
        sim::write_csv(trace->trace, f, {stride});
        if (!f)
            throw invalid_input(std::string("write to '") + path + "' failed");
    });
}

void lipobs_trace_free(lipobs_trace* trace) { delete trace; }

int lipobs_perturbation_test(const lipobs_plant* plant, const lipobs_design* design, const char* const* delta,
                             std::size_t count, const lipobs_sim_config* config, int shared,
                             lipobs_perturbation_report* report)
{
    return guard([&] {
        require(delta, "delta");
        require(report, "report");
        const auto s = sim_setup(plant, design, config);
        const int n = s.model.n();
        if (count != static_cast<std::size_t>(n))
            throw invalid_input("delta needs n = " + std::to_string(n) + " expressions");
        const auto field = expr::VectorField::parse(strings(delta, count, "delta"), n, s.model.m());
        ObserverDesign d = design->file.design;
        const auto r = sim::perturbation_test(s.model, d, field, s.config,
                                              shared ? sim::Perturbation::Shared : sim::Perturbation::PlantOnly);
        *report = {r.delta_lipschitz, r.margin.value_or(NAN), r.within_certificate ? 1 : 0, r.blew_up ? 1 : 0,
                   r.converged ? 1 : 0, r.final_ratio};
    });
}

}  // extern "C"
