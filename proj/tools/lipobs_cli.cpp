#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lipobs/lipobs.h"

namespace {

constexpr int kExitUsage = 1;

struct Failure {
    int code;
    std::string message;
};

void check(int status)
{
    if (status != LIPOBS_OK)
        throw Failure{status, lipobs_last_error()};
}

void usage(const std::string& message) { throw Failure{kExitUsage, message}; }

using PlantPtr = std::unique_ptr<lipobs_plant, decltype(&lipobs_plant_free)>;
using DesignPtr = std::unique_ptr<lipobs_design, decltype(&lipobs_design_free)>;
using TracePtr = std::unique_ptr<lipobs_trace, decltype(&lipobs_trace_free)>;

PlantPtr load_plant(const std::string& path)
{
    lipobs_plant* p = nullptr;
    check(lipobs_plant_load(path.c_str(), &p));
    return {p, &lipobs_plant_free};
}

DesignPtr load_design(const std::string& path)
{
    lipobs_design* d = nullptr;
    check(lipobs_design_load(path.c_str(), &d));
    return {d, &lipobs_design_free};
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string full(double v)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<double> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<double> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        while (end && *end == ' ')
            ++end;
        if (item.empty() || end == item.c_str() || *end != '\0' || !std::isfinite(v))
            usage(flag + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty())
        usage(flag + ": empty list");
    return out;
}

std::vector<double> parse_vector(const std::string& text, const std::string& flag, int n)
{
    auto v = parse_list(text, flag);
    if (static_cast<int>(v.size()) != n)
        usage(flag + ": expected " + std::to_string(n) + " values, got " + std::to_string(v.size()));
    return v;
}

// Either a comma list (the diagonal) or a JSON nested array.
std::vector<double> parse_transform(const std::string& text, int n)
{
    std::vector<double> t(static_cast<std::size_t>(n) * n, 0.0);
    if (!text.empty() && text.front() == '[') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::exception& e) {
            usage(std::string("--transform: ") + e.what());
        }
        if (!j.is_array() || static_cast<int>(j.size()) != n)
            usage("--transform: expected " + std::to_string(n) + " rows");
        for (int i = 0; i < n; ++i) {
            if (!j[i].is_array() || static_cast<int>(j[i].size()) != n)
                usage("--transform: row " + std::to_string(i + 1) + " must have " + std::to_string(n) + " numbers");
            for (int k = 0; k < n; ++k) {
                if (!j[i][k].is_number())
                    usage("--transform: entries must be numbers");
                t[static_cast<std::size_t>(i) * n + k] = j[i][k].get<double>();
            }
        }
        return t;
    }
    const auto d = parse_vector(text, "--transform", n);
    for (int i = 0; i < n; ++i)
        t[static_cast<std::size_t>(i) * n + i] = d[i];
    return t;
}

int parse_theorem(const std::string& s)
{
    if (s == "t1")
        return LIPOBS_T1;
    if (s == "t3")
        return LIPOBS_T3;
    if (s == "t4")
        return LIPOBS_T4;
    if (s == "t5")
        return LIPOBS_T5;
    if (s == "feas")
        return LIPOBS_FEAS;
    usage("--theorem must be one of t1, t3, t4, t5, feas");
    return 0;
}

int plant_n(const lipobs_plant* plant)
{
    int n = 0;
    check(lipobs_plant_dims(plant, &n, nullptr, nullptr, nullptr, nullptr));
    return n;
}

std::vector<double> design_matrix(const lipobs_design* d, const char* name, int& rows, int& cols)
{
    check(lipobs_design_matrix(d, name, nullptr, 0, &rows, &cols));
    std::vector<double> m(static_cast<std::size_t>(rows) * cols);
    check(lipobs_design_matrix(d, name, m.data(), m.size(), nullptr, nullptr));
    return m;
}

std::optional<double> scalar(const lipobs_design* d, const char* name)
{
    double v = 0.0;
    if (lipobs_design_scalar(d, name, &v) != LIPOBS_OK)
        return std::nullopt;
    return v;
}

void print_matrix(const char* label, const std::vector<double>& m, int rows, int cols)
{
    std::printf("%s =", label);
    for (int i = 0; i < rows; ++i) {
        std::printf(i == 0 ? " [" : "; ");
        for (int j = 0; j < cols; ++j)
            std::printf("%s%s", j ? " " : "", num(m[static_cast<std::size_t>(i) * cols + j]).c_str());
    }
    std::printf("]\n");
}

void print_design(const lipobs_design* d)
{
    std::printf("theorem = %s\n", lipobs_design_theorem(d));
    for (const char* name : {"gamma_star", "mu_star", "beta", "lambda", "epsilon", "alpha", "xi", "zeta", "objective",
                             "certified_gap", "kappa_p"})
        if (auto v = scalar(d, name))
            std::printf("%s = %s\n", name, num(*v).c_str());
    int rows = 0, cols = 0;
    const auto l = design_matrix(d, "L", rows, cols);
    print_matrix("L", l, rows, cols);
    int has_t_rows = 0;
    if (lipobs_design_matrix(d, "T", nullptr, 0, &has_t_rows, nullptr) == LIPOBS_OK) {
        const auto lo = design_matrix(d, "L_original", rows, cols);
        print_matrix("L_original", lo, rows, cols);
    }
    int pass = 0;
    if (lipobs_design_verified(d, &pass) == LIPOBS_OK)
        std::printf("verification = %s\n", pass ? "pass" : "FAIL");
}

struct SimFlags {
    std::string x0, xhat0;
    std::vector<std::string> w, u;
    double t_end = 10.0;
    double dt = 1e-3;
    int substeps = 0;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f)
{
    cmd->add_option("--x0", f.x0, "initial plant state, comma separated (original coordinates)");
    cmd->add_option("--xhat0", f.xhat0, "initial observer state, comma separated");
    cmd->add_option("--w", f.w, "disturbance component as an expression in t (repeat for each of q)");
    cmd->add_option("--u", f.u, "input component as an expression in t (repeat for each of m)");
    cmd->add_option("--t-end", f.t_end, "final time")->capture_default_str();
    cmd->add_option("--dt", f.dt, "sample interval")->capture_default_str();
    cmd->add_option("--substeps", f.substeps, "RK4 steps per sample (0: automatic)")->capture_default_str();
}

struct SimConfig {
    lipobs_sim_config config{};
    std::vector<double> x0, xhat0;
    std::vector<const char*> w, u;
};

void fill_config(SimConfig& s, const SimFlags& f, int n)
{
    lipobs_sim_config_init(&s.config);
    s.config.t_end = f.t_end;
    s.config.dt = f.dt;
    s.config.substeps = f.substeps;
    if (!f.x0.empty()) {
        s.x0 = parse_vector(f.x0, "--x0", n);
        s.config.x0 = s.x0.data();
    }
    if (!f.xhat0.empty()) {
        s.xhat0 = parse_vector(f.xhat0, "--xhat0", n);
        s.config.xhat0 = s.xhat0.data();
    }
    for (const auto& e : f.w)
        s.w.push_back(e.c_str());
    for (const auto& e : f.u)
        s.u.push_back(e.c_str());
    if (!s.w.empty()) {
        s.config.disturbance = s.w.data();
        s.config.disturbance_count = s.w.size();
    }
    if (!s.u.empty()) {
        s.config.input = s.u.data();
        s.config.input_count = s.u.size();
    }
}

int cmd_synth(const std::string& plant_path, const std::string& theorem, std::optional<double> beta,
              std::optional<double> gamma, std::optional<double> mu, std::optional<double> lambda,
              std::optional<double> margin, std::optional<double> gain_relax, const std::string& out)
{
    lipobs_synth_options o;
    lipobs_synth_options_init(&o);
    o.theorem = parse_theorem(theorem);
    if (lambda && o.theorem != LIPOBS_T5)
        usage("--lambda is only valid with --theorem t5");
    if (o.theorem == LIPOBS_T5 && !lambda)
        usage("--theorem t5 requires --lambda");
    if (mu && o.theorem != LIPOBS_FEAS)
        usage("--mu is only valid with --theorem feas");
    if (gamma && o.theorem != LIPOBS_T4 && o.theorem != LIPOBS_FEAS)
        usage("--gamma is only valid with --theorem t4 or feas");
    if (beta && o.theorem == LIPOBS_T1 && *beta != 0.0)
        usage("--theorem t1 has no decay rate; use t3 with --beta");
    if (o.theorem == LIPOBS_T3 && !beta)
        usage("--theorem t3 requires --beta");
    o.beta = beta.value_or(NAN);
    o.gamma = gamma.value_or(NAN);
    o.mu = mu.value_or(NAN);
    o.lambda = lambda.value_or(NAN);
    o.margin = margin.value_or(NAN);
    o.gain_relax = gain_relax.value_or(NAN);

    auto plant = load_plant(plant_path);
    lipobs_design* raw = nullptr;
    check(lipobs_synthesize(plant.get(), &o, &raw));
    DesignPtr design(raw, &lipobs_design_free);
    print_design(design.get());
    if (!out.empty()) {
        check(lipobs_design_save(design.get(), out.c_str()));
        std::printf("design written to %s\n", out.c_str());
    }
    int pass = 0;
    check(lipobs_design_verified(design.get(), &pass));
    if (!pass) {
        std::fprintf(stderr, "error: the design failed verification\n");
        return LIPOBS_E_NUMERICAL;
    }
    return 0;
}

int cmd_sweep(const std::string& plant_path, const std::string& beta_grid, const std::string& lambda_grid,
              const std::string& out)
{
    const auto betas = parse_list(beta_grid, "--beta-grid");
    const auto lambdas = parse_list(lambda_grid, "--lambda-grid");
    auto plant = load_plant(plant_path);
    std::vector<lipobs_sweep_cell> cells(betas.size() * lambdas.size());
    check(lipobs_sweep(plant.get(), betas.data(), betas.size(), lambdas.data(), lambdas.size(), cells.data()));

    std::ofstream file;
    if (!out.empty()) {
        file.open(out);
        if (!file)
            throw Failure{kExitUsage, "cannot open '" + out + "' for writing"};
    }
    std::ostream& os = out.empty() ? static_cast<std::ostream&>(std::cout) : file;
    os << "beta,lambda,gamma_star,mu_star,gain_norm,status\n";
    std::size_t solved = 0;
    for (const auto& c : cells) {
        const bool ok = c.status == LIPOBS_OK;
        solved += ok;
        const char* status = ok                                  ? "optimal"
                             : c.status == LIPOBS_E_INFEASIBLE  ? "infeasible"
                             : c.status == LIPOBS_E_INVALID     ? "invalid"
                                                                : "numerical";
        os << full(c.beta) << ',' << full(c.lambda) << ',' << (ok ? full(c.gamma_star) : "") << ','
           << (ok && std::isfinite(c.mu_star) ? full(c.mu_star) : "") << ',' << (ok ? full(c.gain_norm) : "") << ','
           << status << '\n';
    }
    if (!out.empty()) {
        file.close();
        if (!file)
            throw Failure{kExitUsage, "write to '" + out + "' failed"};
        std::printf("sweep: %zu of %zu cells solved, written to %s\n", solved, cells.size(), out.c_str());
    }
    return 0;
}

int cmd_simulate(const std::string& plant_path, const std::string& design_path, const SimFlags& flags,
                 const std::string& out, int stride)
{
    auto plant = load_plant(plant_path);
    auto design = load_design(design_path);
    SimConfig s;
    fill_config(s, flags, plant_n(plant.get()));
    lipobs_trace* raw = nullptr;
    check(lipobs_simulate(plant.get(), design.get(), &s.config, &raw));
    TracePtr trace(raw, &lipobs_trace_free);

    std::size_t samples = 0;
    check(lipobs_trace_samples(trace.get(), &samples));
    std::printf("samples = %zu\n", samples);
    lipobs_decay_report d{};
    check(lipobs_trace_decay(trace.get(), &d));
    if (d.disturbance_free)
        std::printf("decay = %s (worst ratio %s at t = %s, kappa_p = %s)\n", d.pass ? "pass" : "FAIL",
                    num(d.worst_ratio).c_str(), num(d.worst_time).c_str(), num(d.kappa_p).c_str());
    else
        std::printf("decay = not checked (disturbance present)\n");
    double gain = 0.0;
    if (lipobs_trace_gain(trace.get(), &gain) == LIPOBS_OK) {
        std::printf("empirical_gain = %s\n", num(gain).c_str());
        if (auto mu = scalar(design.get(), "mu_star"))
            std::printf("gain_within_mu_star = %s (mu_star = %s)\n", gain <= *mu ? "yes" : "no", num(*mu).c_str());
    }
    if (!out.empty()) {
        check(lipobs_trace_write_csv(trace.get(), out.c_str(), stride));
        std::printf("trace written to %s\n", out.c_str());
    }
    return 0;
}

int cmd_estimate(const std::string& plant_path, const std::string& lower, const std::string& upper, int samples,
                 const CLI::Option* transform_opt, const std::string& transform)
{
    auto plant = load_plant(plant_path);
    const int n = plant_n(plant.get());
    int transformed = 0;
    if (transform_opt->count() > 0) {
        if (!transform.empty()) {
            const auto t = parse_transform(transform, n);
            check(lipobs_plant_set_transform(plant.get(), t.data()));
        }
        transformed = 1;
    }
    if (lower.empty() != upper.empty())
        usage("--lower and --upper must be given together");
    std::vector<double> lo, hi;
    if (!lower.empty()) {
        lo = parse_vector(lower, "--lower", n);
        hi = parse_vector(upper, "--upper", n);
    }
    double value = 0.0;
    std::vector<double> argmax(n);
    check(lipobs_estimate(plant.get(), lo.empty() ? nullptr : lo.data(), hi.empty() ? nullptr : hi.data(), samples,
                          transformed, &value, argmax.data()));
    std::printf("gamma_estimate = %s\n", num(value).c_str());
    std::printf("argmax =");
    for (double v : argmax)
        std::printf(" %s", num(v).c_str());
    std::printf("\n");
    return 0;
}

int cmd_verify(const std::string& plant_path, const std::string& design_path)
{
    auto plant = load_plant(plant_path);
    auto design = load_design(design_path);
    int pass = 0;
    check(lipobs_design_verify(design.get(), plant.get(), &pass));
    std::printf("verification = %s\n", pass ? "pass" : "FAIL");
    return pass ? 0 : LIPOBS_E_NUMERICAL;
}

int cmd_perturb(const std::string& plant_path, const std::string& design_path, const std::vector<std::string>& delta,
                const SimFlags& flags, bool shared)
{
    auto plant = load_plant(plant_path);
    auto design = load_design(design_path);
    SimConfig s;
    fill_config(s, flags, plant_n(plant.get()));
    std::vector<const char*> d;
    for (const auto& e : delta)
        d.push_back(e.c_str());
    lipobs_perturbation_report r{};
    check(lipobs_perturbation_test(plant.get(), design.get(), d.data(), d.size(), &s.config, shared ? 1 : 0, &r));
    std::printf("delta_lipschitz = %s\n", num(r.delta_lipschitz).c_str());
    if (std::isfinite(r.margin))
        std::printf("margin = %s (%s certificate)\n", num(r.margin).c_str(),
                    r.within_certificate ? "within" : "outside");
    if (r.blew_up) {
        std::printf("result = blow-up\n");
        return LIPOBS_E_BLOWUP;
    }
    std::printf("final_ratio = %s\n", num(r.final_ratio).c_str());
    std::printf("converged = %s\n", r.converged ? "yes" : "no");
    return 0;
}

void log_to_stderr(int level, const char* message, void*)
{
    std::fprintf(stderr, "[%s] %s\n", level >= 2 ? "debug" : "info", message);
}

int configure_logging()
{
    const char* env = std::getenv("LIPOBS_LOG");
    const std::string v = env ? env : "quiet";
    int level = 0;
    if (v == "quiet" || v.empty())
        level = 0;
    else if (v == "info")
        level = 1;
    else if (v == "debug")
        level = 2;
    else
        usage("LIPOBS_LOG must be quiet, info or debug (got '" + v + "')");
    lipobs_set_logger(level, level > 0 ? &log_to_stderr : nullptr, nullptr);
    return level;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust observer design for Lipschitz nonlinear systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lipobs_version()));

    std::string plant_path, design_path, out, theorem;
    std::optional<double> beta, gamma, mu, lambda, margin, gain_relax;
    auto* synth = app.add_subcommand("synth", "design an observer gain from the LMI conditions");
    synth->add_option("plant", plant_path, "plant file")->required();
    synth->add_option("--theorem", theorem, "t1, t3, t4, t5 or feas")->required();
    synth->add_option("--beta", beta, "decay rate");
    synth->add_option("--gamma", gamma, "Lipschitz constant (t4, feas; default: the plant's gamma)");
    synth->add_option("--mu", mu, "attenuation level to test (feas)");
    synth->add_option("--lambda", lambda, "objective weight in [0, 1] (t5)");
    synth->add_option("--margin", margin, "strictness margin of the LMIs");
    synth->add_option("--gain-relax", gain_relax, "relative index slack for gain reduction (0 disables)");
    synth->add_option("--out", out, "design file to write");

    std::string beta_grid, lambda_grid;
    auto* sweep = app.add_subcommand("sweep", "multi-objective trade-off over beta and lambda grids");
    sweep->add_option("plant", plant_path, "plant file")->required();
    sweep->add_option("--beta-grid", beta_grid, "comma separated decay rates")->required();
    sweep->add_option("--lambda-grid", lambda_grid, "comma separated weights")->required();
    sweep->add_option("--out", out, "CSV file (default: stdout)");

    SimFlags sim_flags;
    int stride = 1;
    auto* simulate = app.add_subcommand("simulate", "simulate plant and observer");
    simulate->add_option("plant", plant_path, "plant file")->required();
    simulate->add_option("design", design_path, "design file")->required();
    add_sim_flags(simulate, sim_flags);
    simulate->add_option("--out", out, "trace CSV file");
    simulate->add_option("--stride", stride, "write every k-th sample")->capture_default_str();

    std::string lower, upper, transform;
    int samples = 0;
    auto* estimate = app.add_subcommand("estimate", "grid estimate of the Lipschitz constant of phi");
    estimate->add_option("plant", plant_path, "plant file")->required();
    estimate->add_option("--lower", lower, "comma separated lower corner (default: the plant's region)");
    estimate->add_option("--upper", upper, "comma separated upper corner");
    estimate->add_option("--samples", samples, "grid points per axis (default 21)");
    auto* transform_opt =
        estimate
            ->add_option("--transform", transform,
                         "estimate in x_bar = T x; T as a diagonal list or JSON matrix (no value: the plant's T)")
            ->expected(0, 1);

    auto* verify = app.add_subcommand("verify", "re-check a design's certificate against a plant");
    verify->add_option("plant", plant_path, "plant file")->required();
    verify->add_option("design", design_path, "design file")->required();

    std::vector<std::string> delta;
    bool shared = false;
    auto* perturb = app.add_subcommand("perturb", "simulate with an added nonlinearity delta(x)");
    perturb->add_option("plant", plant_path, "plant file")->required();
    perturb->add_option("design", design_path, "design file")->required();
    perturb->add_option("--delta", delta, "delta component in design coordinates (repeat for each of n)")->required();
    perturb->add_flag("--shared", shared, "add delta to the observer model as well");
    add_sim_flags(perturb, sim_flags);

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e) {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        configure_logging();
        if (synth->parsed())
            return cmd_synth(plant_path, theorem, beta, gamma, mu, lambda, margin, gain_relax, out);
        if (sweep->parsed())
            return cmd_sweep(plant_path, beta_grid, lambda_grid, out);
        if (simulate->parsed())
            return cmd_simulate(plant_path, design_path, sim_flags, out, stride);
        if (estimate->parsed())
            return cmd_estimate(plant_path, lower, upper, samples, transform_opt, transform);
        if (verify->parsed())
            return cmd_verify(plant_path, design_path);
        if (perturb->parsed())
            return cmd_perturb(plant_path, design_path, delta, sim_flags, shared);
    }
    catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.message.c_str());
        return f.code;
    }
    return kExitUsage;
}
