#include "lipobs/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lipobs/lipschitz.hpp"

namespace lipobs::io {

using json = nlohmann::json;
using linalg::format_double;

namespace {

class ParseError {
public:
    ParseError(std::string origin, int line) : origin_(std::move(origin)), line_(line) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const
    {
        std::string where = origin_;
        if (line_ > 0)
            where += ":" + std::to_string(line_);
        if (!key.empty())
            where += ": field '" + key + "'";
        throw invalid_input(where + ": " + msg);
    }

private:
    std::string origin_;
    int line_;
};

struct Entry {
    json value;
    int line = 0;
};

// Key/value document with the format header checked and every key remembered.
class Document {
public:
    Document(std::istream& in, std::string origin) : origin_(std::move(origin))
    {
        std::string raw;
        int line = 0;
        bool header = false;
        while (std::getline(in, raw)) {
            ++line;
            const auto first = raw.find_first_not_of(" \t\r");
            if (first == std::string::npos || raw[first] == '#')
                continue;
            const auto last = raw.find_last_not_of(" \t\r");
            const std::string text = raw.substr(first, last - first + 1);
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                ParseError(origin_, line).fail("", "expected 'key = value'");
            std::string key = text.substr(0, eq);
            key.erase(key.find_last_not_of(" \t") + 1);
            const std::string value = text.substr(eq + 1);
            if (!header) {
                if (key != "format")
                    ParseError(origin_, line).fail("", "first line must be 'format=1'");
                if (value.find_first_not_of(" \t") == std::string::npos ||
                    value.substr(value.find_first_not_of(" \t")) != std::to_string(kFormatVersion))
                    ParseError(origin_, line).fail("format", "unsupported version '" + value + "'");
                header = true;
                continue;
            }
            if (key.empty())
                ParseError(origin_, line).fail("", "empty key");
            if (entries_.count(key))
                ParseError(origin_, line).fail(key, "duplicate key (first at line " +
                                                        std::to_string(entries_[key].line) + ")");
            json v;
            try {
                v = json::parse(value);
            }
            catch (const json::parse_error& e) {
                ParseError(origin_, line).fail(key, std::string("malformed value: ") + e.what());
            }
            entries_[key] = Entry{std::move(v), line};
        }
        if (!header)
            ParseError(origin_, 0).fail("", "missing 'format=1' header");
    }

    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) > 0; }

    [[nodiscard]] const Entry& get(const std::string& key) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end())
            ParseError(origin_, 0).fail(key, "missing required field");
        used_.insert(key);
        return it->second;
    }

    void require(const std::string& key) const { (void)get(key); }

    [[nodiscard]] std::optional<Entry> find(const std::string& key) const
    {
        if (!has(key))
            return std::nullopt;
        return get(key);
    }

    [[nodiscard]] ParseError at(const Entry& e) const { return {origin_, e.line}; }

    void reject_unknown() const
    {
        for (const auto& [k, e] : entries_)
            if (!used_.count(k))
                ParseError(origin_, e.line).fail(k, "unknown field");
    }

private:
    std::string origin_;
    std::map<std::string, Entry> entries_;
    mutable std::set<std::string> used_;
};

double to_double(const Document& doc, const std::string& key, const Entry& e)
{
    if (!e.value.is_number())
        doc.at(e).fail(key, "expected a number");
    return e.value.get<double>();
}

int to_dim(const Document& doc, const std::string& key, const Entry& e)
{
    if (!e.value.is_number_integer() || e.value.get<long long>() < 0 || e.value.get<long long>() > 1000)
        doc.at(e).fail(key, "expected a non-negative integer");
    return e.value.get<int>();
}

Vector to_vector(const Document& doc, const std::string& key, const json& v, const Entry& e, Eigen::Index size)
{
    if (!v.is_array())
        doc.at(e).fail(key, "expected an array of numbers");
    if (static_cast<Eigen::Index>(v.size()) != size)
        doc.at(e).fail(key, "expected " + std::to_string(size) + " entries, got " + std::to_string(v.size()));
    Vector out(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        const auto& x = v[static_cast<std::size_t>(i)];
        if (!x.is_number())
            doc.at(e).fail(key, "entry " + std::to_string(i + 1) + " is not a number");
        out(i) = x.get<double>();
    }
    return out;
}

Matrix to_matrix(const Document& doc, const std::string& key, const Entry& e, Eigen::Index rows, Eigen::Index cols)
{
    const auto& v = e.value;
    if (!v.is_array())
        doc.at(e).fail(key, "expected a row-major array of rows");
    if (static_cast<Eigen::Index>(v.size()) != rows)
        doc.at(e).fail(key, "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = v[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            doc.at(e).fail(key, "row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& x = row[static_cast<std::size_t>(j)];
            if (!x.is_number())
                doc.at(e).fail(key, "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                        ") is not a number");
            m(i, j) = x.get<double>();
        }
    }
    return m;
}

Matrix matrix_field(const Document& doc, const std::string& key, Eigen::Index rows, Eigen::Index cols,
                    bool required = true)
{
    const auto e = doc.find(key);
    if (!e) {
        if (required && rows * cols > 0)
            doc.require(key);
        return Matrix::Zero(rows, cols);
    }
    return to_matrix(doc, key, *e, rows, cols);
}

int to_count(const Document& doc, const std::string& key, const Entry& e)
{
    if (!e.value.is_number_integer() || e.value.get<long long>() < 0 ||
        e.value.get<long long>() > std::numeric_limits<int>::max())
        doc.at(e).fail(key, "expected a non-negative integer");
    return e.value.get<int>();
}

std::optional<double> number_field(const Document& doc, const std::string& key)
{
    const auto e = doc.find(key);
    if (!e)
        return std::nullopt;
    return to_double(doc, key, *e);
}

std::string quote(const std::string& s) { return json(s).dump(); }

void put(std::ostream& out, const std::string& key, const std::string& value)
{
    out << key << " = " << value << '\n';
}

std::string number(double v)
{
    if (!std::isfinite(v))
        throw invalid_input("cannot serialize a non-finite number");
    if (v == 0.0 && std::signbit(v))
        return "-0.0";
    return format_double(v);
}

std::string vector_text(const Vector& v)
{
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + number(v(i));
    return s + "]";
}

std::string matrix_text(const Matrix& m)
{
    std::string s = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        s += (i ? ", " : "") + vector_text(m.row(i).transpose());
    return s + "]";
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw invalid_input("cannot open '" + path + "' for writing");
    return f;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw invalid_input("cannot open '" + path + "'");
    return f;
}

}  // namespace

std::optional<Theorem> parse_theorem(const std::string& key)
{
    for (auto t : {Theorem::T1, Theorem::T3, Theorem::T4, Theorem::T5, Theorem::Feasibility, Theorem::FixedGain})
        if (key == to_string(t))
            return t;
    return std::nullopt;
}

PlantModel PlantFile::design_model() const
{
    return transform ? lipschitz::transform(model, *transform) : model;
}

PlantFile read_plant(std::istream& in, const std::string& origin)
{
    const Document doc(in, origin);
    const auto kind = doc.find("kind");
    if (kind && kind->value != "plant")
        doc.at(*kind).fail("kind", "expected \"plant\"");
    auto dim = [&](const char* key, bool required) {
        const auto e = doc.find(key);
        if (!e) {
            if (required)
                doc.require(key);
            return 0;
        }
        return to_dim(doc, key, *e);
    };
    const int n = dim("n", true), m = dim("m", false), p = dim("p", true), q = dim("q", false),
              r = dim("r", false);
    if (n == 0)
        ParseError(origin, doc.get("n").line).fail("n", "must be positive");

    PlantFile f;
    auto& pm = f.model;
    pm.A = matrix_field(doc, "A", n, n);
    pm.B = matrix_field(doc, "B", n, q);
    pm.C = matrix_field(doc, "C", p, n);
    pm.D = matrix_field(doc, "D", p, q, false);
    pm.H = matrix_field(doc, "H", r, n);

    if (const auto e = doc.find("phi")) {
        if (!e->value.is_array() || static_cast<int>(e->value.size()) != n)
            doc.at(*e).fail("phi", "expected an array of " + std::to_string(n) + " expression strings");
        std::vector<std::string> texts;
        for (const auto& s : e->value) {
            if (!s.is_string())
                doc.at(*e).fail("phi", "expected expression strings");
            texts.push_back(s.get<std::string>());
        }
        try {
            pm.phi = expr::VectorField::parse(texts, n, m);
        }
        catch (const expr::ExprError& err) {
            doc.at(*e).fail("phi", err.what());
        }
    }
    else {
        pm.phi = expr::VectorField::zero(n, m);
    }

    pm.gamma = number_field(doc, "gamma");
    if (const auto e = doc.find("region")) {
        if (!e->value.is_object() || !e->value.contains("lower") || !e->value.contains("upper") ||
            e->value.size() != 2)
            doc.at(*e).fail("region", "expected {\"lower\": [...], \"upper\": [...]}");
        pm.region = Box{to_vector(doc, "region", e->value["lower"], *e, n),
                        to_vector(doc, "region", e->value["upper"], *e, n)};
    }
    if (const auto e = doc.find("T"))
        f.transform = to_matrix(doc, "T", *e, n, n);
    doc.reject_unknown();

    try {
        pm.validate();
        if (f.transform)
            (void)f.design_model();
    }
    catch (const Error& err) {
        ParseError(origin, 0).fail("", err.what());
    }
    return f;
}

PlantFile load_plant(const std::string& path)
{
    auto in = open_in(path);
    return read_plant(in, path);
}

void write_plant(const PlantFile& plant, std::ostream& out)
{
    const auto& pm = plant.model;
    pm.validate();
    if (pm.phi.is_wrapped())
        throw invalid_input("write_plant: phi must be in original coordinates (use the T field)");
    out << "format=" << kFormatVersion << '\n';
    put(out, "kind", quote("plant"));
    put(out, "n", std::to_string(pm.n()));
    put(out, "m", std::to_string(pm.m()));
    put(out, "p", std::to_string(pm.p()));
    put(out, "q", std::to_string(pm.q()));
    put(out, "r", std::to_string(pm.r()));
    put(out, "A", matrix_text(pm.A));
    put(out, "B", matrix_text(pm.B));
    put(out, "C", matrix_text(pm.C));
    put(out, "D", matrix_text(pm.D));
    put(out, "H", matrix_text(pm.H));
    std::string phi = "[";
    for (std::size_t i = 0; i < pm.phi.components().size(); ++i)
        phi += (i ? ", " : "") + quote(pm.phi.components()[i].source());
    put(out, "phi", phi + "]");
    if (pm.gamma)
        put(out, "gamma", number(*pm.gamma));
    if (pm.region)
        put(out, "region",
            "{\"lower\": " + vector_text(pm.region->lower) + ", \"upper\": " + vector_text(pm.region->upper) + "}");
    if (plant.transform)
        put(out, "T", matrix_text(*plant.transform));
}

void save_plant(const PlantFile& plant, const std::string& path)
{
    auto f = open_out(path);
    write_plant(plant, f);
}

Matrix DesignFile::original_gain() const
{
    return transform ? lipschitz::backmap_gain(design.L, *transform) : design.L;
}

DesignFile read_design(std::istream& in, const std::string& origin)
{
    const Document doc(in, origin);
    const auto kind = doc.get("kind");
    if (kind.value != "design")
        doc.at(kind).fail("kind", "expected \"design\"");
    const int n = to_dim(doc, "n", doc.get("n"));
    const int p = to_dim(doc, "p", doc.get("p"));
    if (n == 0)
        ParseError(origin, doc.get("n").line).fail("n", "must be positive");

    DesignFile f;
    auto& d = f.design;
    const auto th = doc.get("theorem");
    if (!th.value.is_string() || !parse_theorem(th.value.get<std::string>()))
        doc.at(th).fail("theorem", "expected one of t1, t3, t4, t5, feas, fixed_gain");
    d.theorem = *parse_theorem(th.value.get<std::string>());
    const auto st = doc.get("status");
    const std::string status = st.value.is_string() ? st.value.get<std::string>() : "";
    bool known = false;
    for (auto s : {sdp::Status::Optimal, sdp::Status::Infeasible, sdp::Status::MaxIterations,
                   sdp::Status::NumericalFailure})
        if (status == sdp::to_string(s)) {
            d.status = s;
            known = true;
        }
    if (!known)
        doc.at(st).fail("status", "unknown solver status");

    d.L = to_matrix(doc, "L", doc.get("L"), n, p);
    d.P = to_matrix(doc, "P", doc.get("P"), n, n);
    d.F = to_matrix(doc, "F", doc.get("F"), n, p);
    d.beta = to_double(doc, "beta", doc.get("beta"));
    d.gamma_star = to_double(doc, "gamma_star", doc.get("gamma_star"));
    d.epsilon = to_double(doc, "epsilon", doc.get("epsilon"));
    d.mu_star = number_field(doc, "mu_star");
    d.alpha = number_field(doc, "alpha");
    d.xi = number_field(doc, "xi");
    d.zeta = number_field(doc, "zeta");
    d.lambda = number_field(doc, "lambda");
    d.objective = number_field(doc, "objective").value_or(0.0);
    d.certified_gap = number_field(doc, "certified_gap").value_or(0.0);
    if (const auto e = doc.find("iterations"))
        d.iterations = to_count(doc, "iterations", *e);
    if (const auto e = doc.find("T"))
        f.transform = to_matrix(doc, "T", *e, n, n);
    // Derived fields written for readers; recomputed on load rather than trusted.
    (void)doc.find("L_original");
    if (const auto e = doc.find("verification")) {
        const auto& v = e->value;
        if (!v.is_object() || !v.contains("pass") || !v.contains("kappa_p") || !v.contains("checks") ||
            !v["checks"].is_array())
            doc.at(*e).fail("verification", "expected {\"pass\", \"kappa_p\", \"checks\"}");
        VerificationReport rep;
        try {
            rep.pass = v.at("pass").get<bool>();
            rep.kappa_p = v.at("kappa_p").get<double>();
            for (const auto& c : v.at("checks"))
                rep.checks.push_back({c.at("name").get<std::string>(), c.at("margin").get<double>(),
                                      c.at("passed").get<bool>()});
        }
        catch (const json::exception& err) {
            doc.at(*e).fail("verification", err.what());
        }
        f.verification = rep;
    }
    doc.reject_unknown();
    return f;
}

DesignFile load_design(const std::string& path)
{
    auto in = open_in(path);
    return read_design(in, path);
}

void write_design(const DesignFile& f, std::ostream& out)
{
    const auto& d = f.design;
    out << "format=" << kFormatVersion << '\n';
    put(out, "kind", quote("design"));
    put(out, "theorem", quote(to_string(d.theorem)));
    put(out, "status", quote(sdp::to_string(d.status)));
    put(out, "n", std::to_string(d.L.rows()));
    put(out, "p", std::to_string(d.L.cols()));
    put(out, "beta", number(d.beta));
    put(out, "gamma_star", number(d.gamma_star));
    if (d.mu_star)
        put(out, "mu_star", number(*d.mu_star));
    if (d.lambda)
        put(out, "lambda", number(*d.lambda));
    put(out, "epsilon", number(d.epsilon));
    if (d.alpha)
        put(out, "alpha", number(*d.alpha));
    if (d.xi)
        put(out, "xi", number(*d.xi));
    if (d.zeta)
        put(out, "zeta", number(*d.zeta));
    put(out, "objective", number(d.objective));
    put(out, "certified_gap", number(d.certified_gap));
    put(out, "iterations", std::to_string(d.iterations));
    put(out, "L", matrix_text(d.L));
    put(out, "P", matrix_text(d.P));
    put(out, "F", matrix_text(d.F));
    if (f.transform) {
        put(out, "T", matrix_text(*f.transform));
        put(out, "L_original", matrix_text(f.original_gain()));
    }
    if (f.verification) {
        const auto& v = *f.verification;
        std::string s = "{\"pass\": " + std::string(v.pass ? "true" : "false") +
                        ", \"kappa_p\": " + number(v.kappa_p) + ", \"checks\": [";
        for (std::size_t i = 0; i < v.checks.size(); ++i) {
            const auto& c = v.checks[i];
            s += (i ? ", " : "") + std::string("{\"name\": ") + quote(c.name) + ", \"margin\": " + number(c.margin) +
                 ", \"passed\": " + (c.passed ? "true" : "false") + "}";
        }
        put(out, "verification", s + "]}");
    }
}

void save_design(const DesignFile& design, const std::string& path)
{
    auto f = open_out(path);
    write_design(design, f);
}

}  // namespace lipobs::io
