#include "mfspde/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "mfspde/errors.hpp"
#include "mfspde/presets.hpp"

namespace mfspde {

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Drops a trailing # comment that is not inside a string.
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    return std::all_of(k.begin(), k.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

bool parse_double(const std::string& tok, double& out) {
    std::string t = tok;
    if (!t.empty() && t[0] == '+') t.erase(0, 1);
    t.erase(std::remove(t.begin(), t.end(), '_'), t.end());
    if (t.empty()) return false;
    const auto* end = t.data() + t.size();
    const auto res = std::from_chars(t.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

ConfigError syntax(const std::string& field, const std::string& msg, int line) {
    return ConfigError(field, msg, line);
}

std::string unquote(const std::string& tok, const std::string& field, int line) {
    if (tok.size() < 2 || tok.front() != '"' || tok.back() != '"') {
        throw syntax(field, "unterminated string", line);
    }
    return tok.substr(1, tok.size() - 2);
}

std::vector<std::string> split_array(const std::string& inner, const std::string& field, int line) {
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    for (char c : inner) {
        if (c == '"') in_str = !in_str;
        if (c == ',' && !in_str) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_str) throw syntax(field, "unterminated string in array", line);
    const auto last = trim(cur);
    if (!last.empty()) items.push_back(last);
    for (const auto& it : items) {
        if (it.empty()) throw syntax(field, "empty array element", line);
    }
    return items;
}

ConfigValue parse_value(const std::string& tok, const std::string& field, int line) {
    ConfigValue v;
    v.raw = tok;
    v.line = line;
    if (tok.empty()) throw syntax(field, "missing value", line);
    if (tok.front() == '"') {
        v.value = unquote(tok, field, line);
    } else if (tok == "true" || tok == "false") {
        v.value = tok == "true";
    } else if (tok.front() == '[') {
        if (tok.back() != ']') throw syntax(field, "arrays must be closed on the same line", line);
        const auto items = split_array(tok.substr(1, tok.size() - 2), field, line);
        if (!items.empty() && items[0].front() == '"') {
            std::vector<std::string> out;
            for (const auto& it : items) out.push_back(unquote(it, field, line));
            v.value = std::move(out);
        } else {
            std::vector<double> out;
            for (const auto& it : items) {
                double d = 0.0;
                if (!parse_double(it, d)) throw syntax(field, "not a number: " + it, line);
                out.push_back(d);
            }
            v.value = std::move(out);
        }
    } else {
        double d = 0.0;
        if (!parse_double(tok, d)) throw syntax(field, "cannot parse value '" + tok + "'", line);
        v.value = d;
    }
    return v;
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
    ConfigDocument doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw syntax("", "malformed section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_key(section)) throw syntax(section, "invalid section name", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw syntax("", "expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key)) throw syntax(key, "invalid key", line_no);
        const std::string full = section.empty() ? key : section + "." + key;
        if (doc.entries_.count(full)) throw syntax(full, "duplicate key", line_no);
        doc.entries_[full] = parse_value(trim(line.substr(eq + 1)), full, line_no);
    }
    return doc;
}

const ConfigValue* ConfigDocument::find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

double ConfigDocument::number(const std::string& key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* d = std::get_if<double>(&v->value)) return *d;
    throw ConfigError(key, "expected a number", v->line);
}

std::uint64_t ConfigDocument::integer(const std::string& key, std::uint64_t fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (!std::holds_alternative<double>(v->value)) throw ConfigError(key, "expected an integer", v->line);
    std::string t = v->raw;
    t.erase(std::remove(t.begin(), t.end(), '_'), t.end());
    if (!t.empty() && t[0] == '+') t.erase(0, 1);
    std::uint64_t out = 0;
    const auto* end = t.data() + t.size();
    const auto res = std::from_chars(t.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ConfigError(key, "expected a nonnegative integer, got '" + v->raw + "'", v->line);
    }
    return out;
}

bool ConfigDocument::boolean(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* b = std::get_if<bool>(&v->value)) return *b;
    throw ConfigError(key, "expected true or false", v->line);
}

std::string ConfigDocument::string(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(&v->value)) return *s;
    throw ConfigError(key, "expected a string", v->line);
}

std::vector<double> ConfigDocument::numbers(const std::string& key,
                                            const std::vector<double>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(&v->value)) return *a;
    throw ConfigError(key, "expected an array of numbers", v->line);
}

std::vector<std::string> ConfigDocument::strings(const std::string& key,
                                                 const std::vector<std::string>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* a = std::get_if<std::vector<std::string>>(&v->value)) return *a;
    throw ConfigError(key, "expected an array of strings", v->line);
}

// ---------------------------------------------------------------------------
// RunConfig

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "grid.x_min", "grid.x_max", "grid.n_interior", "grid.kappa",
        "time.T", "time.n_steps",
        "noise.marks", "noise.intensities", "noise.master_seed", "noise.n_scenarios",
        "model.preset", "model.b", "model.sigma", "model.theta_scale", "model.alpha",
        "model.y0", "model.y0_value",
        "model.F.type", "model.F.phi", "model.F.a",
        "model.G.type", "model.G.phi", "model.G.a",
        "control.mode", "control.value", "control.u_min", "control.u_max", "control.delay",
        "solver.reg_degree", "solver.ridge", "solver.log_feature", "solver.damping",
        "solver.tol_fp", "solver.max_outer", "solver.picard_iters", "solver.ascent_steps",
        "solver.ascent_eta", "solver.n_challengers", "solver.challenger_seed", "solver.threads",
        "output.dir"};
    return keys;
}

int line_of(const ConfigDocument& doc, const std::string& key) {
    const auto it = doc.entries().find(key);
    return it == doc.entries().end() ? 0 : it->second.line;
}

std::size_t count_field(const ConfigDocument& doc, const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(doc.integer(key, fallback));
}

MeanFieldChoice read_meanfield(const ConfigDocument& doc, const std::string& prefix) {
    MeanFieldChoice m;
    m.type = doc.string(prefix + ".type", m.type);
    m.phi = doc.string(prefix + ".phi", m.phi);
    m.a = doc.number(prefix + ".a", m.a);
    return m;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    // keep floats recognizable as numbers with a decimal point or exponent
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s += ", ";
        s += fmt(v[k]);
    }
    return s + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

void validate_run_config(const RunConfig& c) {
    auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError(field, msg); };
    if (!(c.x_min < c.x_max)) fail("grid.x_min", "x_min must be less than x_max");
    if (c.n_interior == 0) fail("grid.n_interior", "must be >= 1");
    if (!(c.kappa >= 0.0)) fail("grid.kappa", "must be >= 0");
    if (!(c.T > 0.0)) fail("time.T", "must be > 0");
    if (c.n_steps == 0) fail("time.n_steps", "must be >= 1");
    if (c.marks.size() != c.intensities.size()) {
        fail("noise.intensities", "needs one intensity per mark");
    }
    for (double e : c.marks) {
        if (e == 0.0 || !std::isfinite(e)) fail("noise.marks", "marks must be nonzero and finite");
    }
    for (double nu : c.intensities) {
        if (!(nu > 0.0) || !std::isfinite(nu)) fail("noise.intensities", "intensities must be positive");
    }
    if (c.n_scenarios == 0) fail("noise.n_scenarios", "must be >= 1");
    if (c.preset != "harvesting" && c.preset != "linear_test" && c.preset != "heat") {
        fail("model.preset", "unknown preset '" + c.preset + "' (harvesting, linear_test, heat)");
    }
    if (c.y0 != "default" && c.y0 != "sine" && c.y0 != "sine_bump" && c.y0 != "constant") {
        fail("model.y0", "unknown initial profile '" + c.y0 + "'");
    }
    for (const auto& [name, m] : {std::pair{"model.F", c.F}, std::pair{"model.G", c.G}}) {
        if (m.type != "expectation" && m.type != "smoothed_moment" && m.type != "scaled") {
            fail(std::string(name) + ".type", "unknown operator '" + m.type + "'");
        }
        if (m.type == "smoothed_moment" && m.phi != "square" && m.phi != "exp_scale") {
            fail(std::string(name) + ".phi", "unknown phi '" + m.phi + "' (square, exp_scale)");
        }
    }
    if (c.control_mode != "constant") fail("control.mode", "unsupported mode '" + c.control_mode + "'");
    if (!(c.u_min <= c.u_max)) fail("control.u_min", "u_min must be <= u_max");
    if (c.control_value < c.u_min || c.control_value > c.u_max) {
        fail("control.value", "outside [u_min, u_max]");
    }
    if (!(c.delay >= 0.0)) fail("control.delay", "must be >= 0");
    if (c.preset == "harvesting") {
        if (!(c.u_min > 0.0)) fail("control.u_min", "harvesting needs u_min > 0");
        if (!(c.alpha >= 0.0)) fail("model.alpha", "must be >= 0");
        for (double e : c.marks) {
            if (!(c.theta_scale * e > -1.0)) fail("model.theta_scale", "theta(e) must exceed -1");
        }
        if ((c.y0 == "constant" && !(c.y0_value > 0.0)) || c.y0 == "sine") {
            fail("model.y0", "harvesting needs a strictly positive initial density");
        }
    }
    if (!(c.ridge >= 0.0)) fail("solver.ridge", "must be >= 0");
    if (!(c.damping > 0.0 && c.damping <= 1.0)) fail("solver.damping", "must be in (0, 1]");
    if (!(c.tol_fp >= 0.0)) fail("solver.tol_fp", "must be >= 0");
    if (c.max_outer == 0) fail("solver.max_outer", "must be >= 1");
    if (c.picard_iters < 2) fail("solver.picard_iters", "must be >= 2");
    if (!(c.ascent_eta >= 0.0)) fail("solver.ascent_eta", "must be >= 0");
    if (c.threads == 0) fail("solver.threads", "must be >= 1");
    if (c.output_dir.empty()) fail("output.dir", "must not be empty");
}

RunConfig parse_run_config(const std::string& text) {
    const auto doc = ConfigDocument::parse(text);
    for (const auto& [key, v] : doc.entries()) {
        if (!known_keys().count(key)) throw ConfigError(key, "unknown key", v.line);
    }
    RunConfig c;
    c.x_min = doc.number("grid.x_min", c.x_min);
    c.x_max = doc.number("grid.x_max", c.x_max);
    c.n_interior = count_field(doc, "grid.n_interior", c.n_interior);
    c.kappa = doc.number("grid.kappa", c.kappa);
    c.T = doc.number("time.T", c.T);
    c.n_steps = count_field(doc, "time.n_steps", c.n_steps);
    c.marks = doc.numbers("noise.marks", c.marks);
    c.intensities = doc.numbers("noise.intensities", c.intensities);
    c.master_seed = doc.integer("noise.master_seed", c.master_seed);
    c.n_scenarios = count_field(doc, "noise.n_scenarios", c.n_scenarios);
    c.preset = doc.string("model.preset", c.preset);
    c.b = doc.number("model.b", c.b);
    c.sigma = doc.number("model.sigma", c.sigma);
    c.theta_scale = doc.number("model.theta_scale", c.theta_scale);
    c.alpha = doc.number("model.alpha", c.alpha);
    c.y0 = doc.string("model.y0", c.y0);
    c.y0_value = doc.number("model.y0_value", c.y0_value);
    c.F = read_meanfield(doc, "model.F");
    c.G = read_meanfield(doc, "model.G");
    c.control_mode = doc.string("control.mode", c.control_mode);
    c.control_value = doc.number("control.value", c.control_value);
    c.u_min = doc.number("control.u_min", c.u_min);
    c.u_max = doc.number("control.u_max", c.u_max);
    c.delay = doc.number("control.delay", c.delay);
    c.reg_degree = count_field(doc, "solver.reg_degree", c.reg_degree);
    c.ridge = doc.number("solver.ridge", c.ridge);
    c.log_feature = doc.boolean("solver.log_feature", c.log_feature);
    c.damping = doc.number("solver.damping", c.damping);
    c.tol_fp = doc.number("solver.tol_fp", c.tol_fp);
    c.max_outer = count_field(doc, "solver.max_outer", c.max_outer);
    c.picard_iters = count_field(doc, "solver.picard_iters", c.picard_iters);
    c.ascent_steps = count_field(doc, "solver.ascent_steps", c.ascent_steps);
    c.ascent_eta = doc.number("solver.ascent_eta", c.ascent_eta);
    c.n_challengers = count_field(doc, "solver.n_challengers", c.n_challengers);
    c.challenger_seed = doc.integer("solver.challenger_seed", c.challenger_seed);
    c.threads = count_field(doc, "solver.threads", c.threads);
    c.output_dir = doc.string("output.dir", c.output_dir);
    try {
        validate_run_config(c);
    } catch (const ConfigError& e) {
        throw ConfigError(e.field(), e.what(), line_of(doc, e.field()));
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string to_config_text(const RunConfig& c) {
    std::ostringstream o;
    o << "[grid]\n"
      << "x_min = " << fmt(c.x_min) << "\n"
      << "x_max = " << fmt(c.x_max) << "\n"
      << "n_interior = " << c.n_interior << "\n"
      << "kappa = " << fmt(c.kappa) << "\n\n"
      << "[time]\n"
      << "T = " << fmt(c.T) << "\n"
      << "n_steps = " << c.n_steps << "\n\n"
      << "[noise]\n"
      << "marks = " << fmt_list(c.marks) << "\n"
      << "intensities = " << fmt_list(c.intensities) << "\n"
      << "master_seed = " << c.master_seed << "\n"
      << "n_scenarios = " << c.n_scenarios << "\n\n"
      << "[model]\n"
      << "preset = " << quoted(c.preset) << "\n"
      << "b = " << fmt(c.b) << "\n"
      << "sigma = " << fmt(c.sigma) << "\n"
      << "theta_scale = " << fmt(c.theta_scale) << "\n"
      << "alpha = " << fmt(c.alpha) << "\n"
      << "y0 = " << quoted(c.y0) << "\n"
      << "y0_value = " << fmt(c.y0_value) << "\n\n";
    for (const auto& [name, m] : {std::pair{"F", c.F}, std::pair{"G", c.G}}) {
        o << "[model." << name << "]\n"
          << "type = " << quoted(m.type) << "\n"
          << "phi = " << quoted(m.phi) << "\n"
          << "a = " << fmt(m.a) << "\n\n";
    }
    o << "[control]\n"
      << "mode = " << quoted(c.control_mode) << "\n"
      << "value = " << fmt(c.control_value) << "\n"
      << "u_min = " << fmt(c.u_min) << "\n"
      << "u_max = " << fmt(c.u_max) << "\n"
      << "delay = " << fmt(c.delay) << "\n\n"
      << "[solver]\n"
      << "reg_degree = " << c.reg_degree << "\n"
      << "ridge = " << fmt(c.ridge) << "\n"
      << "log_feature = " << (c.log_feature ? "true" : "false") << "\n"
      << "damping = " << fmt(c.damping) << "\n"
      << "tol_fp = " << fmt(c.tol_fp) << "\n"
      << "max_outer = " << c.max_outer << "\n"
      << "picard_iters = " << c.picard_iters << "\n"
      << "ascent_steps = " << c.ascent_steps << "\n"
      << "ascent_eta = " << fmt(c.ascent_eta) << "\n"
      << "n_challengers = " << c.n_challengers << "\n"
      << "challenger_seed = " << c.challenger_seed << "\n"
      << "threads = " << c.threads << "\n\n"
      << "[output]\n"
      << "dir = " << quoted(c.output_dir) << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Builders

MeanFieldOperator make_meanfield(const MeanFieldChoice& m) {
    if (m.type == "expectation") return MeanFieldOperator::expectation();
    if (m.type == "scaled") return MeanFieldOperator::scaled(m.a);
    if (m.phi == "square") return MeanFieldOperator::square_moment();
    return MeanFieldOperator::exp_moment(m.a);
}

RegressionSpec make_regression(const RunConfig& c) {
    RegressionSpec r;
    r.degree = c.reg_degree;
    r.ridge = c.ridge;
    r.log_feature = c.log_feature;
    return r;
}

namespace {

SpaceFn initial_profile(const RunConfig& c) {
    const double lo = c.x_min, width = c.x_max - c.x_min;
    std::string kind = c.y0;
    if (kind == "default") kind = c.preset == "heat" ? "sine" : "sine_bump";
    if (kind == "constant") {
        const double v = c.y0_value;
        return [v](double) { return v; };
    }
    const double shift = kind == "sine_bump" ? 1.0 : 0.0;
    return [lo, width, shift](double x) {
        return shift + std::sin(std::numbers::pi * (x - lo) / width);
    };
}

}  // namespace

ForwardConfig make_forward_config(const RunConfig& c) {
    validate_run_config(c);
    ForwardConfig f;
    f.grid = build_spatial_grid(c.x_min, c.x_max, c.n_interior);
    f.op = assemble_operator_L(f.grid, c.kappa);
    f.time = build_time_grid(c.T, c.n_steps);
    f.levy = make_levy_measure(c.marks, c.intensities);
    if (c.preset == "harvesting") {
        f.coeffs = harvesting_coefficients(c.b, c.sigma, c.theta_scale, c.alpha);
    } else if (c.preset == "linear_test") {
        f.coeffs = linear_test_coefficients();
    } else {
        f.coeffs = heat_coefficients();
    }
    f.F = make_meanfield(c.F);
    f.G = make_meanfield(c.G);
    const auto y0 = initial_profile(c);
    f.initial.resize(f.grid.n_interior);
    for (std::size_t i = 0; i < f.grid.n_interior; ++i) f.initial[i] = y0(f.grid.nodes[i]);
    f.threads = c.threads;
    return f;
}

ControlField make_control(const RunConfig& c) {
    return ControlField::constant(c.n_steps, c.n_interior, c.control_value, c.u_min, c.u_max);
}

HarvestingProblem make_harvesting_problem(const RunConfig& c) {
    if (c.preset != "harvesting") throw ConfigError("model.preset", "this command needs preset = \"harvesting\"");
    validate_run_config(c);
    auto pr = make_harvesting_problem(build_spatial_grid(c.x_min, c.x_max, c.n_interior),
                                      build_time_grid(c.T, c.n_steps),
                                      make_levy_measure(c.marks, c.intensities), c.b, c.sigma,
                                      c.theta_scale, c.alpha, initial_profile(c));
    pr.kappa = c.kappa;
    pr.u_min = c.u_min;
    pr.u_max = c.u_max;
    return pr;
}

HarvestingOptions make_harvesting_options(const RunConfig& c) {
    HarvestingOptions o;
    o.damping = c.damping;
    o.tol_fp = c.tol_fp;
    o.max_outer = c.max_outer;
    o.reg = make_regression(c);
    o.threads = c.threads;
    return o;
}

}  // namespace mfspde
