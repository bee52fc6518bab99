#include "pebo/config.hpp"

#include "pebo/example_sec6.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace pebo {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

double to_double(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("config: field '" + key + "' is not a number: " + s);
    }
}

long to_long(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("config: field '" + key + "' is not an integer: " + s);
    }
}

bool to_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config: field '" + key + "' is not a boolean: " + s);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char c : s) {
        if (c == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

Eigen::VectorXd to_vector(const std::string& s, const std::string& key) {
    const auto parts = split(strip_quotes(s), ',');
    Eigen::VectorXd v(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) v(i) = to_double(parts[i], key);
    return v;
}

}  // namespace

PolynomialComponent parse_polynomial(const std::string& text, int n_vars) {
    PolynomialComponent comp;
    for (const std::string& term_text : split(strip_quotes(text), ';')) {
        if (term_text.empty()) continue;
        const size_t lb = term_text.find('[');
        const size_t rb = term_text.find(']');
        if (lb == std::string::npos || rb == std::string::npos || rb < lb)
            throw ConfigError("polynomial term needs 'coeff [e1 e2 ...]': " + term_text);
        PolynomialTerm term;
        term.coeff = to_double(trim(term_text.substr(0, lb)), "polynomial coeff");
        std::istringstream es(term_text.substr(lb + 1, rb - lb - 1));
        int e;
        while (es >> e) term.exponents.push_back(e);
        if (static_cast<int>(term.exponents.size()) != n_vars)
            throw ConfigError("polynomial term needs " + std::to_string(n_vars) +
                              " exponents: " + term_text);
        comp.push_back(std::move(term));
    }
    if (comp.empty()) throw ConfigError("empty polynomial component: " + text);
    return comp;
}

std::string render_polynomial(const PolynomialComponent& comp) {
    std::ostringstream os;
    for (size_t i = 0; i < comp.size(); ++i) {
        if (i) os << " ; ";
        os << comp[i].coeff << " [";
        for (size_t k = 0; k < comp[i].exponents.size(); ++k) {
            if (k) os << ' ';
            os << comp[i].exponents[k];
        }
        os << ']';
    }
    return os.str();
}

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
    ScenarioConfig cfg;
    // defaults matching the built-in scenario
    cfg.box_lower = Eigen::VectorXd::Constant(2, -2.0);
    cfg.box_upper = Eigen::VectorXd::Constant(2, 2.0);
    cfg.lambdas = Eigen::VectorXd(3);
    cfg.lambdas << -1.0, -2.0, -3.0;
    cfg.x0 = Eigen::VectorXd(2);
    cfg.x0 << 1.0, -0.5;
    cfg.zeta0 = Eigen::VectorXd::Zero(3);
    cfg.gramian_base = Eigen::VectorXd(2);
    cfg.gramian_base << 0.5, 1.0;
    cfg.injectivity_t_grid = {0.0, 0.5, 1.0};

    std::map<int, std::string> f_lines, h_lines;

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string raw = trim(line.substr(eq + 1));
        const std::string val = strip_quotes(raw);
        const std::string qual = section + "." + key;

        if (section == "model") {
            if (key == "name") cfg.model_name = val;
            else if (key == "n") cfg.n = static_cast<int>(to_long(val, qual));
            else if (key == "p") cfg.p = static_cast<int>(to_long(val, qual));
            else if (key == "box_lower") cfg.box_lower = to_vector(val, qual);
            else if (key == "box_upper") cfg.box_upper = to_vector(val, qual);
            else if (key == "horizon") {
                const Eigen::VectorXd h = to_vector(val, qual);
                if (h.size() != 2) throw ConfigError("config: horizon needs two values");
                cfg.horizon_lo = h(0);
                cfg.horizon_hi = h(1);
            } else if (key.size() > 1 && key[0] == 'f') {
                f_lines[static_cast<int>(to_long(key.substr(1), qual))] = val;
            } else if (key.size() > 1 && key[0] == 'h') {
                h_lines[static_cast<int>(to_long(key.substr(1), qual))] = val;
            } else {
                throw ConfigError("config: unknown field " + qual);
            }
        } else if (section == "design") {
            if (key == "lambdas") cfg.lambdas = to_vector(val, qual);
            else if (key == "rho") cfg.rho = to_double(val, qual);
            else if (key == "H") cfg.H_selector = val;
            else if (key == "jitter") cfg.jitter = to_bool(val, qual);
            else if (key == "jitter_amount") cfg.jitter_amount = to_double(val, qual);
            else throw ConfigError("config: unknown field " + qual);
        } else if (section == "integrator") {
            if (key == "step") cfg.step = to_double(val, qual);
            else throw ConfigError("config: unknown field " + qual);
        } else if (section == "estimation") {
            if (key == "mode") cfg.mode = val;
            else if (key == "t0") cfg.t0 = to_double(val, qual);
            else if (key == "tf") cfg.tf = to_double(val, qual);
            else if (key == "update_period") cfg.update_period = to_double(val, qual);
            else if (key == "x0") cfg.x0 = to_vector(val, qual);
            else if (key == "zeta0") cfg.zeta0 = to_vector(val, qual);
            else if (key == "theta0") cfg.theta0 = to_vector(val, qual);
            else if (key == "max_evals") cfg.max_evals = to_long(val, qual);
            else if (key == "landscape_t") cfg.landscape_t = to_double(val, qual);
            else if (key == "landscape_t2") cfg.landscape_t2 = to_double(val, qual);
            else if (key == "landscape_grid")
                cfg.landscape_grid = static_cast<int>(to_long(val, qual));
            else throw ConfigError("config: unknown field " + qual);
        } else if (section == "left_inverse") {
            if (key == "starts") cfg.li_starts = static_cast<int>(to_long(val, qual));
            else if (key == "tol_cost") cfg.li_tol_cost = to_double(val, qual);
            else if (key == "cluster_radius") cfg.li_cluster_radius = to_double(val, qual);
            else throw ConfigError("config: unknown field " + qual);
        } else if (section == "analysis") {
            if (key == "t_star") cfg.t_star = to_double(val, qual);
            else if (key == "obs_sweep_points")
                cfg.obs_sweep_points = static_cast<int>(to_long(val, qual));
            else if (key == "gramian_nodes")
                cfg.gramian_nodes = static_cast<int>(to_long(val, qual));
            else if (key == "gramian_base") cfg.gramian_base = to_vector(val, qual);
            else if (key == "injectivity_t_grid") {
                const Eigen::VectorXd g = to_vector(val, qual);
                cfg.injectivity_t_grid.assign(g.data(), g.data() + g.size());
            } else if (key == "injectivity_grid_per_axis")
                cfg.injectivity_grid_per_axis = static_cast<int>(to_long(val, qual));
            else throw ConfigError("config: unknown field " + qual);
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = val;
            else if (key == "seed") cfg.seed = static_cast<unsigned long long>(to_long(val, qual));
            else if (key == "noise_std") cfg.noise_std = to_double(val, qual);
            else throw ConfigError("config: unknown field " + qual);
        } else {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown section [" +
                              section + "]");
        }
    }

    if (cfg.model_name == "polynomial") {
        cfg.f_poly.clear();
        cfg.h_poly.clear();
        for (int i = 1; i <= cfg.n; ++i) {
            if (!f_lines.count(i))
                throw ConfigError("config: polynomial model missing f" + std::to_string(i));
            cfg.f_poly.push_back(parse_polynomial(f_lines[i], cfg.n));
        }
        for (int i = 1; i <= cfg.p; ++i) {
            if (!h_lines.count(i))
                throw ConfigError("config: polynomial model missing h" + std::to_string(i));
            cfg.h_poly.push_back(parse_polynomial(h_lines[i], cfg.n));
        }
    }

    if (cfg.lambdas.size() != cfg.n + 1)
        throw ConfigError("config: lambdas must have n+1 entries (got " +
                          std::to_string(cfg.lambdas.size()) + ", need " +
                          std::to_string(cfg.n + 1) + ")");
    if (cfg.mode != "batch" && cfg.mode != "expanding" && cfg.mode != "landscape")
        throw ConfigError("config: estimation.mode must be batch | expanding | landscape");
    if (cfg.H_selector != "identity" && cfg.H_selector != "exp_decay")
        throw ConfigError("config: design.H must be identity | exp_decay");
    return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

namespace {

std::string vec_str(const Eigen::VectorXd& v) {
    std::ostringstream os;
    for (int i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v(i);
    }
    return os.str();
}

}  // namespace

std::string render_config(const ScenarioConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "[model]\n";
    os << "name = \"" << cfg.model_name << "\"\n";
    os << "n = " << cfg.n << "\n";
    os << "p = " << cfg.p << "\n";
    os << "box_lower = \"" << vec_str(cfg.box_lower) << "\"\n";
    os << "box_upper = \"" << vec_str(cfg.box_upper) << "\"\n";
    os << "horizon = \"" << cfg.horizon_lo << ", " << cfg.horizon_hi << "\"\n";
    for (size_t i = 0; i < cfg.f_poly.size(); ++i)
        os << "f" << i + 1 << " = \"" << render_polynomial(cfg.f_poly[i]) << "\"\n";
    for (size_t i = 0; i < cfg.h_poly.size(); ++i)
        os << "h" << i + 1 << " = \"" << render_polynomial(cfg.h_poly[i]) << "\"\n";
    os << "\n[design]\n";
    os << "lambdas = \"" << vec_str(cfg.lambdas) << "\"\n";
    os << "rho = " << cfg.rho << "\n";
    os << "H = \"" << cfg.H_selector << "\"\n";
    os << "jitter = " << (cfg.jitter ? "true" : "false") << "\n";
    os << "jitter_amount = " << cfg.jitter_amount << "\n";
    os << "\n[integrator]\n";
    os << "step = " << cfg.step << "\n";
    os << "\n[estimation]\n";
    os << "mode = \"" << cfg.mode << "\"\n";
    os << "t0 = " << cfg.t0 << "\n";
    os << "tf = " << cfg.tf << "\n";
    os << "update_period = " << cfg.update_period << "\n";
    os << "x0 = \"" << vec_str(cfg.x0) << "\"\n";
    os << "zeta0 = \"" << vec_str(cfg.zeta0) << "\"\n";
    if (cfg.theta0.size()) os << "theta0 = \"" << vec_str(cfg.theta0) << "\"\n";
    os << "max_evals = " << cfg.max_evals << "\n";
    os << "landscape_t = " << cfg.landscape_t << "\n";
    os << "landscape_t2 = " << cfg.landscape_t2 << "\n";
    os << "landscape_grid = " << cfg.landscape_grid << "\n";
    os << "\n[left_inverse]\n";
    os << "starts = " << cfg.li_starts << "\n";
    os << "tol_cost = " << cfg.li_tol_cost << "\n";
    os << "cluster_radius = " << cfg.li_cluster_radius << "\n";
    os << "\n[analysis]\n";
    os << "t_star = " << cfg.t_star << "\n";
    os << "obs_sweep_points = " << cfg.obs_sweep_points << "\n";
    os << "gramian_nodes = " << cfg.gramian_nodes << "\n";
    os << "gramian_base = \"" << vec_str(cfg.gramian_base) << "\"\n";
    os << "injectivity_t_grid = \"";
    for (size_t i = 0; i < cfg.injectivity_t_grid.size(); ++i) {
        if (i) os << ", ";
        os << cfg.injectivity_t_grid[i];
    }
    os << "\"\n";
    os << "injectivity_grid_per_axis = " << cfg.injectivity_grid_per_axis << "\n";
    os << "\n[output]\n";
    os << "dir = \"" << cfg.out_dir << "\"\n";
    os << "seed = " << cfg.seed << "\n";
    os << "noise_std = " << cfg.noise_std << "\n";
    return os.str();
}

SystemModel build_model(const ScenarioConfig& cfg) {
    if (cfg.model_name == "example_sec6") return sec6::model();
    if (cfg.model_name == "polynomial")
        return make_polynomial_model(cfg.n, cfg.p, cfg.f_poly, cfg.h_poly);
    throw ConfigError("config: unknown model name '" + cfg.model_name + "'");
}

DomainBox build_box(const ScenarioConfig& cfg) {
    return DomainBox(cfg.box_lower, cfg.box_upper);
}

}  // namespace pebo
