#include "fracdiff/config.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/expr.hpp"
#include "fracdiff/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace fracdiff {

namespace {

const std::map<RunType, std::string>& run_names() {
    static const std::map<RunType, std::string> m{
        {RunType::ForwardHomogeneous, "forward-homogeneous"},
        {RunType::ForwardInhomogeneous, "forward-inhomogeneous"},
        {RunType::DuhamelCheck, "duhamel-check"},
        {RunType::Inverse, "inverse"},
        {RunType::Harnack, "harnack"},
        {RunType::Principles, "principles"},
        {RunType::ValidateKernel, "validate-kernel"},
        {RunType::Eig, "eig"},
        {RunType::Inequalities, "inequalities"},
    };
    return m;
}

using KeySet = std::set<std::string>;

KeySet run_keys(RunType t) {
    switch (t) {
        case RunType::ForwardHomogeneous:
        case RunType::ForwardInhomogeneous:
        case RunType::Principles: return {"type", "solver", "modes"};
        case RunType::DuhamelCheck: return {"type", "modes"};
        case RunType::Inverse:
            return {"type", "modes", "x0", "noise", "regularization", "gamma", "sweep_lo", "sweep_hi", "sweep_count"};
        case RunType::Harnack: return {"type", "solver", "modes", "t0", "x0", "r", "delta", "tau", "eta"};
        case RunType::ValidateKernel: return {"type", "probes", "directions"};
        case RunType::Eig: return {"type", "modes"};
        case RunType::Inequalities: return {"type", "samples"};
    }
    return {"type"};
}

bool needs_space(RunType t) { return t != RunType::Inequalities; }
bool needs_time(RunType t) {
    return t != RunType::Inequalities && t != RunType::ValidateKernel && t != RunType::Eig;
}
bool needs_source(RunType t) { return needs_time(t); }

class Reader {
public:
    explicit Reader(std::vector<Diagnostic>& d) : diags_(d) {}

    void diag(const YAML::Mark& m, const std::string& msg) {
        diags_.push_back({m.is_null() ? 0 : m.line + 1, m.is_null() ? 0 : m.column + 1, msg});
    }
    void diag(const YAML::Node& n, const std::string& msg) { diag(n.Mark(), msg); }

    bool is_map(const YAML::Node& n, const std::string& what) {
        if (n.IsMap()) return true;
        diag(n, "'" + what + "' must be a mapping");
        return false;
    }

    void check_keys(const YAML::Node& map, const KeySet& allowed, const std::string& block) {
        for (auto it = map.begin(); it != map.end(); ++it) {
            const std::string key = it->first.Scalar();
            if (!allowed.count(key)) {
                std::string list;
                for (const auto& k : allowed) list += (list.empty() ? "" : ", ") + k;
                diag(it->first, "unknown key '" + key + "' in " + block + " (allowed: " + list + ")");
            }
        }
    }

    template <class T>
    void get(const YAML::Node& map, const std::string& key, T& out, const char* type_name) {
        const YAML::Node n = map[key];
        if (!n) return;
        try {
            if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            diag(n, "type mismatch: '" + key + "' expects " + type_name);
        }
    }
    void num(const YAML::Node& m, const std::string& k, double& out) { get(m, k, out, "a number"); }
    void integer(const YAML::Node& m, const std::string& k, int& out) { get(m, k, out, "an integer"); }
    void text(const YAML::Node& m, const std::string& k, std::string& out) { get(m, k, out, "a string"); }

    void list(const YAML::Node& map, const std::string& key, std::vector<double>& out) {
        const YAML::Node n = map[key];
        if (!n) return;
        if (!n.IsSequence()) {
            diag(n, "type mismatch: '" + key + "' expects a list of numbers");
            return;
        }
        out.clear();
        for (const auto& e : n) {
            try {
                if (!e.IsScalar()) throw YAML::BadConversion(e.Mark());
                out.push_back(e.as<double>());
            } catch (const YAML::Exception&) {
                diag(e, "type mismatch: '" + key + "' expects a list of numbers");
                return;
            }
        }
    }

    // Parses an expression to validate it; positions map into the YAML scalar.
    void expression(const YAML::Node& map, const std::string& key, const std::string& value,
                    const std::vector<std::string>& vars) {
        if (value.empty()) return;
        try {
            Expression::parse(value, vars);
        } catch (const ExprError& e) {
            const YAML::Node n = map[key];
            YAML::Mark m = n.Mark();
            if (!m.is_null()) m.column += e.column() - 1 + (n.Tag() == "!" ? 1 : 0);
            const std::string msg = e.what();
            diag(m, "in '" + key + "': " + msg.substr(msg.find(": ") + 2));
        }
    }

    bool reported(const YAML::Node& n) const {
        const YAML::Mark m = n.Mark();
        if (m.is_null()) return false;
        for (const auto& d : diags_)
            if (d.line == m.line + 1 && d.column == m.column + 1) return true;
        return false;
    }

private:
    std::vector<Diagnostic>& diags_;
};

// A node that already failed its type check gets no range diagnostic.
void range(Reader& rd, const YAML::Node& node, bool ok, const std::string& msg) {
    if (!ok && !rd.reported(node)) rd.diag(node, msg);
}

}  // namespace

std::string to_string(RunType t) { return run_names().at(t); }

std::optional<RunType> run_type_from_string(const std::string& s) {
    for (const auto& [k, v] : run_names())
        if (v == s) return k;
    return std::nullopt;
}

std::string Diagnostic::str() const {
    std::ostringstream os;
    if (line > 0) os << "line " << line << ", column " << column << ": ";
    os << message;
    return os.str();
}

ParseResult parse_config(const std::string& text) {
    ParseResult res;
    Reader rd(res.diagnostics);
    YAML::Node doc;
    try {
        doc = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        rd.diag(e.mark, "syntax error: " + e.msg);
        return res;
    }
    if (!doc.IsMap()) {
        rd.diag(doc.Mark(), "config must be a mapping with blocks kernel, grid, time, run, source");
        return res;
    }
    const YAML::Mark top{};
    rd.check_keys(doc, {"id", "seed", "kernel", "grid", "time", "run", "source"}, "config");

    ScenarioConfig c;
    rd.text(doc, "id", c.id);
    rd.get(doc, "seed", c.seed, "a nonnegative integer");

    const YAML::Node run = doc["run"];
    if (!run) {
        rd.diag(YAML::Mark{}, "missing block 'run'");
        return res;
    }
    if (!rd.is_map(run, "run")) return res;
    std::string type;
    rd.text(run, "type", type);
    const auto rt = run_type_from_string(type);
    if (!run["type"]) {
        rd.diag(run, "missing key 'type' in run");
        return res;
    }
    if (!rt) {
        std::string list;
        for (const auto& [k, v] : run_names()) list += (list.empty() ? "" : ", ") + v;
        rd.diag(run["type"], "unknown run type '" + type + "' (expected one of: " + list + ")");
        return res;
    }
    c.run.type = *rt;
    rd.check_keys(run, run_keys(*rt), "run");
    RunBlock& r = c.run;
    rd.text(run, "solver", r.solver);
    rd.integer(run, "modes", r.modes);
    rd.list(run, "x0", r.x0);
    rd.num(run, "noise", r.noise);
    rd.text(run, "regularization", r.regularization);
    rd.num(run, "gamma", r.gamma);
    rd.num(run, "sweep_lo", r.sweep_lo);
    rd.num(run, "sweep_hi", r.sweep_hi);
    rd.integer(run, "sweep_count", r.sweep_count);
    rd.num(run, "t0", r.t0);
    rd.num(run, "r", r.r);
    rd.num(run, "delta", r.delta);
    rd.num(run, "tau", r.tau);
    rd.num(run, "eta", r.eta);
    rd.integer(run, "directions", r.directions);
    rd.integer(run, "samples", r.samples);
    if (const YAML::Node p = run["probes"]) {
        if (!p.IsSequence()) rd.diag(p, "type mismatch: 'probes' expects a list of [x, rho] or [x, y, rho]");
        else
            for (const auto& e : p) {
                std::vector<double> v;
                YAML::Node wrap;
                wrap["p"] = YAML::Node(e);
                rd.list(wrap, "p", v);
                r.probes.push_back(v);
            }
    }
    range(rd, run["solver"], r.solver == "spectral" || r.solver == "l1" || r.solver == "both",
          "solver must be one of: spectral, l1, both");
    range(rd, run["modes"], r.modes >= 0, "modes must be nonnegative (0 selects the default)");
    range(rd, run["noise"], r.noise >= 0.0, "noise must be nonnegative");
    range(rd, run["regularization"],
          r.regularization == "none" || r.regularization == "second-difference" || r.regularization == "sweep",
          "regularization must be one of: none, second-difference, sweep");
    range(rd, run["gamma"], r.gamma >= 0.0, "gamma must be nonnegative");
    range(rd, run["sweep_count"], r.sweep_count >= 2, "sweep_count must be at least 2");
    range(rd, run["sweep_hi"], r.sweep_hi >= r.sweep_lo, "sweep_hi must not be below sweep_lo");
    range(rd, run["t0"], r.t0 >= 0.0, "t0 must be nonnegative");
    range(rd, run["r"], r.r > 0.0, "r must be positive");
    range(rd, run["delta"], r.delta > 0.0 && r.delta < 1.0, "delta must lie in (0,1)");
    range(rd, run["tau"], r.tau > 0.0, "tau must be positive");
    range(rd, run["eta"], r.eta > 1.0, "eta must exceed 1");
    range(rd, run["directions"], r.directions >= 1, "directions must be positive");
    range(rd, run["samples"], r.samples >= 1, "samples must be at least 1");

    auto block = [&](const char* name, bool required) -> std::optional<YAML::Node> {
        const YAML::Node n = doc[name];
        if (!n) {
            if (required) rd.diag(top, std::string("missing block '") + name + "' required by run type " + type);
            return std::nullopt;
        }
        if (!rd.is_map(n, name)) return std::nullopt;
        return n;
    };

    if (const auto k_opt = block("kernel", needs_space(*rt))) {
        const YAML::Node& k = *k_opt;
        rd.check_keys(k, {"type", "beta", "angular", "Lambda"}, "kernel");
        rd.text(k, "type", c.kernel.type);
        rd.num(k, "beta", c.kernel.beta);
        rd.text(k, "angular", c.kernel.angular);
        rd.num(k, "Lambda", c.kernel.Lambda);
        range(rd, k["type"], c.kernel.type == "fractional-laplacian" || c.kernel.type == "anisotropic",
              "kernel type must be one of: fractional-laplacian, anisotropic");
        range(rd, k["beta"], c.kernel.beta > 0.0 && c.kernel.beta < 1.0, "beta must lie in (0,1)");
        if (c.kernel.type == "anisotropic") {
            if (c.kernel.angular.empty()) rd.diag(k, "anisotropic kernel needs 'angular' (an expression in theta)");
            if (!(c.kernel.Lambda > 0.0)) rd.diag(k["Lambda"] ? k["Lambda"] : k, "Lambda must be positive");
            rd.expression(k, "angular", c.kernel.angular, {"theta"});
        } else {
            if (k["angular"]) rd.diag(k["angular"], "'angular' only applies to anisotropic kernels");
            if (k["Lambda"]) rd.diag(k["Lambda"], "'Lambda' only applies to anisotropic kernels");
        }
    }

    if (const auto g_opt = block("grid", needs_space(*rt))) {
        const YAML::Node& g = *g_opt;
        rd.check_keys(g, {"n", "domain", "nodes", "spacing"}, "grid");
        rd.integer(g, "n", c.grid.n);
        rd.list(g, "domain", c.grid.domain);
        rd.integer(g, "nodes", c.grid.nodes);
        rd.num(g, "spacing", c.grid.spacing);
        range(rd, g["n"], c.grid.n == 1 || c.grid.n == 2, "n must be 1 or 2");
        const auto& d = c.grid.domain;
        if (c.grid.n == 1)
            range(rd, g["domain"] ? g["domain"] : g, d.size() == 2 && d[0] < d[1], "domain must be [a, b] with a < b");
        else
            range(rd, g["domain"] ? g["domain"] : g, d.size() == 3 && d[2] > 0.0,
                  "domain must be [cx, cy, radius] with radius > 0 for n = 2");
        if (g["nodes"] && g["spacing"]) rd.diag(g["spacing"], "give either nodes or spacing, not both");
        if (!g["nodes"] && !g["spacing"]) rd.diag(g, "grid needs nodes or spacing");
        range(rd, g["nodes"], !g["nodes"] || c.grid.nodes >= 3, "nodes must be at least 3");
        range(rd, g["spacing"], !g["spacing"] || c.grid.spacing > 0.0, "spacing must be positive");
    }

    if (const auto t_opt = block("time", needs_time(*rt))) {
        const YAML::Node& t = *t_opt;
        rd.check_keys(t, {"T", "steps", "alpha"}, "time");
        rd.num(t, "T", c.time.T);
        rd.integer(t, "steps", c.time.steps);
        rd.num(t, "alpha", c.time.alpha);
        range(rd, t["T"], c.time.T > 0.0, "T must be positive");
        if (!t["steps"]) rd.diag(t, "missing key 'steps' in time");
        else range(rd, t["steps"], c.time.steps >= 2, "steps must be at least 2");
        range(rd, t["alpha"], c.time.alpha > 0.0 && c.time.alpha < 1.0, "alpha must lie in (0,1)");
    }

    if (const auto s_opt = block("source", needs_source(*rt))) {
        const YAML::Node& s = *s_opt;
        rd.check_keys(s, {"rho", "g", "g_nodes", "u0", "trace"}, "source");
        SourceBlock& src = c.source;
        rd.text(s, "rho", src.rho);
        rd.text(s, "g", src.g);
        rd.list(s, "g_nodes", src.g_nodes);
        rd.text(s, "u0", src.u0);
        rd.text(s, "trace", src.trace);
        const std::vector<std::string> space =
            c.grid.n == 2 ? std::vector<std::string>{"x", "y"} : std::vector<std::string>{"x"};
        rd.expression(s, "rho", src.rho, {"t"});
        rd.expression(s, "g", src.g, space);
        rd.expression(s, "u0", src.u0, space);
        if (s["g"] && s["g_nodes"]) rd.diag(s["g_nodes"], "give either g or g_nodes, not both");
        const bool has_g = !src.g.empty() || !src.g_nodes.empty();
        auto need = [&](bool ok, const std::string& what) {
            if (!ok) rd.diag(s, "source needs " + what + " for run type " + type);
        };
        switch (*rt) {
            case RunType::ForwardHomogeneous:
            case RunType::Harnack: need(!src.u0.empty(), "u0"); break;
            case RunType::ForwardInhomogeneous:
            case RunType::DuhamelCheck: need(!src.rho.empty() && has_g, "rho and g"); break;
            case RunType::Inverse: need(has_g && (!src.rho.empty() || !src.trace.empty()), "g and rho or trace"); break;
            case RunType::Principles: need(!src.u0.empty() || (!src.rho.empty() && has_g), "u0 or rho and g"); break;
            default: break;
        }
    }

    if (*rt == RunType::Inverse && r.x0.size() != static_cast<std::size_t>(c.grid.n))
        rd.diag(run["x0"] ? run["x0"] : run, "inverse runs need x0 with one coordinate per dimension");
    if (*rt == RunType::Harnack && r.x0.size() != static_cast<std::size_t>(c.grid.n))
        rd.diag(run["x0"] ? run["x0"] : run, "harnack runs need x0 with one coordinate per dimension");
    if (*rt == RunType::ValidateKernel) {
        if (r.probes.empty()) rd.diag(run, "validate-kernel needs a nonempty 'probes' list");
        for (const auto& p : r.probes)
            if (p.size() != static_cast<std::size_t>(c.grid.n) + 1 || !(p.back() > 0.0))
                rd.diag(run["probes"], "each probe is [x, rho] (n = 1) or [x, y, rho] (n = 2) with rho > 0");
    }

    std::stable_sort(res.diagnostics.begin(), res.diagnostics.end(),
                     [](const Diagnostic& a, const Diagnostic& b) { return std::tie(a.line, a.column) < std::tie(b.line, b.column); });
    if (res.diagnostics.empty()) res.config = c;
    return res;
}

ScenarioConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        throw ConfigError("cannot read config '" + path + "': " + e.what());
    }
    ParseResult r = parse_config(text);
    if (!r.ok()) {
        std::ostringstream os;
        os << path << ": " << r.diagnostics.size() << " problem(s)";
        for (const auto& d : r.diagnostics) os << "\n  " << path << ":" << d.line << ":" << d.column << ": " << d.message;
        throw ConfigError(os.str());
    }
    return *r.config;
}

namespace {

void emit_num(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << io::format_double(v); }

void emit_list(YAML::Emitter& e, const char* key, const std::vector<double>& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double x : v) e << io::format_double(x);
    e << YAML::EndSeq;
}

void emit_text(YAML::Emitter& e, const char* key, const std::string& v) {
    e << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
}

}  // namespace

std::string serialize_config(const ScenarioConfig& c) {
    YAML::Emitter e;
    const RunType t = c.run.type;
    e << YAML::BeginMap;
    emit_text(e, "id", c.id);
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    if (needs_space(t)) {
        e << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "type" << YAML::Value << c.kernel.type;
        emit_num(e, "beta", c.kernel.beta);
        if (c.kernel.type == "anisotropic") {
            emit_text(e, "angular", c.kernel.angular);
            emit_num(e, "Lambda", c.kernel.Lambda);
        }
        e << YAML::EndMap;
        e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "n" << YAML::Value << c.grid.n;
        emit_list(e, "domain", c.grid.domain);
        if (c.grid.spacing > 0.0) emit_num(e, "spacing", c.grid.spacing);
        else e << YAML::Key << "nodes" << YAML::Value << c.grid.nodes;
        e << YAML::EndMap;
    }
    if (needs_time(t)) {
        e << YAML::Key << "time" << YAML::Value << YAML::BeginMap;
        emit_num(e, "T", c.time.T);
        e << YAML::Key << "steps" << YAML::Value << c.time.steps;
        emit_num(e, "alpha", c.time.alpha);
        e << YAML::EndMap;
    }
    e << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "type" << YAML::Value << to_string(t);
    const KeySet keys = run_keys(t);
    const RunBlock& r = c.run;
    if (keys.count("solver")) e << YAML::Key << "solver" << YAML::Value << r.solver;
    if (keys.count("modes")) e << YAML::Key << "modes" << YAML::Value << r.modes;
    if (keys.count("x0")) emit_list(e, "x0", r.x0);
    if (t == RunType::Inverse) {
        emit_num(e, "noise", r.noise);
        e << YAML::Key << "regularization" << YAML::Value << r.regularization;
        emit_num(e, "gamma", r.gamma);
        emit_num(e, "sweep_lo", r.sweep_lo);
        emit_num(e, "sweep_hi", r.sweep_hi);
        e << YAML::Key << "sweep_count" << YAML::Value << r.sweep_count;
    }
    if (t == RunType::Harnack) {
        emit_num(e, "t0", r.t0);
        emit_num(e, "r", r.r);
        emit_num(e, "delta", r.delta);
        emit_num(e, "tau", r.tau);
        emit_num(e, "eta", r.eta);
    }
    if (t == RunType::ValidateKernel) {
        e << YAML::Key << "probes" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : r.probes) {
            e << YAML::Flow << YAML::BeginSeq;
            for (double x : p) e << io::format_double(x);
            e << YAML::EndSeq;
        }
        e << YAML::EndSeq;
        e << YAML::Key << "directions" << YAML::Value << r.directions;
    }
    if (t == RunType::Inequalities) e << YAML::Key << "samples" << YAML::Value << r.samples;
    e << YAML::EndMap;
    if (needs_source(t)) {
        const SourceBlock& s = c.source;
        e << YAML::Key << "source" << YAML::Value << YAML::BeginMap;
        if (!s.rho.empty()) emit_text(e, "rho", s.rho);
        if (!s.g.empty()) emit_text(e, "g", s.g);
        if (!s.g_nodes.empty()) emit_list(e, "g_nodes", s.g_nodes);
        if (!s.u0.empty()) emit_text(e, "u0", s.u0);
        if (!s.trace.empty()) emit_text(e, "trace", s.trace);
        e << YAML::EndMap;
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

}  // namespace fracdiff
