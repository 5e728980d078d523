#include "fracdiff/principle_lab.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/special_fn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <random>
#include <sstream>

namespace fracdiff {

namespace {

PrincipleCheck make_check(std::string quantity, double value, std::string relation, double threshold) {
    bool pass = false;
    if (relation == ">=") pass = value >= threshold;
    else if (relation == ">") pass = value > threshold;
    else if (relation == "<=") pass = value <= threshold;
    else if (relation == "==") pass = value == threshold;
    return {std::move(quantity), value, std::move(relation), threshold, pass};
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

using Cx = std::complex<double>;

// Sum of A_r exp(i w_r s); real-valued by construction.
struct ExpTerm {
    double w;
    Cx A;
};
using Expo = std::vector<ExpTerm>;

// c0 + sum_p c_p sin(p s + 0.3 p).
Expo to_expo(const std::vector<double>& c) {
    Expo out;
    if (!c.empty()) out.push_back({0.0, c[0]});
    const Cx two_i(0.0, 2.0);
    for (std::size_t p = 1; p < c.size(); ++p) {
        const Cx ph = std::polar(1.0, 0.3 * p);
        out.push_back({static_cast<double>(p), c[p] * ph / two_i});
        out.push_back({-static_cast<double>(p), -c[p] * std::conj(ph) / two_i});
    }
    return out;
}

Expo multiply(const Expo& f, const Expo& g) {
    Expo out;
    for (const auto& a : f)
        for (const auto& b : g) out.push_back({a.w + b.w, a.A * b.A});
    return out;
}

double evaluate(const Expo& f, double t) {
    Cx acc = 0.0;
    for (const auto& a : f) acc += a.A * std::polar(1.0, a.w * t);
    return acc.real();
}

// (k * f)(t) for k = sum_m c_m exp(-l_m t), closed form.
double exp_convolution(const std::vector<double>& c, const std::vector<double>& l, const Expo& f, double t) {
    Cx acc = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m)
        for (const auto& a : f)
            acc += c[m] * a.A * (std::polar(1.0, a.w * t) - std::exp(-l[m] * t)) / Cx(l[m], a.w);
    return acc.real();
}

// d/dt of exp_convolution, differentiated in closed form.
double d_exp_convolution(const std::vector<double>& c, const std::vector<double>& l, const Expo& f, double t) {
    Cx acc = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m)
        for (const auto& a : f)
            acc += c[m] * a.A * (Cx(0.0, a.w) * std::polar(1.0, a.w * t) + l[m] * std::exp(-l[m] * t)) / Cx(l[m], a.w);
    return acc.real();
}

// int_a^b (t - s)^{alpha-1} (c0 + c1 (s - a)) ds / Gamma(alpha) for [a, b] within [0, t].
double g_alpha_linear(double alpha, double t, double a, double b, double c0, double c1) {
    const double ua = t - a, ub = std::max(t - b, 0.0);
    const double m0 = (std::pow(ua, alpha) - std::pow(ub, alpha)) / alpha;
    const double m1 = ua * m0 - (std::pow(ua, alpha + 1.0) - std::pow(ub, alpha + 1.0)) / (alpha + 1.0);
    return (c0 * m0 + c1 * m1) / gamma_fn(alpha);
}

struct Family {
    std::string name;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst = INFINITY;  // min of (lhs - rhs) / scale
};

}  // namespace

bool PrincipleReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const PrincipleCheck& c) { return c.pass; });
}

io::Json PrincipleReport::to_json() const {
    io::Json j;
    j["scenario"] = scenario;
    j["min_u"] = min_u;
    if (harnack_ratio) j["harnack_ratio"] = *harnack_ratio;
    j["vacuous"] = vacuous;
    j["passed"] = passed();
    io::Json cs = io::Json::array();
    for (const PrincipleCheck& c : checks)
        cs.push_back({{"quantity", c.quantity}, {"value", c.value}, {"relation", c.relation},
                      {"threshold", c.threshold}, {"pass", c.pass}});
    j["checks"] = cs;
    j["counterexamples"] = counterexamples;
    return j;
}

std::string summary_table(const std::vector<PrincipleReport>& reports) {
    std::size_t ws = 8, wq = 8;
    for (const auto& r : reports) {
        ws = std::max(ws, r.scenario.size());
        for (const auto& c : r.checks) wq = std::max(wq, c.quantity.size());
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(ws)) << "scenario" << "  " << std::setw(static_cast<int>(wq))
       << "quantity" << "  " << std::setw(14) << "value" << "  " << std::setw(18) << "threshold"
       << "  result\n";
    for (const auto& r : reports) {
        if (r.checks.empty()) {
            os << std::setw(static_cast<int>(ws)) << r.scenario << "  " << std::setw(static_cast<int>(wq))
               << "-" << "  " << std::setw(14) << "-" << "  " << std::setw(18) << "-" << "  "
               << (r.vacuous ? "vacuous" : "n/a") << "\n";
            continue;
        }
        for (const auto& c : r.checks) {
            std::ostringstream v, t;
            v << std::setprecision(6) << c.value;
            t << c.relation << " " << std::setprecision(6) << c.threshold;
            os << std::setw(static_cast<int>(ws)) << r.scenario << "  " << std::setw(static_cast<int>(wq))
               << c.quantity << "  " << std::setw(14) << v.str() << "  " << std::setw(18) << t.str() << "  "
               << (c.pass ? "PASS" : "FAIL") << "\n";
        }
    }
    return os.str();
}

double default_weak_tolerance(const Eigen::VectorXd& u0, double allowance) {
    return 1e-8 * sup_norm(u0) + allowance;
}

PrincipleReport check_weak_max(const SolutionField& u, double tol, const std::string& scenario) {
    if (!(tol >= 0.0)) throw DomainError("check_weak_max: tol must be nonnegative");
    PrincipleReport rep;
    rep.scenario = scenario;
    rep.min_u = u.values.size() ? u.values.minCoeff() : 0.0;
    rep.checks.push_back(make_check("min u", rep.min_u, ">=", -tol));
    if (!rep.checks.back().pass) {
        Eigen::Index i = 0, j = 0;
        u.values.minCoeff(&i, &j);
        rep.counterexamples.push_back({{"node", i}, {"time_index", j}, {"t", u.mesh[static_cast<std::size_t>(j)]},
                                       {"u", rep.min_u}});
    }
    return rep;
}

PrincipleReport check_strong_max(const SolutionField& u, const std::vector<std::size_t>& probe_indices, double tol,
                                 const std::string& scenario) {
    if (!(tol >= 0.0)) throw DomainError("check_strong_max: tol must be nonnegative");
    PrincipleReport rep;
    rep.scenario = scenario;
    rep.min_u = u.values.size() ? u.values.minCoeff() : 0.0;
    const double u0_sup = sup_norm(u.values.col(0));
    if (u0_sup == 0.0 && u.values.cwiseAbs().maxCoeff() == 0.0) {
        rep.vacuous = true;
        return rep;
    }
    std::vector<std::size_t> probes = probe_indices;
    if (probes.empty())
        for (std::size_t j = 1; j < u.mesh.size(); ++j) probes.push_back(j);
    double worst = INFINITY;
    for (std::size_t j : probes) {
        if (j == 0 || j >= u.mesh.size()) throw DomainError("check_strong_max: probe index must lie in 1..M");
        Eigen::Index node = 0;
        const double inf = u.values.col(static_cast<Eigen::Index>(j)).minCoeff(&node);
        worst = std::min(worst, inf);
        if (!(inf > tol * u0_sup))
            rep.counterexamples.push_back({{"node", node}, {"time_index", j}, {"t", u.mesh[j]}, {"u", inf}});
    }
    rep.checks.push_back(make_check("min_interior u(t >= t1)", worst, ">", tol * u0_sup));
    return rep;
}

double HarnackBoxes::time_scale() const { return tau * std::pow(r, 2.0 * beta / alpha); }

void HarnackBoxes::validate(const Grid& grid, double T) const {
    if (!(t0 >= 0.0)) throw DomainError("harnack: t0 must be nonnegative");
    if (!(r > 0.0)) throw DomainError("harnack: r must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("harnack: delta must lie in (0,1)");
    if (!(tau > 0.0)) throw DomainError("harnack: tau must be positive");
    if (!(eta > 1.0)) throw DomainError("harnack: eta must exceed 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
    if (x0 >= grid.size()) throw GeometryError("harnack: x0 is not a grid node");
    if (plus_end() > T * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "harnack: t0 + 2 tau r^(2 beta/alpha) = " << plus_end() << " exceeds T = " << T;
        throw GeometryError(os.str());
    }
    if (!grid.contains_ball(grid.point(x0), eta * r))
        throw GeometryError("harnack: B(x0, eta r) is not contained in the domain");
}

BoxSamples sample_boxes(const HarnackBoxes& boxes, const Grid& grid, const TimeMesh& mesh) {
    boxes.validate(grid, mesh.t_end());
    BoxSamples s;
    s.nodes = grid.nodes_in_ball(grid.point(boxes.x0), boxes.delta * boxes.r);
    const double eps = 1e-12 * mesh.t_end();
    for (std::size_t j = 0; j < mesh.size(); ++j) {
        const double t = mesh[j];
        if (t > boxes.minus_begin() + eps && t < boxes.minus_end() - eps) s.minus_times.push_back(j);
        if (t > boxes.plus_begin() + eps && t <= boxes.plus_end() + eps) s.plus_times.push_back(j);
    }
    std::ostringstream os;
    if (s.nodes.empty()) os << "harnack: no grid node in B(x0, delta r); refine the grid (h = " << grid.spacing() << ")";
    else if (s.minus_times.empty()) os << "harnack: no time level in Q_minus; refine the mesh (dt = " << mesh.step() << ")";
    else if (s.plus_times.empty()) os << "harnack: no time level in Q_plus; refine the mesh (dt = " << mesh.step() << ")";
    if (!os.str().empty()) throw GeometryError(os.str());
    return s;
}

PrincipleReport harnack_ratio(const SolutionField& u, const HarnackBoxes& boxes, double f_sup,
                              const std::string& scenario) {
    if (!(f_sup >= 0.0)) throw DomainError("harnack: f_sup must be nonnegative");
    const BoxSamples s = sample_boxes(boxes, u.grid, u.mesh);
    double mean = 0.0, inf = INFINITY;
    for (std::size_t i : s.nodes) {
        for (std::size_t j : s.minus_times) mean += u.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        for (std::size_t j : s.plus_times)
            inf = std::min(inf, u.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    mean /= static_cast<double>(s.nodes.size() * s.minus_times.size());
    PrincipleReport rep;
    rep.scenario = scenario;
    rep.min_u = u.values.minCoeff();
    const double denom = inf + f_sup;
    const double R = denom > 0.0 ? mean / denom : INFINITY;
    rep.harnack_ratio = R;
    const double floor = -1e-12 * u.values.cwiseAbs().maxCoeff();
    rep.checks.push_back(make_check("min u on cylinder", rep.min_u, ">=", floor));
    rep.checks.push_back(make_check("inf_{Q+} u + |f|", denom, ">", 0.0));
    rep.checks.push_back(make_check("harnack ratio", R, ">=", 0.0));
    rep.checks.back().pass = rep.checks.back().pass && std::isfinite(R);
    return rep;
}

PrincipleCheck harnack_refinement(const PrincipleReport& coarse, const PrincipleReport& fine) {
    if (!coarse.harnack_ratio || !fine.harnack_ratio) throw DomainError("harnack_refinement: reports carry no ratio");
    const double q = *coarse.harnack_ratio / *fine.harnack_ratio;
    PrincipleCheck c{"R(h) / R(h/2)", q, "in", 2.0, std::isfinite(q) && q >= 0.5 && q <= 2.0};
    return c;
}

InequalitySides superlinear_power_inequality(double q, double a, double b, double tau1, double tau2) {
    const double theta = std::max(4.0, (6.0 * q - 5.0) / 2.0);
    // (a/tau)^{e} with e < 0 and tau = 0 is 0.
    auto ratio_pow = [](double x, double tau, double e) { return tau == 0.0 ? 0.0 : std::pow(x / tau, e); };
    const double lhs = (b - a) * (std::pow(tau1, q + 1.0) * std::pow(a, -q) - std::pow(tau2, q + 1.0) * std::pow(b, -q));
    const double B = ratio_pow(b, tau2, (1.0 - q) / 2.0), A = ratio_pow(a, tau1, (1.0 - q) / 2.0);
    const double rhs = tau1 * tau2 / (q - 1.0) * (B - A) * (B - A) -
                       theta * (tau1 - tau2) * (tau1 - tau2) * (ratio_pow(b, tau2, 1.0 - q) + ratio_pow(a, tau1, 1.0 - q));
    return {lhs, rhs};
}

namespace {

InequalitySides sublinear(double q, double a, double b, double tau1, double tau2, double square_tau_a) {
    const double zeta = 4.0 * q / (1.0 - q);
    const double z1 = zeta / 6.0, z2 = zeta + 9.0 / q;
    const double lhs = (b - a) * (tau1 * tau1 * std::pow(a, -q) - tau2 * tau2 * std::pow(b, -q));
    const double s = tau2 * std::pow(b, (1.0 - q) / 2.0) - square_tau_a * std::pow(a, (1.0 - q) / 2.0);
    const double rhs = z1 * s * s - z2 * (tau2 - tau1) * (tau2 - tau1) * (std::pow(b, 1.0 - q) + std::pow(a, 1.0 - q));
    return {lhs, rhs};
}

}  // namespace

InequalitySides sublinear_power_inequality(double q, double a, double b, double tau1, double tau2) {
    return sublinear(q, a, b, tau1, tau2, tau2);
}

InequalitySides sublinear_power_inequality_mixed(double q, double a, double b, double tau1, double tau2) {
    return sublinear(q, a, b, tau1, tau2, tau1);
}

InequalitySides product_rule_sides(const std::vector<double>& c, const std::vector<double>& l,
                                   const std::vector<double>& v_coef, const std::vector<double>& phi_coef, double t) {
    if (c.size() != l.size()) throw ShapeError("product_rule_sides: c and l differ in length");
    const Expo v = to_expo(v_coef), phi = to_expo(phi_coef), phiv = multiply(phi, v);
    std::vector<double> dc(c.size());
    for (std::size_t m = 0; m < c.size(); ++m) dc[m] = -c[m] * l[m];
    const double lhs = evaluate(phi, t) * d_exp_convolution(c, l, v, t);
    const double rhs = d_exp_convolution(c, l, phiv, t) + evaluate(phi, t) * exp_convolution(dc, l, v, t) -
                       exp_convolution(dc, l, phiv, t);
    return {lhs, rhs};
}

InequalitySides convolution_product_sides(double alpha, const std::vector<double>& v, const std::vector<double>& phi,
                                          std::size_t J) {
    if (v.size() != phi.size() || v.size() < 2) throw ShapeError("convolution_product_sides: length mismatch");
    if (J == 0 || J >= v.size()) throw DomainError("convolution_product_sides: J must lie in 1..M");
    const std::size_t M = v.size() - 1;
    const double h = 1.0 / static_cast<double>(M);
    const double t = J * h;
    double lhs = 0.0, first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        const double a = i * h, b = a + h;
        const double dv = (v[i + 1] - v[i]) / h, dphi = (phi[i + 1] - phi[i]) / h;
        lhs += dv * g_alpha_linear(alpha, t, a, b, phi[i], dphi);
        first += dv * g_alpha_linear(alpha, t, a, b, 1.0, 0.0);
        last += dphi * g_alpha_linear(alpha, t, a, b, v[i], dv);
    }
    return {lhs, phi[J] * first - last};
}

PrincipleReport check_appendix_inequalities(std::size_t sample_count, std::uint64_t seed, double slack) {
    if (sample_count < 1) throw DomainError("check_appendix_inequalities: sample_count must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto open_unit = [&] {
        double x;
        do x = U(rng);
        while (x == 0.0);
        return x;
    };
    PrincipleReport rep;
    rep.scenario = "inequality-sweep";

    auto record = [&](Family& f, const InequalitySides& s, double tol_rel, io::Json inputs) {
        ++f.samples;
        const double scale = std::max(1.0, std::abs(s.lhs) + std::abs(s.rhs));
        const double margin = (s.lhs - s.rhs) / scale;
        f.worst = std::min(f.worst, margin);
        if (!(margin >= -tol_rel)) {
            ++f.violations;
            if (rep.counterexamples.size() < 50) {
                inputs["family"] = f.name;
                inputs["lhs"] = s.lhs;
                inputs["rhs"] = s.rhs;
                rep.counterexamples.push_back(inputs);
            }
        }
    };

    Family sup{"superlinear power (q > 1)"}, sub{"sublinear power (q < 1)"}, mixed{"sublinear power, mixed square"},
        sup_zero{"superlinear power, tau2 = 0"}, sup_equal{"superlinear power, tau1 = tau2"};
    for (std::size_t n = 0; n < sample_count; ++n) {
        const double q = 1.0 + 4.0 * open_unit();
        const double a = 10.0 * open_unit(), b = 10.0 * open_unit();
        double t1 = 10.0 * U(rng), t2 = 10.0 * U(rng);
        const double branch = U(rng);
        Family* fam = &sup;
        if (branch < 0.05) {
            t2 = 0.0;
            fam = &sup_zero;
        } else if (branch < 0.10) {
            t2 = t1;
            fam = &sup_equal;
        }
        record(*fam, superlinear_power_inequality(q, a, b, t1, t2), slack,
               {{"q", q}, {"a", a}, {"b", b}, {"tau1", t1}, {"tau2", t2}});
        const double p = open_unit() * (1.0 - 1e-9);
        const io::Json in{{"q", p}, {"a", a}, {"b", b}, {"tau1", t1}, {"tau2", t2}};
        record(sub, sublinear_power_inequality(p, a, b, t1, t2), slack, in);
        record(mixed, sublinear_power_inequality_mixed(p, a, b, t1, t2), slack, in);
    }

    Family prod{"product rule identity"}, cprod{"g_alpha product inequality"};
    Family prod_rev{"product rule identity (reverse)"};
    for (std::size_t n = 0; n < sample_count; ++n) {
        std::vector<double> c(3), l(3), vc(4), pc(4);
        for (std::size_t m = 0; m < 3; ++m) {
            c[m] = 0.1 + U(rng);
            l[m] = 0.1 + 2.9 * U(rng);
        }
        for (auto& x : vc) x = 2.0 * U(rng) - 1.0;
        for (auto& x : pc) x = 2.0 * U(rng) - 1.0;
        const double t = 0.2 + 0.6 * U(rng);
        const InequalitySides s = product_rule_sides(c, l, vc, pc, t);
        const io::Json in{{"c", c}, {"l", l}, {"v", vc}, {"phi", pc}, {"t", t}};
        record(prod, s, slack, in);
        record(prod_rev, {s.rhs, s.lhs}, slack, in);

        const double alpha = 0.05 + 0.9 * U(rng);
        const std::size_t M = 16;
        std::vector<double> v(M + 1, 0.0), phi(M + 1);
        phi[0] = 2.0 * U(rng) - 1.0;
        for (std::size_t j = 1; j <= M; ++j) {
            v[j] = U(rng);
            phi[j] = phi[j - 1] + U(rng) * (U(rng) < 0.3 ? 0.0 : 1.0);
        }
        const std::size_t J = 1 + static_cast<std::size_t>(U(rng) * M) % M;
        record(cprod, convolution_product_sides(alpha, v, phi, J), slack,
               {{"alpha", alpha}, {"v", v}, {"phi", phi}, {"J", J}});
    }

    for (Family* f : {&sup, &sup_zero, &sup_equal, &sub, &mixed, &prod, &prod_rev, &cprod}) {
        rep.checks.push_back(make_check(f->name + " violations", static_cast<double>(f->violations), "==", 0.0));
        rep.checks.push_back(make_check(f->name + " worst margin", f->samples ? f->worst : 0.0, ">=", -slack));
    }
    return rep;
}

}  // namespace fracdiff
