#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "dcc/gp.hpp"
#include "dcc/gp_solver.hpp"
#include "dcc/gp_successive.hpp"

using namespace dcc;
using namespace dcc::gp;

namespace {

GPProblem tiny_problem(Posynomial objective, std::vector<Constraint> constraints, int n_vars) {
    GPProblem p;
    p.n_files = 0;
    for (int v = 0; v < n_vars; ++v)
        p.variables.push_back({VarRole::fraction, v, "v" + std::to_string(v + 1)});
    p.objective = std::move(objective);
    p.constraints = std::move(constraints);
    return p;
}

Monomial mono(double coefficient, std::vector<std::pair<VarId, double>> powers) {
    Monomial m;
    m.coefficient = coefficient;
    m.powers = std::move(powers);
    std::sort(m.powers.begin(), m.powers.end());
    return m;
}

}  // namespace

TEST_CASE("monomials match their log-space form", "[gp]") {
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> coef(0.01, 10.0);
    std::uniform_real_distribution<double> expo(-3.0, 3.0);
    std::uniform_real_distribution<double> point(0.1, 5.0);
    for (int round = 0; round < 1000; ++round) {
        const int n_vars = 1 + static_cast<int>(rng() % 4);
        Monomial m;
        m.coefficient = coef(rng);
        for (int v = 0; v < n_vars; ++v)
            if (rng() % 2 == 0) m.powers.push_back({static_cast<VarId>(v), expo(rng)});
        std::vector<double> values(n_vars), logs(n_vars);
        for (int v = 0; v < n_vars; ++v) {
            values[v] = point(rng);
            logs[v] = std::log(values[v]);
        }
        CHECK(m.eval(values) ==
              Catch::Approx(std::exp(m.log_eval(logs))).epsilon(1e-12));
    }
}

TEST_CASE("log posynomial gradient matches finite differences", "[gp]") {
    std::mt19937 rng(59);
    std::uniform_real_distribution<double> coef(0.1, 4.0);
    std::uniform_real_distribution<double> expo(-2.0, 2.0);
    std::uniform_real_distribution<double> point(-1.0, 1.0);
    for (int round = 0; round < 100; ++round) {
        const int n_vars = 2 + static_cast<int>(rng() % 3);
        Posynomial p;
        const int n_terms = 1 + static_cast<int>(rng() % 5);
        for (int t = 0; t < n_terms; ++t) {
            Monomial m;
            m.coefficient = coef(rng);
            for (int v = 0; v < n_vars; ++v) m.powers.push_back({static_cast<VarId>(v), expo(rng)});
            p.terms.push_back(std::move(m));
        }
        std::vector<double> y(n_vars);
        for (double& v : y) v = point(rng);
        const std::vector<double> grad = log_posynomial_gradient(p, y, n_vars);
        for (int v = 0; v < n_vars; ++v) {
            const double h = 1e-6;
            std::vector<double> hi = y, lo = y;
            hi[v] += h;
            lo[v] -= h;
            const double fd = (log_posynomial(p, hi) - log_posynomial(p, lo)) / (2.0 * h);
            CHECK(grad[v] == Catch::Approx(fd).epsilon(1e-5).margin(1e-8));
        }
    }
}

TEST_CASE("problem construction counts", "[gp]") {
    const FileCatalog one = build_catalog({1.0}, {1.0}).catalog;
    const GPProblem p1 = build_p1(one, UserPopulation{{0.5}}, 0.5);
    CHECK(p1.variables.size() == 3);  // fraction, complement, one message bound
    CHECK(p1.constraints.size() == 4);
    int inverse = 0;
    for (const Constraint& c : p1.constraints)
        inverse += c.kind == ConstraintKind::inverse_sum;
    CHECK(inverse == 1);
    CHECK_FALSE(p1.is_standard());

    // two users, two files: message bounds count from direct enumeration
    const FileCatalog two = build_catalog({0.6, 0.4}, {1.0, 2.0}).catalog;
    const UserPopulation users{{0.5, 0.5}};
    const GPProblem p1b = build_p1(two, users, 1.0);
    int bounds = 0;
    for (const VariableInfo& v : p1b.variables) bounds += v.role == VarRole::message_bound;
    // 2 singleton active sets * 2 demands * 1 group, plus the pair active set:
    // two equal-demand vectors with 2 groups, two distinct ones with 3
    CHECK(bounds == 4 + 2 * 2 + 2 * 3);

    const GPProblem p4 = build_p4(two, users, 1.0);
    int type_bounds = 0;
    for (const VariableInfo& v : p4.variables) type_bounds += v.role == VarRole::type_bound;
    // per singleton set: {0},{1}; for the pair: {0},{1},{0,1}
    CHECK(type_bounds == 2 * 2 + 3);
    // common prefix is 2 fraction bounds + budget + 2 linking constraints;
    // each singleton-file type has one bijection, the two-file type has two
    CHECK(p4.constraints.size() == 5 + 4 + (2 + 2));

    CHECK_THROWS_AS(build_p1(two, UserPopulation{std::vector<double>(9, 0.5)}, 1.0),
                    ProblemTooLarge);
    CHECK_THROWS_AS(build_p1(two, users, 0.0), OutOfRange);
}

namespace {

// Objective of a CGP at a fixed placement, with every bound variable sitting
// exactly on the tightest of its defining constraints and the complement set
// to 1 - fraction. This must reproduce the closed-form average rate.
double cgp_objective_at(const GPProblem& p, const std::vector<double>& fractions) {
    std::vector<double> values(p.variables.size(), 1.0);
    for (int f = 0; f < p.n_files; ++f) {
        values[p.fraction_id(f)] = fractions[f];
        values[p.complement_id(f)] = 1.0 - fractions[f];
    }
    std::vector<double> required(p.variables.size(), 0.0);
    for (const Constraint& c : p.constraints) {
        if (c.kind != ConstraintKind::posynomial) continue;
        int bound = -1;
        for (const Monomial& m : c.lhs.terms)
            for (const auto& [var, exp] : m.powers) {
                const VarRole role = p.variables[var].role;
                if ((role == VarRole::message_bound || role == VarRole::type_bound) &&
                    exp == -1.0)
                    bound = static_cast<int>(var);
            }
        if (bound < 0) continue;
        double total = 0.0;
        for (const Monomial& m : c.lhs.terms) {
            double v = m.coefficient;
            for (const auto& [var, exp] : m.powers)
                if (static_cast<int>(var) != bound) v *= std::pow(values[var], exp);
            total += v;
        }
        required[bound] = std::max(required[bound], total);
    }
    double objective = 0.0;
    for (const Monomial& m : p.objective.terms) {
        double v = m.coefficient;
        for (const auto& [var, exp] : m.powers) {
            const VarRole role = p.variables[var].role;
            const double value = (role == VarRole::message_bound ||
                                  role == VarRole::type_bound)
                                     ? required[var]
                                     : values[var];
            v *= std::pow(value, exp);
        }
        objective += v;
    }
    return objective;
}

}  // namespace

TEST_CASE("cgp objectives reproduce the exact averages", "[gp]") {
    std::mt19937 rng(83);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (int round = 0; round < 8; ++round) {
        const int n = 2 + static_cast<int>(rng() % 2);
        std::vector<double> p(n), f(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            p[i] = 0.1 + unit(rng);
            f[i] = 0.5 + unit(rng);
            total += p[i];
        }
        for (double& v : p) v /= total;
        const FileCatalog cat = build_catalog(p, f).catalog;
        const UserPopulation users{{0.6, unit(rng)}};
        std::vector<double> q(n);
        for (double& v : q) v = unit(rng);

        const GPProblem p1 = build_p1(cat, users, 1.0);
        CHECK(cgp_objective_at(p1, q) ==
              Catch::Approx(average_rate(Scheme::dmccs, q, cat, users).average_rate)
                  .epsilon(1e-12));
        const GPProblem p1_all = build_p1(cat, users, 1.0, true);
        CHECK(cgp_objective_at(p1_all, q) ==
              Catch::Approx(average_rate(Scheme::dccs, q, cat, users).average_rate)
                  .epsilon(1e-12));
        const GPProblem p4 = build_p4(cat, users, 1.0);
        CHECK(cgp_objective_at(p4, q) ==
              Catch::Approx(average_rate(Scheme::lower_bound, q, cat, users).average_rate)
                  .epsilon(1e-12));

        // merging interchangeable bound variables preserves the objective
        CHECK(cgp_objective_at(presolve_merge(p1), q) ==
              Catch::Approx(cgp_objective_at(p1, q)).epsilon(1e-12));
        CHECK(cgp_objective_at(presolve_merge(p4), q) ==
              Catch::Approx(cgp_objective_at(p4, q)).epsilon(1e-12));
    }
}

TEST_CASE("never-active users drop out of the construction", "[gp]") {
    const FileCatalog cat = build_catalog({0.6, 0.4}, {1.0, 1.0}).catalog;
    const UserPopulation mixed{{0.5, 0.0}};
    const UserPopulation solo{{0.5}};
    const GPProblem with_idle = build_p1(cat, mixed, 1.0);
    const GPProblem without = build_p1(cat, solo, 1.0);
    // the idle user contributes no scenarios, hence no extra bound variables
    CHECK(with_idle.variables.size() == without.variables.size());

    SolverConfig cfg;
    const SuccessiveResult a = successive_gp(Target::p0_dmccs, cat, mixed, 1.0, cfg);
    const SuccessiveResult b = successive_gp(Target::p0_dmccs, cat, solo, 1.0, cfg);
    CHECK(a.rate == Catch::Approx(b.rate).margin(1e-9));
}

TEST_CASE("condensation tightens the linking constraint", "[gp]") {
    const FileCatalog one = build_catalog({1.0}, {1.0}).catalog;
    const GPProblem p1 = build_p1(one, UserPopulation{{0.5}}, 0.5);

    const auto find_condensed = [](const GPProblem& p) -> const Constraint* {
        for (const Constraint& c : p.constraints) {
            if (c.lhs.terms.size() != 1 || c.lhs.terms[0].powers.size() != 2) continue;
            const auto& powers = c.lhs.terms[0].powers;
            if (powers[0].first == p.fraction_id(0) && powers[1].first == p.complement_id(0) &&
                powers[0].second < 0.0 && powers[1].second < 0.0)
                return &c;
        }
        return nullptr;
    };

    {
        const GPProblem even = condense(p1, {0.5}, {0.5});
        CHECK(even.is_standard());
        const Constraint* replaced = find_condensed(even);
        REQUIRE(replaced != nullptr);
        // alpha = beta = 1/2 and the denominator equals q + x = 1 at the anchor
        const Monomial& m = replaced->lhs.terms[0];
        CHECK(m.powers[0].second == Catch::Approx(-0.5));
        CHECK(m.powers[1].second == Catch::Approx(-0.5));
        std::vector<double> at_anchor(even.variables.size(), 1.0);
        at_anchor[even.fraction_id(0)] = 0.5;
        at_anchor[even.complement_id(0)] = 0.5;
        CHECK(m.eval(at_anchor) == Catch::Approx(1.0).epsilon(1e-12));
    }

    std::mt19937 rng(61);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    for (const auto& [qa, xa] : std::vector<std::pair<double, double>>{{0.9, 0.1}, {0.3, 0.8}}) {
        const GPProblem condensed = condense(p1, {qa}, {xa});
        const Constraint* replaced = find_condensed(condensed);
        REQUIRE(replaced != nullptr);
        const Monomial* m = &replaced->lhs.terms[0];
        // the monomial bound never exceeds the true sum (so the condensed
        // feasible set sits inside the original one), with equality at the anchor
        for (int round = 0; round < 100; ++round) {
            const double q = unit(rng), x = unit(rng);
            std::vector<double> at(condensed.variables.size(), 1.0);
            at[condensed.fraction_id(0)] = q;
            at[condensed.complement_id(0)] = x;
            const double monomial_bound = 1.0 / m->eval(at);
            CHECK(monomial_bound <= (q + x) * (1.0 + 1e-12));
        }
        std::vector<double> at(condensed.variables.size(), 1.0);
        at[condensed.fraction_id(0)] = qa;
        at[condensed.complement_id(0)] = xa;
        CHECK(1.0 / m->eval(at) == Catch::Approx(qa + xa).epsilon(1e-12));
    }

    CHECK_THROWS_AS(condense(p1, {0.0}, {0.5}), NonPositiveAnchor);
}

TEST_CASE("gp solver on analytic problems", "[gp]") {
    SolverConfig cfg;

    {
        // minimize v subject to 1/v <= 1
        Posynomial objective;
        objective.terms.push_back(mono(1.0, {{0, 1.0}}));
        Constraint c;
        c.lhs.terms.push_back(mono(1.0, {{0, -1.0}}));
        const GPSolution sol = solve_gp(tiny_problem(objective, {c}, 1), cfg);
        CHECK(sol.objective == Catch::Approx(1.0).epsilon(1e-6));
        CHECK(sol.values[0] == Catch::Approx(1.0).epsilon(1e-5));
        CHECK(sol.kkt_residual < cfg.inner_tol);
    }
    {
        // minimize v1 v2 subject to 1/(v1 v2) <= 1: a flat optimum at value 1
        Posynomial objective;
        objective.terms.push_back(mono(1.0, {{0, 1.0}, {1, 1.0}}));
        Constraint c;
        c.lhs.terms.push_back(mono(1.0, {{0, -1.0}, {1, -1.0}}));
        const GPSolution sol = solve_gp(tiny_problem(objective, {c}, 2), cfg);
        CHECK(sol.objective == Catch::Approx(1.0).epsilon(1e-6));
    }
    {
        // minimize v1 + v2 subject to 1/(v1^2 v2) <= 1
        Posynomial objective;
        objective.terms.push_back(mono(1.0, {{0, 1.0}}));
        objective.terms.push_back(mono(1.0, {{1, 1.0}}));
        Constraint c;
        c.lhs.terms.push_back(mono(1.0, {{0, -2.0}, {1, -1.0}}));
        const GPSolution sol = solve_gp(tiny_problem(objective, {c}, 2), cfg);
        const double v1 = std::pow(2.0, 1.0 / 3.0);
        const double v2 = std::pow(2.0, -2.0 / 3.0);
        CHECK(sol.objective == Catch::Approx(v1 + v2).epsilon(1e-6));
        CHECK(sol.values[0] == Catch::Approx(v1).epsilon(1e-4));
        CHECK(sol.values[1] == Catch::Approx(v2).epsilon(1e-4));
    }
    {
        // empty interior: v <= 1/2 and v >= 2
        Posynomial objective;
        objective.terms.push_back(mono(1.0, {{0, 1.0}}));
        Constraint low, high;
        low.lhs.terms.push_back(mono(2.0, {{0, 1.0}}));
        high.lhs.terms.push_back(mono(2.0, {{0, -1.0}}));
        CHECK_THROWS_AS(solve_gp(tiny_problem(objective, {low, high}, 1), cfg), Infeasible);
    }
    {
        // a CGP must be condensed before solving
        const FileCatalog one = build_catalog({1.0}, {1.0}).catalog;
        const GPProblem p1 = build_p1(one, UserPopulation{{0.5}}, 0.5);
        CHECK_THROWS_AS(solve_gp(p1, cfg), NotStandardGP);
    }
}

TEST_CASE("interchange dump", "[gp]") {
    const FileCatalog one = build_catalog({1.0}, {1.0}).catalog;
    const GPProblem p1 = build_p1(one, UserPopulation{{0.5}}, 0.5);
    std::ostringstream os;
    p1.dump(os);
    const std::string text = os.str();
    CHECK(text.find("minimize") != std::string::npos);
    CHECK(text.find("constraint inverse") != std::string::npos);
    CHECK(text.find("q1:") != std::string::npos);
    CHECK(text.find("w1:-1") != std::string::npos);
}

TEST_CASE("successive approximation on boundary cases", "[gp]") {
    const FileCatalog cat = build_catalog({0.6, 0.4}, {1.0, 2.0}).catalog;
    const UserPopulation users{{0.5, 0.5}};
    SolverConfig cfg;

    {
        // full caching is feasible and optimal
        const SuccessiveResult full =
            successive_gp(Target::p0_dmccs, cat, users, cat.total_bits(), cfg);
        CHECK(full.rate <= cfg.outer_tol);
        for (double q : full.q) CHECK(q > 0.99);
    }
    {
        // an empty cache pins the all-zero placement
        const SuccessiveResult none = successive_gp(Target::p0_dmccs, cat, users, 0.0, cfg);
        for (double q : none.q) CHECK(q == 0.0);
        CHECK(none.rate ==
              Catch::Approx(
                  average_rate(Scheme::dmccs, none.q, cat, users).average_rate));
    }
}

TEST_CASE("successive approximation drives the rate down consistently", "[gp]") {
    const FileCatalog cat = build_catalog({0.7, 0.3}, {2.0, 1.0}).catalog;
    const UserPopulation users{{0.6, 0.5}};
    SolverConfig cfg;
    const SuccessiveResult result = successive_gp(Target::p0_dmccs, cat, users, 1.2, cfg);
    REQUIRE(result.converged);

    // the objective trace never increases beyond solver noise
    for (std::size_t i = 0; i + 1 < result.trace.size(); ++i)
        CHECK(result.trace[i + 1] <=
              result.trace[i] + 10.0 * cfg.inner_tol * std::max(1.0, result.trace[i]));

    // the reported rate is the rate module's own evaluation of the placement
    CHECK(result.rate ==
          Catch::Approx(average_rate(Scheme::dmccs, result.q, cat, users).average_rate)
              .epsilon(1e-12));
    // the surrogate objective bounds the exact rate from above
    CHECK(result.final_objective >= result.rate * (1.0 - 1e-6));
    CHECK(validate_placement(result.q, cat, 1.2).ok());

    // a better placement than the uniform feasible start was found
    const double start_fraction = std::min(1.0, 1.2 / cat.total_bits()) * 0.99;
    const double start_rate =
        average_rate(Scheme::dmccs, std::vector<double>(2, start_fraction), cat, users)
            .average_rate;
    CHECK(result.rate < start_rate);

    // the original scheme never beats the modified one
    const SuccessiveResult dccs = successive_gp(Target::p0_dccs, cat, users, 1.2, cfg);
    CHECK(dccs.rate >= result.rate * (1.0 - 1e-6));
}

TEST_CASE("uniform instances yield symmetric placements matching the bound", "[gp]") {
    const FileCatalog cat = build_catalog({0.5, 0.5}, {1.0, 1.0}).catalog;
    const UserPopulation users{{0.5, 0.5}};
    SolverConfig cfg;
    const SuccessiveResult mccs = successive_gp(Target::p0_dmccs, cat, users, 1.0, cfg);
    const SuccessiveResult lb = successive_gp(Target::p3_lower_bound, cat, users, 1.0, cfg);
    CHECK(std::abs(mccs.q[0] - mccs.q[1]) < 1e-4);
    CHECK(std::abs(lb.q[0] - lb.q[1]) < 1e-4);
    CHECK(mccs.rate == Catch::Approx(lb.rate).margin(2.0 * cfg.outer_tol));
}

TEST_CASE("presolve does not change the optimum", "[gp]") {
    const FileCatalog cat = build_catalog({0.7, 0.3}, {1.0, 0.5}).catalog;
    const UserPopulation users{{0.5, 0.7}};
    const GPProblem base = build_p1(cat, users, 0.7);
    const GPProblem condensed = condense(base, {0.4, 0.4}, {0.6, 0.6});
    SolverConfig with = {};
    SolverConfig without = {};
    without.presolve = false;
    const GPSolution merged = solve_gp(condensed, with);
    const GPSolution plain = solve_gp(condensed, without);
    CHECK(merged.objective == Catch::Approx(plain.objective).epsilon(1e-6));
    // the argmin is only determined up to the square root of the duality gap
    for (int f = 0; f < 2; ++f)
        CHECK(merged.values[condensed.fraction_id(f)] ==
              Catch::Approx(plain.values[condensed.fraction_id(f)]).margin(5e-3));
}
