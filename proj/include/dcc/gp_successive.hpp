#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcc/errors.hpp"
#include "dcc/gp.hpp"
#include "dcc/gp_solver.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"

namespace dcc::gp {

enum class Target { p0_dmccs, p3_lower_bound, p0_dccs };

inline Scheme scheme_of(Target target) {
    switch (target) {
        case Target::p0_dmccs: return Scheme::dmccs;
        case Target::p3_lower_bound: return Scheme::lower_bound;
        case Target::p0_dccs: return Scheme::dccs;
    }
    return Scheme::dmccs;
}

struct SuccessiveResult {
    std::vector<double> q;
    double rate = 0.0;             // exact average rate at q
    double final_objective = 0.0;  // GP objective at the last inner solution
    std::vector<double> trace;     // GP objective per outer iteration
    int outer_iterations = 0;
    int newton_iterations = 0;
    bool converged = false;
};

namespace detail {

// Nudges an iterate strictly inside every constraint so the next condensation
// anchor is also a valid interior Newton start: fractions off their bounds,
// budget strictly slack, and complement at least (1 - fraction) plus a margin.
// The margins sit well above the solver's own interiority threshold.
inline void anchorize(const FileCatalog& cat, double budget, std::vector<double>& fraction,
                      std::vector<double>& complement) {
    const int n = cat.n_files();
    for (int f = 0; f < n; ++f) {
        double& qf = fraction[static_cast<std::size_t>(f)];
        qf = std::clamp(qf, 1e-8, 1.0 - 1e-8);
    }
    double used = 0.0;
    for (int f = 0; f < n; ++f)
        used += fraction[static_cast<std::size_t>(f)] * cat.sizes[static_cast<std::size_t>(f)];
    if (used > budget * (1.0 - 1e-9)) {
        const double shrink = budget * (1.0 - 1e-9) / used;
        for (int f = 0; f < n; ++f) fraction[static_cast<std::size_t>(f)] *= shrink;
    }
    for (int f = 0; f < n; ++f) {
        double& xf = complement[static_cast<std::size_t>(f)];
        xf = std::max(xf, 1.0 - fraction[static_cast<std::size_t>(f)] + 1e-9);
        xf = std::clamp(xf, 1e-9, 2.0);
    }
}

// Start values for the bound variables of a condensed problem: slightly above
// the tightest of their defining constraints evaluated at the anchor.
inline std::vector<double> warm_start_values(const GPProblem& condensed,
                                             const std::vector<double>& fraction,
                                             const std::vector<double>& complement) {
    const std::size_t n_vars = condensed.variables.size();
    std::vector<double> values(n_vars, 1.0);
    const int n = condensed.n_files;
    for (int f = 0; f < n; ++f) {
        values[condensed.fraction_id(f)] = fraction[static_cast<std::size_t>(f)];
        values[condensed.complement_id(f)] = complement[static_cast<std::size_t>(f)];
    }
    std::vector<double> required(n_vars, 0.0);
    for (const Constraint& c : condensed.constraints) {
        // find the lone bound variable, carried with exponent -1
        int bound = -1;
        for (const Monomial& m : c.lhs.terms)
            for (const auto& [var, exp] : m.powers) {
                const VarRole role = condensed.variables[var].role;
                if ((role == VarRole::message_bound || role == VarRole::type_bound) &&
                    exp == -1.0)
                    bound = static_cast<int>(var);
            }
        if (bound < 0) continue;
        double total = 0.0;
        for (const Monomial& m : c.lhs.terms) {
            double v = m.coefficient;
            for (const auto& [var, exp] : m.powers) {
                if (static_cast<int>(var) == bound) continue;
                v *= std::pow(values[var], exp);
            }
            total += v;
        }
        required[static_cast<std::size_t>(bound)] =
            std::max(required[static_cast<std::size_t>(bound)], total);
    }
    for (std::size_t v = 0; v < n_vars; ++v) {
        const VarRole role = condensed.variables[v].role;
        if (role == VarRole::message_bound || role == VarRole::type_bound)
            values[v] = std::max(required[v] * (1.0 + 1e-6), 1e-9);
    }
    return values;
}

}  // namespace detail

/// Successive GP approximation: condense the CGP around the current iterate,
/// solve the resulting GP, and repeat until the objective moves by less than
/// outer_tol between iterations. Each subproblem contains the previous
/// solution, so the objective trace never increases beyond solver noise. The
/// returned rate is the rate module's own evaluation at the final placement.
inline SuccessiveResult successive_gp(Target target, const FileCatalog& cat,
                                      const UserPopulation& users, double budget,
                                      const SolverConfig& cfg) {
    const int n = cat.n_files();
    if (budget < 0.0) throw OutOfRange("cache budget must be nonnegative");
    const Scheme scheme = scheme_of(target);
    const double total_bits = cat.total_bits();

    SuccessiveResult result;
    if (budget <= 1e-7 * total_bits) {
        // log-domain variables cannot reach zero; an (almost) empty cache is
        // served exactly by the all-zero placement
        result.q.assign(static_cast<std::size_t>(n), 0.0);
        result.rate = average_rate(scheme, result.q, cat, users).average_rate;
        result.trace = {result.rate};
        result.converged = true;
        return result;
    }
    if (budget >= total_bits * (1.0 - 1e-12)) {
        // full caching fits the budget and is trivially optimal
        result.q.assign(static_cast<std::size_t>(n), 1.0);
        result.rate = average_rate(scheme, result.q, cat, users).average_rate;
        result.trace = {result.rate};
        result.converged = true;
        return result;
    }

    // merge interchangeable bound variables once, up front; condensation then
    // works on the much smaller problem every iteration
    GPProblem base = presolve_merge((target == Target::p3_lower_bound)
                                        ? build_p4(cat, users, budget)
                                        : build_p1(cat, users, budget,
                                                   target == Target::p0_dccs));

    std::vector<double> fraction;
    if (!cfg.initial_q.empty()) {
        if (static_cast<int>(cfg.initial_q.size()) != n)
            throw LengthMismatch("initial placement length does not match catalog");
        if (!validate_placement(cfg.initial_q, cat, budget).ok())
            throw OutOfRange("initial placement violates the cache constraints");
        fraction = cfg.initial_q;
    } else {
        const double common = std::min(1.0, budget / total_bits) * 0.99;
        fraction.assign(static_cast<std::size_t>(n), common);
    }
    std::vector<double> complement(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f)
        complement[static_cast<std::size_t>(f)] =
            1.0 - fraction[static_cast<std::size_t>(f)] + 1e-6;

    for (int iter = 1; iter <= cfg.max_outer; ++iter) {
        detail::anchorize(cat, budget, fraction, complement);
        const GPProblem condensed = condense(base, fraction, complement);
        const std::vector<double> warm =
            detail::warm_start_values(condensed, fraction, complement);
        const GPSolution sol = solve_gp(condensed, cfg, &warm);
        result.newton_iterations += sol.newton_iterations;
        result.final_objective = sol.objective;

        for (int f = 0; f < n; ++f) {
            fraction[static_cast<std::size_t>(f)] =
                std::clamp(sol.values[condensed.fraction_id(f)], 0.0, 1.0);
            complement[static_cast<std::size_t>(f)] = sol.values[condensed.complement_id(f)];
            // condensation soundness: the condensed solution must satisfy the
            // parent problem's linking constraint by direct substitution
            if (fraction[static_cast<std::size_t>(f)] +
                    complement[static_cast<std::size_t>(f)] <
                1.0 - 1e-9)
                throw NumericalBreakdown("condensed solution violates the parent constraint");
        }
        result.outer_iterations = iter;
        if (cfg.progress) cfg.progress(iter, sol.objective, sol.kkt_residual);

        if (!result.trace.empty()) {
            const double previous = result.trace.back();
            // floor of 1e-7 relative: the inner duality-gap targeting leaves
            // jitter of a few 1e-8 relative between consecutive solves even
            // when inner_tol is pushed below that
            const double slack =
                std::max(10.0 * cfg.inner_tol, 1e-7) * std::max(1.0, std::abs(previous));
            if (sol.objective > previous + slack)
                throw NonMonotoneTrace("objective increased across outer iterations");
            if (std::abs(sol.objective - previous) < cfg.outer_tol) {
                result.trace.push_back(sol.objective);
                result.converged = true;
                break;
            }
        }
        result.trace.push_back(sol.objective);
    }

    result.q = fraction;
    result.rate = average_rate(scheme, result.q, cat, users).average_rate;
    const ValidationReport report = validate_placement(result.q, cat, budget);
    if (!report.ok()) throw NumericalBreakdown("solver returned an invalid placement");
    return result;
}

}  // namespace dcc::gp
