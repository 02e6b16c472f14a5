#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcc/errors.hpp"
#include "dcc/gp.hpp"

namespace dcc::gp {

struct GPSolution {
    std::vector<double> values;  // per problem variable
    double objective = 0.0;
    int newton_iterations = 0;
    double kkt_residual = 0.0;
};

/// log(sum of exp(log c + a.y)) of a posynomial at log-point y.
inline double log_posynomial(const Posynomial& p, const std::vector<double>& y) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const Monomial& m : p.terms) peak = std::max(peak, m.log_eval(y));
    double acc = 0.0;
    for (const Monomial& m : p.terms) acc += std::exp(m.log_eval(y) - peak);
    return peak + std::log(acc);
}

/// Gradient of log_posynomial: the softmax-weighted average of the exponents.
inline std::vector<double> log_posynomial_gradient(const Posynomial& p,
                                                   const std::vector<double>& y,
                                                   std::size_t n_vars) {
    const double lse = log_posynomial(p, y);
    std::vector<double> grad(n_vars, 0.0);
    for (const Monomial& m : p.terms) {
        const double weight = std::exp(m.log_eval(y) - lse);
        for (const auto& [var, exp] : m.powers) grad[var] += weight * exp;
    }
    return grad;
}

namespace solver_detail {

constexpr double kLogLower = -20.723265836946411;  // log 1e-9
constexpr double kLogUpper = 20.723265836946411;   // log 1e9
constexpr double kExpGuard = 690.0;                // exp() overflow guard

struct Term {
    double logc = 0.0;
    std::vector<std::pair<int, double>> powers;  // reduced variable ids
};

struct Row {
    std::vector<Term> terms;
};

// Reduced standard-form problem after variable merging, plus bookkeeping to
// expand a reduced solution back to the caller's variables.
struct Reduced {
    int n_vars = 0;
    std::vector<Term> objective;
    std::vector<Row> rows;
    std::vector<int> expand;    // original var -> reduced var
    std::vector<char> is_aux;   // reduced vars with a diagonal Hessian block
    std::vector<double> lo, hi; // per-variable log bounds
};

inline std::string encode_term(const Monomial& m, VarId self) {
    std::string out;
    out.reserve(16 + m.powers.size() * 20);
    auto push = [&out](const void* p, std::size_t n) {
        out.append(reinterpret_cast<const char*>(p), n);
    };
    push(&m.coefficient, sizeof(double));
    for (const auto& [var, exp] : m.powers) {
        const std::int64_t id = (var == self) ? -1 : static_cast<std::int64_t>(var);
        push(&id, sizeof(id));
        push(&exp, sizeof(double));
    }
    return out;
}

inline std::string encode_constraint(const Constraint& c, VarId self) {
    std::vector<std::string> encoded;
    encoded.reserve(c.lhs.terms.size());
    for (const Monomial& m : c.lhs.terms) encoded.push_back(encode_term(m, self));
    std::sort(encoded.begin(), encoded.end());
    std::string out;
    out.push_back(c.kind == ConstraintKind::posynomial ? 'p' : 'i');
    for (const std::string& e : encoded) {
        const std::size_t n = e.size();
        out.append(reinterpret_cast<const char*>(&n), sizeof(n));
        out += e;
    }
    return out;
}

// Flattens a standard-form problem for the barrier loop: log coefficients,
// duplicate rows dropped, bound variables classified for the diagonal-block
// treatment. Variables map through unchanged (expand is the identity).
inline Reduced flatten(const GPProblem& gp) {
    const std::size_t n_vars = gp.variables.size();
    const VarId no_self = static_cast<VarId>(n_vars);  // sentinel never matched

    Reduced red;
    red.n_vars = static_cast<int>(n_vars);
    red.expand.resize(n_vars);
    for (std::size_t v = 0; v < n_vars; ++v) red.expand[v] = static_cast<int>(v);

    auto to_term = [](const Monomial& m) {
        Term t;
        t.logc = std::log(m.coefficient);
        t.powers.reserve(m.powers.size());
        for (const auto& [var, exp] : m.powers) t.powers.push_back({static_cast<int>(var), exp});
        return t;
    };
    for (const Monomial& m : gp.objective.terms) red.objective.push_back(to_term(m));

    std::unordered_map<std::string, char> seen_rows;
    for (const Constraint& c : gp.constraints) {
        if (!seen_rows.emplace(encode_constraint(c, no_self), 1).second) continue;
        Row row;
        row.terms.reserve(c.lhs.terms.size());
        for (const Monomial& m : c.lhs.terms) row.terms.push_back(to_term(m));
        red.rows.push_back(std::move(row));
    }

    // a pair of bound variables sharing a constraint row or an objective term
    // would couple off-diagonal, so such pairs stay in the dense core
    red.is_aux.assign(n_vars, 0);
    for (std::size_t v = 0; v < n_vars; ++v) {
        const VarRole role = gp.variables[v].role;
        red.is_aux[v] = role == VarRole::message_bound || role == VarRole::type_bound;
    }
    auto demote_shared = [&](const std::vector<std::pair<int, double>>& powers) {
        int n_aux = 0;
        for (const auto& [var, exp] : powers) n_aux += red.is_aux[static_cast<std::size_t>(var)];
        if (n_aux >= 2)
            for (const auto& [var, exp] : powers) red.is_aux[static_cast<std::size_t>(var)] = 0;
    };
    for (const Term& t : red.objective) demote_shared(t.powers);
    for (const Row& row : red.rows) {
        std::vector<std::pair<int, double>> all;
        for (const Term& t : row.terms)
            all.insert(all.end(), t.powers.begin(), t.powers.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        demote_shared(all);
    }

    red.lo.assign(n_vars, kLogLower);
    red.hi.assign(n_vars, kLogUpper);
    return red;
}

// One barrier evaluation: value of t*objective - sum log(1 - g_j), or
// infeasible if any posynomial reaches 1.
struct BarrierValue {
    double value = 0.0;
    bool feasible = false;
};

inline double row_value(const Row& row, const std::vector<double>& y) {
    double total = 0.0;
    for (const Term& term : row.terms) {
        double lin = term.logc;
        for (const auto& [var, exp] : term.powers) lin += exp * y[static_cast<std::size_t>(var)];
        if (lin > kExpGuard) return std::numeric_limits<double>::infinity();
        total += std::exp(lin);
    }
    return total;
}

inline double objective_value(const std::vector<Term>& objective, const std::vector<double>& y,
                              double t) {
    double total = 0.0;
    for (const Term& term : objective) {
        double lin = term.logc;
        for (const auto& [var, exp] : term.powers) lin += exp * y[static_cast<std::size_t>(var)];
        total += std::exp(std::min(lin, kExpGuard));
    }
    return t * total;
}

inline BarrierValue barrier_value(const Reduced& red, const std::vector<double>& y, double t) {
    BarrierValue out;
    double value = objective_value(red.objective, y, t);
    for (const Row& row : red.rows) {
        const double g = row_value(row, y);
        if (!(g < 1.0)) return out;  // outside the feasible interior
        value -= std::log1p(-g);
    }
    // the variable box enters the barrier as well, keeping the domain open
    for (int v = 0; v < red.n_vars; ++v) {
        const double below = y[static_cast<std::size_t>(v)] - red.lo[static_cast<std::size_t>(v)];
        const double above = red.hi[static_cast<std::size_t>(v)] - y[static_cast<std::size_t>(v)];
        if (!(below > 0.0) || !(above > 0.0)) return out;
        value -= std::log(below) + std::log(above);
    }
    if (!std::isfinite(value)) return out;
    out.value = value;
    out.feasible = true;
    return out;
}

// Workspace for Newton steps with the aux block eliminated by a Schur
// complement. Aux variables never couple with each other, so their Hessian
// block is diagonal and the dense solve happens only on the core.
struct NewtonWorkspace {
    std::vector<int> core_index;  // reduced var -> core column or -1
    std::vector<int> aux_index;   // reduced var -> aux row or -1
    int n_core = 0, n_aux = 0;

    Eigen::MatrixXd h_core;
    Eigen::MatrixXd cross;  // n_aux x n_core
    Eigen::VectorXd d_aux;
    Eigen::VectorXd g_core, g_aux;

    void init(const Reduced& red) {
        core_index.assign(static_cast<std::size_t>(red.n_vars), -1);
        aux_index.assign(static_cast<std::size_t>(red.n_vars), -1);
        for (int v = 0; v < red.n_vars; ++v) {
            if (red.is_aux[static_cast<std::size_t>(v)])
                aux_index[static_cast<std::size_t>(v)] = n_aux++;
            else
                core_index[static_cast<std::size_t>(v)] = n_core++;
        }
        h_core.resize(n_core, n_core);
        cross.resize(n_aux, n_core);
        d_aux.resize(n_aux);
        g_core.resize(n_core);
        g_aux.resize(n_aux);
    }

    void clear() {
        h_core.setZero();
        cross.setZero();
        d_aux.setZero();
        g_core.setZero();
        g_aux.setZero();
    }

    void add_gradient(int var, double value) {
        const int c = core_index[static_cast<std::size_t>(var)];
        if (c >= 0)
            g_core(c) += value;
        else
            g_aux(aux_index[static_cast<std::size_t>(var)]) += value;
    }

    void add_hessian(int vi, int vj, double value) {
        const int ci = core_index[static_cast<std::size_t>(vi)];
        const int cj = core_index[static_cast<std::size_t>(vj)];
        if (ci >= 0 && cj >= 0) {
            h_core(ci, cj) += value;
            if (ci != cj) h_core(cj, ci) += value;
        } else if (ci < 0 && cj < 0) {
            // aux-aux coupling only happens on the diagonal by construction
            d_aux(aux_index[static_cast<std::size_t>(vi)]) += value;
        } else {
            const int aux = ci < 0 ? aux_index[static_cast<std::size_t>(vi)]
                                   : aux_index[static_cast<std::size_t>(vj)];
            const int core = ci < 0 ? cj : ci;
            cross(aux, core) += value;
        }
    }

    // rank-one update weight * v v^T for a sparse vector
    void add_outer(const std::vector<std::pair<int, double>>& v, double weight) {
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i; j < v.size(); ++j)
                add_hessian(v[i].first, v[j].first, weight * v[i].second * v[j].second);
    }
};

struct NewtonStep {
    Eigen::VectorXd delta_core;
    Eigen::VectorXd delta_aux;
    double decrement_sq = 0.0;  // lambda^2
    double slope = 0.0;         // g . delta
};

inline void assemble(const Reduced& red, const std::vector<double>& y, double t,
                     NewtonWorkspace& ws) {
    ws.clear();
    for (int v = 0; v < red.n_vars; ++v) {
        const double below = y[static_cast<std::size_t>(v)] - red.lo[static_cast<std::size_t>(v)];
        const double above = red.hi[static_cast<std::size_t>(v)] - y[static_cast<std::size_t>(v)];
        ws.add_gradient(v, -1.0 / below + 1.0 / above);
        ws.add_hessian(v, v, 1.0 / (below * below) + 1.0 / (above * above));
    }
    for (const Term& term : red.objective) {
        double lin = term.logc;
        for (const auto& [var, exp] : term.powers) lin += exp * y[static_cast<std::size_t>(var)];
        const double v = t * std::exp(std::min(lin, kExpGuard));
        for (const auto& [var, exp] : term.powers) ws.add_gradient(var, v * exp);
        ws.add_outer(term.powers, v);
    }
    std::vector<std::pair<int, double>> row_grad;
    for (const Row& row : red.rows) {
        const double g = row_value(row, y);
        const double denom = 1.0 - g;
        row_grad.clear();
        for (const Term& term : row.terms) {
            double lin = term.logc;
            for (const auto& [var, exp] : term.powers)
                lin += exp * y[static_cast<std::size_t>(var)];
            const double w = std::exp(lin);
            ws.add_outer(term.powers, w / denom);
            for (const auto& [var, exp] : term.powers) {
                const double piece = w * exp;
                ws.add_gradient(var, piece / denom);
                bool merged = false;
                for (auto& entry : row_grad)
                    if (entry.first == var) {
                        entry.second += piece;
                        merged = true;
                        break;
                    }
                if (!merged) row_grad.push_back({var, piece});
            }
        }
        ws.add_outer(row_grad, 1.0 / (denom * denom));
    }
}

inline bool solve_step(NewtonWorkspace& ws, NewtonStep& step) {
    const double aux_floor = 1e-300;
    Eigen::VectorXd d_inv = ws.d_aux.cwiseMax(aux_floor).cwiseInverse();
    Eigen::MatrixXd schur = ws.h_core;
    Eigen::VectorXd rhs = -ws.g_core;
    if (ws.n_aux > 0) {
        schur.noalias() -= ws.cross.transpose() * d_inv.asDiagonal() * ws.cross;
        rhs.noalias() += ws.cross.transpose() * (d_inv.asDiagonal() * ws.g_aux);
    }
    const double scale = ws.n_core > 0 ? schur.diagonal().cwiseAbs().maxCoeff() : 0.0;
    double ridge = 1e-12 * (1.0 + scale);
    for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::MatrixXd regularized = schur;
        regularized.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> llt(regularized);
        if (llt.info() == Eigen::Success) {
            step.delta_core = llt.solve(rhs);
            if (step.delta_core.allFinite()) {
                if (ws.n_aux > 0) {
                    step.delta_aux =
                        d_inv.asDiagonal() * (-ws.g_aux - ws.cross * step.delta_core);
                } else {
                    step.delta_aux.resize(0);
                }
                step.slope = ws.g_core.dot(step.delta_core);
                if (ws.n_aux > 0) step.slope += ws.g_aux.dot(step.delta_aux);
                step.decrement_sq = -step.slope;
                return true;
            }
        }
        ridge *= 1000.0;
    }
    return false;
}

struct BarrierOutcome {
    int newton_steps = 0;
    double t_final = 1.0;
    bool stalled = false;
};

// Damped-Newton barrier loop over increasing t. early_exit, when provided, is
// checked after every step and ends the whole loop (used by phase 1). The gap
// target is relative to the current objective when relative_gap is set (the
// main solve, where the objective only decreases) and absolute in normalized
// units otherwise (phase 1, where the objective may first grow).
template <typename EarlyExit>
inline BarrierOutcome run_barrier(const Reduced& red, std::vector<double>& y, double gap_target,
                                  bool relative_gap, double t_start, int max_newton,
                                  EarlyExit&& early_exit) {
    NewtonWorkspace ws;
    ws.init(red);
    NewtonStep step;
    BarrierOutcome outcome;
    // box bounds count toward the duality-gap estimate as well
    const double m = static_cast<double>(red.rows.size() + 2 * red.n_vars);
    double t = t_start;
    const double mu = 10.0;

    static const bool debug = std::getenv("DCC_GP_DEBUG") != nullptr;
    for (int stage = 0; stage < 80; ++stage) {
        const double center_tol = 1e-9 * std::max(1.0, t);
        for (int iter = 0;; ++iter) {
            if (outcome.newton_steps >= max_newton)
                throw MaxIterations("newton iteration budget exhausted");
            assemble(red, y, t, ws);
            if (!solve_step(ws, step)) throw NumericalBreakdown("newton system not solvable");
            ++outcome.newton_steps;
            if (step.decrement_sq / 2.0 <= center_tol) break;
            if (iter >= 60) break;  // centering cap; outer stages continue

            // pre-cap the step short of the box (the box barrier keeps the
            // current point strictly inside, so this stays positive)
            double alpha = 1.0;
            for (int v = 0; v < red.n_vars; ++v) {
                const int c = ws.core_index[static_cast<std::size_t>(v)];
                const double d = c >= 0 ? step.delta_core(c)
                                        : step.delta_aux(ws.aux_index[static_cast<std::size_t>(v)]);
                const double yv = y[static_cast<std::size_t>(v)];
                if (d > 0.0)
                    alpha = std::min(
                        alpha, 0.999 * (red.hi[static_cast<std::size_t>(v)] - yv) / d);
                if (d < 0.0)
                    alpha = std::min(
                        alpha, 0.999 * (red.lo[static_cast<std::size_t>(v)] - yv) / d);
            }
            if (!(alpha > 0.0)) {
                outcome.stalled = true;
                break;
            }
            const BarrierValue base = barrier_value(red, y, t);
            if (!base.feasible) throw NumericalBreakdown("iterate left the feasible interior");
            std::vector<double> trial(y.size());
            bool accepted = false;
            for (int back = 0; back < 70; ++back) {
                for (int v = 0; v < red.n_vars; ++v) {
                    const int c = ws.core_index[static_cast<std::size_t>(v)];
                    const double d =
                        c >= 0 ? step.delta_core(c)
                               : step.delta_aux(ws.aux_index[static_cast<std::size_t>(v)]);
                    trial[static_cast<std::size_t>(v)] =
                        y[static_cast<std::size_t>(v)] + alpha * d;
                }
                const BarrierValue candidate = barrier_value(red, trial, t);
                if (candidate.feasible &&
                    candidate.value <= base.value + 0.01 * alpha * step.slope) {
                    y.swap(trial);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (debug)
                std::cerr << "    stage " << stage << " iter " << iter << " t " << t
                          << " dec2 " << step.decrement_sq / 2.0 << " alpha " << alpha
                          << " acc " << accepted << " obj "
                          << objective_value(red.objective, y, 1.0) << "\n";
            if (!accepted) {
                outcome.stalled = true;
                break;
            }
            if (early_exit(y)) {
                outcome.t_final = t;
                return outcome;
            }
        }
        if (early_exit(y)) break;
        const double scale =
            relative_gap ? std::max(objective_value(red.objective, y, 1.0), 1e-12) : 1.0;
        if (m == 0.0 || m / t <= gap_target * scale) break;
        if (t > 1e18) break;
        t *= mu;
        outcome.stalled = false;
    }
    outcome.t_final = t;
    return outcome;
}

inline double max_row_log(const Reduced& red, const std::vector<double>& y) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const Row& row : red.rows) {
        double peak = -std::numeric_limits<double>::infinity();
        for (const Term& term : row.terms) {
            double lin = term.logc;
            for (const auto& [var, exp] : term.powers)
                lin += exp * y[static_cast<std::size_t>(var)];
            peak = std::max(peak, lin);
        }
        double acc = 0.0;
        for (const Term& term : row.terms) {
            double lin = term.logc;
            for (const auto& [var, exp] : term.powers)
                lin += exp * y[static_cast<std::size_t>(var)];
            acc += std::exp(lin - peak);
        }
        worst = std::max(worst, peak + std::log(acc));
    }
    return worst;
}

// Phase 1: minimize a scale variable s with every constraint divided by s.
// Ends as soon as the underlying point becomes strictly feasible; a converged
// s at or above one certifies an empty interior.
inline int make_strictly_feasible(const Reduced& red, std::vector<double>& y, int max_newton) {
    if (max_row_log(red, y) < -1e-10) return 0;

    Reduced aug = red;
    const int s_var = aug.n_vars++;
    aug.is_aux.push_back(0);
    aug.lo.push_back(-600.0);
    aug.hi.push_back(600.0);
    for (Row& row : aug.rows)
        for (Term& term : row.terms) term.powers.push_back({s_var, -1.0});
    const double s0 = max_row_log(red, y) + std::log(2.0);
    aug.objective.clear();
    Term objective_term;
    objective_term.logc = -s0;  // normalized so the start value is about one
    objective_term.powers.push_back({s_var, 1.0});
    aug.objective.push_back(objective_term);

    std::vector<double> z = y;
    z.push_back(s0);
    auto feasible_now = [&](const std::vector<double>& point) {
        std::vector<double> base(point.begin(), point.end() - 1);
        return max_row_log(red, base) < -1e-10;
    };
    const BarrierOutcome outcome =
        run_barrier(aug, z, 1e-3, false, 1.0, max_newton, feasible_now);
    std::vector<double> base(z.begin(), z.end() - 1);
    if (max_row_log(red, base) >= -1e-10)
        throw Infeasible("no strictly feasible point found (phase 1)");
    y = base;
    return outcome.newton_steps;
}

}  // namespace solver_detail

/// Presolve: merges bound variables with identical constraint sets (appearing
/// elsewhere only as bare objective terms) into one variable with the summed
/// objective weight, and drops the duplicated constraints. Their optimal
/// values coincide, so the optimum is unchanged. Fraction/complement ids are
/// preserved, which lets a successive driver apply this once to the parent
/// CGP and condense the smaller problem each iteration. `mapping`, when
/// given, receives old-variable -> new-variable ids.
inline GPProblem presolve_merge(const GPProblem& gp, std::vector<VarId>* mapping = nullptr) {
    using solver_detail::encode_constraint;
    const std::size_t n_orig = gp.variables.size();

    std::vector<char> candidate(n_orig, 0);
    for (std::size_t v = 0; v < n_orig; ++v) {
        const VarRole role = gp.variables[v].role;
        candidate[v] = role == VarRole::message_bound || role == VarRole::type_bound;
    }
    for (const Monomial& m : gp.objective.terms) {
        const bool bare = m.powers.size() == 1 && m.powers[0].second == 1.0;
        if (!bare)
            for (const auto& [var, exp] : m.powers) candidate[var] = 0;
    }
    std::vector<std::vector<int>> constraints_of(n_orig);
    for (std::size_t j = 0; j < gp.constraints.size(); ++j) {
        std::vector<VarId> here;
        for (const Monomial& m : gp.constraints[j].lhs.terms)
            for (const auto& [var, exp] : m.powers) here.push_back(var);
        std::sort(here.begin(), here.end());
        here.erase(std::unique(here.begin(), here.end()), here.end());
        int n_candidates = 0;
        for (VarId v : here) n_candidates += candidate[v] ? 1 : 0;
        for (VarId v : here) {
            if (n_candidates >= 2) candidate[v] = 0;
            constraints_of[v].push_back(static_cast<int>(j));
        }
    }
    std::vector<int> representative(n_orig);
    for (std::size_t v = 0; v < n_orig; ++v) representative[v] = static_cast<int>(v);
    {
        std::unordered_map<std::string, int> groups;
        for (std::size_t v = 0; v < n_orig; ++v) {
            if (!candidate[v] || constraints_of[v].empty()) continue;
            std::vector<std::string> parts;
            parts.reserve(constraints_of[v].size());
            for (int j : constraints_of[v])
                parts.push_back(encode_constraint(gp.constraints[static_cast<std::size_t>(j)],
                                                  static_cast<VarId>(v)));
            std::sort(parts.begin(), parts.end());
            std::string signature;
            for (const std::string& s : parts) signature += s;
            auto [it, inserted] = groups.emplace(signature, static_cast<int>(v));
            representative[v] = it->second;
        }
    }

    GPProblem out;
    out.n_files = gp.n_files;
    std::vector<VarId> new_id(n_orig, 0);
    for (std::size_t v = 0; v < n_orig; ++v) {
        if (representative[v] != static_cast<int>(v)) continue;
        new_id[v] = static_cast<VarId>(out.variables.size());
        out.variables.push_back(gp.variables[v]);
    }
    for (std::size_t v = 0; v < n_orig; ++v)
        new_id[v] = new_id[static_cast<std::size_t>(representative[v])];

    auto remap = [&](Monomial m) {
        for (auto& [var, exp] : m.powers) var = new_id[var];
        std::sort(m.powers.begin(), m.powers.end());
        return m;
    };

    std::vector<double> group_weight(out.variables.size(), 0.0);
    std::vector<char> group_used(out.variables.size(), 0);
    for (const Monomial& m : gp.objective.terms) {
        const bool bare = m.powers.size() == 1 && m.powers[0].second == 1.0;
        if (bare && candidate[m.powers[0].first]) {
            group_weight[new_id[m.powers[0].first]] += m.coefficient;
            group_used[new_id[m.powers[0].first]] = 1;
        } else {
            out.objective.terms.push_back(remap(m));
        }
    }
    for (std::size_t v = 0; v < out.variables.size(); ++v) {
        if (!group_used[v]) continue;
        Monomial m;
        m.coefficient = group_weight[v];
        m.powers.push_back({static_cast<VarId>(v), 1.0});
        out.objective.terms.push_back(std::move(m));
    }

    std::unordered_map<std::string, char> seen;
    const VarId no_self = static_cast<VarId>(n_orig);
    for (const Constraint& c : gp.constraints) {
        bool dropped = false;
        for (const Monomial& m : c.lhs.terms)
            for (const auto& [var, exp] : m.powers)
                if (representative[var] != static_cast<int>(var)) dropped = true;
        if (dropped) continue;
        if (!seen.emplace(encode_constraint(c, no_self), 1).second) continue;
        Constraint remapped;
        remapped.kind = c.kind;
        if (c.kind == ConstraintKind::inverse_sum) {
            remapped.fraction_var = new_id[c.fraction_var];
            remapped.complement_var = new_id[c.complement_var];
        }
        for (const Monomial& m : c.lhs.terms) remapped.lhs.terms.push_back(remap(m));
        out.constraints.push_back(std::move(remapped));
    }
    if (mapping != nullptr) *mapping = new_id;
    return out;
}

/// Solves a standard-form GP by the log-variable substitution: monomials
/// become exponentials of affine forms, posynomial constraints become smooth
/// convex functions, and a damped Newton method with a logarithmic barrier
/// over the constraint slacks follows the central path. An optional warm
/// start gives the variable values to start from; otherwise all variables
/// start at one, with a phase-1 pass if that is infeasible.
inline GPSolution solve_gp(const GPProblem& gp, const SolverConfig& cfg,
                           const std::vector<double>* warm_start = nullptr) {
    if (!gp.is_standard())
        throw NotStandardGP("solve_gp needs every constraint in posynomial form; condense first");
    if (gp.objective.terms.empty()) throw NotStandardGP("objective must have at least one term");
    for (const Monomial& m : gp.objective.terms)
        if (!(m.coefficient > 0.0)) throw NotStandardGP("coefficients must be positive");
    for (const Constraint& c : gp.constraints)
        for (const Monomial& m : c.lhs.terms)
            if (!(m.coefficient > 0.0)) throw NotStandardGP("coefficients must be positive");

    using namespace solver_detail;
    Reduced red;
    if (cfg.presolve) {
        std::vector<VarId> merged_id;
        red = flatten(presolve_merge(gp, &merged_id));
        red.expand.resize(gp.variables.size());
        for (std::size_t v = 0; v < gp.variables.size(); ++v)
            red.expand[v] = static_cast<int>(merged_id[v]);
    } else {
        red = flatten(gp);
    }

    std::vector<double> y(static_cast<std::size_t>(red.n_vars), 0.0);
    if (warm_start != nullptr) {
        if (warm_start->size() != gp.variables.size())
            throw LengthMismatch("warm start length does not match problem");
        for (std::size_t v = 0; v < gp.variables.size(); ++v) {
            // strictly inside the variable box so the box barrier is finite
            const double clamped = std::clamp((*warm_start)[v], 1.01e-9, 0.99e9);
            y[static_cast<std::size_t>(red.expand[v])] = std::log(clamped);
        }
    }

    int newton_total = make_strictly_feasible(red, y, cfg.max_inner);

    // normalize the objective so the duality-gap target is relative
    const double start_value = objective_value(red.objective, y, 1.0);
    if (!(start_value > 0.0) || !std::isfinite(start_value))
        throw NumericalBreakdown("objective not finite at the start point");
    const double norm = start_value;
    for (Term& term : red.objective) term.logc -= std::log(norm);

    const auto never = [](const std::vector<double>&) { return false; };
    // start the path where the barrier weight already respects a warm point:
    // the initial gap estimate is about half the starting objective value
    const double t_start =
        std::max(1.0, 2.0 * static_cast<double>(red.rows.size() + 2 * red.n_vars));
    const BarrierOutcome outcome = run_barrier(red, y, 0.5 * cfg.inner_tol, true, t_start,
                                               cfg.max_inner - newton_total, never);
    newton_total += outcome.newton_steps;

    GPSolution solution;
    solution.newton_iterations = newton_total;
    solution.values.resize(gp.variables.size());
    for (std::size_t v = 0; v < gp.variables.size(); ++v)
        solution.values[v] = std::exp(y[static_cast<std::size_t>(red.expand[v])]);
    const double final_scaled = objective_value(red.objective, y, 1.0);
    solution.objective = final_scaled * norm;
    if (!std::isfinite(solution.objective))
        throw NumericalBreakdown("objective not finite at the solution");

    const double gap = red.rows.empty()
                           ? 0.0
                           : static_cast<double>(red.rows.size()) / outcome.t_final;
    solution.kkt_residual = gap / std::max(final_scaled, 1e-12);
    return solution;
}

}  // namespace dcc::gp
