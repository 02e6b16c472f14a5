#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dcc/combinatorics.hpp"
#include "dcc/errors.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"

namespace dcc::gp {

using VarId = std::uint32_t;

enum class VarRole {
    fraction,       // per-file caching fraction
    complement,     // stand-in for (1 - fraction), linked through a CGP constraint
    message_bound,  // upper bound on one coded-message size
    type_bound,     // upper bound on one demand-type rate
};

struct VariableInfo {
    VarRole role = VarRole::fraction;
    int index = 0;  // file index for fraction/complement, ordinal otherwise
    std::string name;
};

struct Monomial {
    double coefficient = 1.0;
    std::vector<std::pair<VarId, double>> powers;  // sorted by variable id

    double log_eval(const std::vector<double>& log_values) const {
        double lin = std::log(coefficient);
        for (const auto& [var, exp] : powers) lin += exp * log_values[var];
        return lin;
    }
    double eval(const std::vector<double>& values) const {
        double v = coefficient;
        for (const auto& [var, exp] : powers) v *= std::pow(values[var], exp);
        return v;
    }
};

struct Posynomial {
    std::vector<Monomial> terms;

    double eval(const std::vector<double>& values) const {
        double v = 0.0;
        for (const Monomial& m : terms) v += m.eval(values);
        return v;
    }
};

enum class ConstraintKind {
    posynomial,   // lhs <= 1
    inverse_sum,  // 1 / lhs <= 1 with lhs = fraction + complement (the CGP constraint)
};

struct Constraint {
    Posynomial lhs;
    ConstraintKind kind = ConstraintKind::posynomial;
    // linked variable pair, set for inverse_sum constraints
    VarId fraction_var = 0;
    VarId complement_var = 0;
};

struct GPProblem {
    Posynomial objective;
    std::vector<Constraint> constraints;
    std::vector<VariableInfo> variables;
    int n_files = 0;  // fraction vars are ids [0,N), complements [N,2N)

    VarId fraction_id(int file) const { return static_cast<VarId>(file); }
    VarId complement_id(int file) const { return static_cast<VarId>(n_files + file); }

    bool is_standard() const {
        for (const Constraint& c : constraints)
            if (c.kind != ConstraintKind::posynomial) return false;
        return true;
    }

    /// Textual interchange dump: one monomial per line as
    /// "coefficient name:exponent ...", grouped under section headers.
    void dump(std::ostream& os) const {
        const auto saved = os.precision(17);
        auto write_monomial = [&](const Monomial& m) {
            os << m.coefficient;
            for (const auto& [var, exp] : m.powers) os << ' ' << variables[var].name << ':' << exp;
            os << '\n';
        };
        os << "minimize\n";
        for (const Monomial& m : objective.terms) write_monomial(m);
        for (const Constraint& c : constraints) {
            os << (c.kind == ConstraintKind::posynomial ? "constraint\n" : "constraint inverse\n");
            for (const Monomial& m : c.lhs.terms) write_monomial(m);
        }
        os.precision(saved);
    }
};

struct SolverConfig {
    double outer_tol = 1e-4;   // absolute stop on successive objective values
    double inner_tol = 1e-8;   // relative duality-gap target per GP solve
    int max_outer = 200;
    int max_inner = 500;       // Newton iteration budget per GP solve
    std::vector<double> initial_q;  // optional feasible start; empty = default
    bool presolve = true;           // merge interchangeable bound variables
    // called once per outer iteration: (iteration, objective, kkt residual)
    std::function<void(int, double, double)> progress;
};

namespace detail {

inline void check_problem_budget(double budget) {
    if (!(budget > 0.0)) throw OutOfRange("cache budget must be positive for GP construction");
}

// Shared constraint prefix of both CGP formulations: fraction <= 1 per file,
// the budget posynomial, and one inverse-sum linking constraint per file.
inline void add_common_constraints(GPProblem& p, const FileCatalog& cat, double budget) {
    const int n = cat.n_files();
    for (int f = 0; f < n; ++f) {
        Constraint c;
        c.lhs.terms.push_back({1.0, {{p.fraction_id(f), 1.0}}});
        p.constraints.push_back(std::move(c));
    }
    {
        Constraint c;
        for (int f = 0; f < n; ++f)
            c.lhs.terms.push_back(
                {cat.sizes[static_cast<std::size_t>(f)] / budget, {{p.fraction_id(f), 1.0}}});
        p.constraints.push_back(std::move(c));
    }
    for (int f = 0; f < n; ++f) {
        Constraint c;
        c.kind = ConstraintKind::inverse_sum;
        c.fraction_var = p.fraction_id(f);
        c.complement_var = p.complement_id(f);
        c.lhs.terms.push_back({1.0, {{c.fraction_var, 1.0}}});
        c.lhs.terms.push_back({1.0, {{c.complement_var, 1.0}}});
        p.constraints.push_back(std::move(c));
    }
}

inline GPProblem problem_skeleton(const FileCatalog& cat) {
    GPProblem p;
    p.n_files = cat.n_files();
    for (int f = 0; f < p.n_files; ++f)
        p.variables.push_back({VarRole::fraction, f, "q" + std::to_string(f + 1)});
    for (int f = 0; f < p.n_files; ++f)
        p.variables.push_back({VarRole::complement, f, "x" + std::to_string(f + 1)});
    return p;
}

// Bitmask of subset positions a coded message may target: the canonical
// leaders, or every position when redundant subsets are kept.
inline std::uint32_t leader_filter(const std::vector<int>& demands, bool include_redundant) {
    if (include_redundant) return ~std::uint32_t{0};
    return dcc::detail::leader_mask_of(demands);
}

}  // namespace detail

/// CGP for the average-rate minimization of the modified scheme. One bound
/// variable per (active set, demand vector, coded message), constrained from
/// below by every constituent subfile size written in (fraction, complement)
/// monomial form. With `include_redundant` the objective covers all nonempty
/// subsets instead of only the non-redundant ones (the original scheme).
inline GPProblem build_p1(const FileCatalog& cat, const UserPopulation& users, double budget,
                          bool include_redundant = false) {
    detail::check_problem_budget(budget);
    const int n = cat.n_files();
    const int k = users.n_users();
    double predicted = 0.0;
    for (int a = 1; a <= k; ++a)
        predicted += static_cast<double>(binomial(k, a)) * std::pow(static_cast<double>(n), a) *
                     std::pow(2.0, a);
    if (predicted > 200000.0)
        throw ProblemTooLarge("message-bound variable count exceeds the desk-scale guard");

    GPProblem p = detail::problem_skeleton(cat);
    detail::add_common_constraints(p, cat, budget);

    int ordinal = 0;
    for (const auto& [mask, set_prob] : enumerate_active_sets(users)) {
        if (mask == 0 || set_prob <= 0.0) continue;
        const int a = __builtin_popcount(mask);
        for_each_demand(cat, a, [&](const std::vector<int>& demands, double demand_weight) {
            const std::uint32_t leader_mask = detail::leader_filter(demands, include_redundant);
            const double weight = set_prob * demand_weight;
            for (std::uint32_t sub = 1; sub < (std::uint32_t{1} << a); ++sub) {
                if ((sub & leader_mask) == 0) continue;
                const int s = __builtin_popcount(sub) - 1;
                const VarId bound = static_cast<VarId>(p.variables.size());
                p.variables.push_back(
                    {VarRole::message_bound, ordinal, "w" + std::to_string(ordinal + 1)});
                ++ordinal;
                p.objective.terms.push_back({weight, {{bound, 1.0}}});
                // one lower-bound monomial per distinct requested file in the subset
                std::uint32_t bits = sub;
                std::vector<int> seen;
                while (bits != 0) {
                    const int i = __builtin_ctz(bits);
                    bits &= bits - 1;
                    const int file = demands[static_cast<std::size_t>(i)];
                    if (std::find(seen.begin(), seen.end(), file) != seen.end()) continue;
                    seen.push_back(file);
                    Constraint c;
                    Monomial m;
                    m.coefficient = cat.sizes[static_cast<std::size_t>(file)];
                    if (s > 0) m.powers.push_back({p.fraction_id(file), static_cast<double>(s)});
                    m.powers.push_back({p.complement_id(file), static_cast<double>(a - s)});
                    m.powers.push_back({bound, -1.0});
                    std::sort(m.powers.begin(), m.powers.end());
                    c.lhs.terms.push_back(std::move(m));
                    p.constraints.push_back(std::move(c));
                }
            }
        });
    }
    return p;
}

/// CGP for the decentralized lower bound. One bound variable per (active set,
/// distinct-file set), constrained by the rank-weighted subfile sum of every
/// bijection from rank slots to the files.
inline GPProblem build_p4(const FileCatalog& cat, const UserPopulation& users, double budget) {
    detail::check_problem_budget(budget);
    const int n = cat.n_files();
    const int k = users.n_users();
    if (std::pow(static_cast<double>(n), k) * std::pow(2.0, k) > 1e7)
        throw ProblemTooLarge("demand space too large for lower-bound construction");

    GPProblem p = detail::problem_skeleton(cat);
    detail::add_common_constraints(p, cat, budget);

    std::int64_t factorial = 1;
    double predicted_constraints = 0.0;
    for (int j = 1; j <= std::min(n, k); ++j) {
        factorial *= j;
        if (factorial > 5040)
            throw TooManyPermutations("distinct-file sets need more than 7! bijections");
        predicted_constraints += static_cast<double>(binomial(n, j) * factorial) *
                                 std::pow(2.0, k);  // coarse upper bound over active sets
    }
    if (predicted_constraints > 200000.0)
        throw ProblemTooLarge("bijection constraint count exceeds the desk-scale guard");

    int ordinal = 0;
    for (const auto& [mask, set_prob] : enumerate_active_sets(users)) {
        if (mask == 0 || set_prob <= 0.0) continue;
        const int a = __builtin_popcount(mask);
        // probability mass of each distinct-file set under this active set
        std::map<std::vector<int>, double> type_weight;
        for_each_demand(cat, a, [&](const std::vector<int>& demands, double demand_weight) {
            std::vector<int> files = demands;
            std::sort(files.begin(), files.end());
            files.erase(std::unique(files.begin(), files.end()), files.end());
            type_weight[files] += demand_weight;
        });
        for (const auto& [files, weight] : type_weight) {
            const int n_distinct = static_cast<int>(files.size());
            const VarId bound = static_cast<VarId>(p.variables.size());
            p.variables.push_back(
                {VarRole::type_bound, ordinal, "r" + std::to_string(ordinal + 1)});
            ++ordinal;
            p.objective.terms.push_back({set_prob * weight, {{bound, 1.0}}});
            std::vector<int> perm(files.begin(), files.end());
            std::sort(perm.begin(), perm.end());
            do {
                Constraint c;
                for (int i = 1; i <= n_distinct; ++i) {
                    const int file = perm[static_cast<std::size_t>(i - 1)];
                    for (int s = 0; s <= a - 1; ++s) {
                        const std::int64_t coeff = binomial(a - i, s);
                        if (coeff == 0) continue;
                        Monomial m;
                        m.coefficient = static_cast<double>(coeff) *
                                        cat.sizes[static_cast<std::size_t>(file)];
                        if (s > 0)
                            m.powers.push_back({p.fraction_id(file), static_cast<double>(s)});
                        m.powers.push_back({p.complement_id(file), static_cast<double>(a - s)});
                        m.powers.push_back({bound, -1.0});
                        std::sort(m.powers.begin(), m.powers.end());
                        c.lhs.terms.push_back(std::move(m));
                    }
                }
                p.constraints.push_back(std::move(c));
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
    }
    return p;
}

/// Monomial condensation of every inverse-sum constraint around the anchor,
/// using the weighted arithmetic-geometric mean bound. The result is a
/// standard GP whose feasible set is contained in the parent CGP's, with
/// constraint values matching the originals exactly at the anchor.
inline GPProblem condense(const GPProblem& problem, const std::vector<double>& anchor_fraction,
                          const std::vector<double>& anchor_complement) {
    if (static_cast<int>(anchor_fraction.size()) != problem.n_files ||
        static_cast<int>(anchor_complement.size()) != problem.n_files)
        throw LengthMismatch("anchor length does not match problem");
    for (int f = 0; f < problem.n_files; ++f)
        if (!(anchor_fraction[static_cast<std::size_t>(f)] > 0.0) ||
            !(anchor_complement[static_cast<std::size_t>(f)] > 0.0))
            throw NonPositiveAnchor("condensation anchors must be strictly positive");

    GPProblem out = problem;
    for (Constraint& c : out.constraints) {
        if (c.kind != ConstraintKind::inverse_sum) continue;
        const int f = problem.variables[c.fraction_var].index;
        const double qa = anchor_fraction[static_cast<std::size_t>(f)];
        const double xa = anchor_complement[static_cast<std::size_t>(f)];
        const double alpha = qa / (qa + xa);
        const double beta = xa / (qa + xa);
        Monomial m;
        m.coefficient = std::pow(qa, alpha) * std::pow(xa, beta) / (qa + xa);
        m.powers.push_back({c.fraction_var, -alpha});
        m.powers.push_back({c.complement_var, -beta});
        std::sort(m.powers.begin(), m.powers.end());
        c.lhs.terms.clear();
        c.lhs.terms.push_back(std::move(m));
        c.kind = ConstraintKind::posynomial;
    }
    return out;
}

}  // namespace dcc::gp
