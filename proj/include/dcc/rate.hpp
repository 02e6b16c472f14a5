#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dcc/combinatorics.hpp"
#include "dcc/errors.hpp"
#include "dcc/model.hpp"

namespace dcc {

enum class Scheme { dmccs, dccs, lower_bound };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::dmccs: return "dmccs";
        case Scheme::dccs: return "dccs";
        case Scheme::lower_bound: return "lower_bound";
    }
    return "?";
}

/// x^e by repeated multiplication, with 0^0 = 1 so boundary placements
/// (fraction 0 or 1) evaluate cleanly.
inline double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

/// Expected size in bits of the chunk of a file cached by exactly a given
/// subset of s active users out of A: q^s (1-q)^(A-s) F.
inline double subfile_size(double q, double file_bits, int s, int active_count) {
    if (!(q >= 0.0 && q <= 1.0)) throw OutOfRange("caching fraction outside [0,1]");
    if (s < 0 || s > active_count) throw OutOfRange("subset size outside [0,A]");
    return ipow(q, s) * ipow(1.0 - q, active_count - s) * file_bits;
}

/// Size of the coded message for user subset S: the largest constituent
/// subfile, since shorter subfiles are zero-padded before the XOR.
inline double coded_message_size(const std::vector<int>& subset, const DemandScenario& scenario,
                                 const std::vector<double>& q, const FileCatalog& cat) {
    if (subset.empty()) throw EmptySubset("coded message needs a nonempty subset");
    const int a = scenario.n_active();
    const int s = static_cast<int>(subset.size()) - 1;
    double best = 0.0;
    for (int user : subset) {
        const int file = scenario.demand_of(user);
        best = std::max(best, subfile_size(q[static_cast<std::size_t>(file)],
                                           cat.sizes[static_cast<std::size_t>(file)], s, a));
    }
    return best;
}

namespace detail {

// Per-demand message-size table: sub[i][s] = subfile size of the file
// requested at active position i when cached by s of the a active users.
inline void fill_subfile_table(const std::vector<int>& demands, const std::vector<double>& q,
                               const FileCatalog& cat, int a, std::vector<double>& table) {
    const std::size_t n_pos = demands.size();
    table.assign(n_pos * static_cast<std::size_t>(a), 0.0);
    for (std::size_t i = 0; i < n_pos; ++i) {
        const int file = demands[i];
        const double qf = q[static_cast<std::size_t>(file)];
        const double bits = cat.sizes[static_cast<std::size_t>(file)];
        double qs = 1.0;  // qf^s
        for (int s = 0; s < a; ++s) {
            table[i * static_cast<std::size_t>(a) + static_cast<std::size_t>(s)] =
                qs * ipow(1.0 - qf, a - s) * bits;
            qs *= qf;
        }
    }
}

// Leader bitmask over active positions: lowest position per distinct file.
inline std::uint32_t leader_mask_of(const std::vector<int>& demands) {
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < demands.size(); ++i) {
        bool seen = false;
        for (std::size_t j = 0; j < i; ++j)
            if (demands[j] == demands[i]) {
                seen = true;
                break;
            }
        if (!seen) mask |= std::uint32_t{1} << i;
    }
    return mask;
}

// Sum of max-subfile message sizes over every nonempty subset whose bitmask
// intersects `filter`. Pass an all-ones filter to sum over all subsets.
inline double sum_message_sizes(const std::vector<double>& table, int a, std::uint32_t filter) {
    double total = 0.0;
    for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << a); ++mask) {
        if ((mask & filter) == 0) continue;
        const int s = __builtin_popcount(mask) - 1;
        double best = 0.0;
        std::uint32_t bits = mask;
        while (bits != 0) {
            const int i = __builtin_ctz(bits);
            bits &= bits - 1;
            best = std::max(best,
                            table[static_cast<std::size_t>(i) * static_cast<std::size_t>(a) +
                                  static_cast<std::size_t>(s)]);
        }
        total += best;
    }
    return total;
}

}  // namespace detail

/// Delivery rate of the modified scheme for one demand vector: total bits over
/// the non-redundant groups induced by the given leader group.
inline double rate_mccs_demand(const DemandScenario& scenario, const std::vector<double>& q,
                               const FileCatalog& cat, const LeaderGroup& leaders) {
    const int a = scenario.n_active();
    if (a == 0) return 0.0;
    std::uint32_t leader_mask = 0;
    for (int u : leaders.users) {
        auto it = std::lower_bound(scenario.active.begin(), scenario.active.end(), u);
        if (it == scenario.active.end() || *it != u)
            throw OutOfRange("leader outside active set");
        leader_mask |= std::uint32_t{1} << (it - scenario.active.begin());
    }
    std::vector<double> table;
    detail::fill_subfile_table(scenario.demands, q, cat, a, table);
    return detail::sum_message_sizes(table, a, leader_mask);
}

inline double rate_mccs_demand(const DemandScenario& scenario, const std::vector<double>& q,
                               const FileCatalog& cat) {
    if (scenario.active.empty()) return 0.0;
    return rate_mccs_demand(scenario, q, cat, canonical_leader_group(scenario));
}

/// Delivery rate of the original scheme: coded messages for all nonempty
/// active subsets, redundant ones included.
inline double rate_ccs_demand(const DemandScenario& scenario, const std::vector<double>& q,
                              const FileCatalog& cat) {
    const int a = scenario.n_active();
    if (a == 0) return 0.0;
    std::vector<double> table;
    detail::fill_subfile_table(scenario.demands, q, cat, a, table);
    return detail::sum_message_sizes(table, a, ~std::uint32_t{0});
}

/// Per-demand-type lower bound: the best bijection from rank slots to the
/// distinct requested files, found by exhaustive permutation search. Slot i
/// weights the file's subfile sizes by C(A-i, s).
inline double rate_lb_demand(const DistinctDemand& distinct, const std::vector<double>& q,
                             const FileCatalog& cat, int active_count) {
    const int n_distinct = distinct.n_distinct();
    if (n_distinct < 1) throw OutOfRange("lower bound needs at least one distinct file");
    if (n_distinct > active_count)
        throw OutOfRange("more distinct files than active users");
    if (n_distinct > 8) throw TooManyPermutations("permutation search limited to 8 files");

    // slot_value[f][i-1]: contribution of distinct file f when mapped to slot i
    std::vector<double> slot_value(static_cast<std::size_t>(n_distinct) *
                                   static_cast<std::size_t>(n_distinct));
    for (int f = 0; f < n_distinct; ++f) {
        const int file = distinct.files[static_cast<std::size_t>(f)];
        const double qf = q[static_cast<std::size_t>(file)];
        const double bits = cat.sizes[static_cast<std::size_t>(file)];
        for (int i = 1; i <= n_distinct; ++i) {
            double value = 0.0;
            for (int s = 0; s <= active_count - 1; ++s) {
                const std::int64_t coeff = binomial(active_count - i, s);
                if (coeff == 0) continue;
                value += static_cast<double>(coeff) * ipow(qf, s) *
                         ipow(1.0 - qf, active_count - s) * bits;
            }
            slot_value[static_cast<std::size_t>(f) * static_cast<std::size_t>(n_distinct) +
                       static_cast<std::size_t>(i - 1)] = value;
        }
    }
    std::vector<int> perm(static_cast<std::size_t>(n_distinct));
    for (int i = 0; i < n_distinct; ++i) perm[static_cast<std::size_t>(i)] = i;
    double best = -1.0;
    do {
        double value = 0.0;
        for (int i = 0; i < n_distinct; ++i)
            value += slot_value[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) *
                                    static_cast<std::size_t>(n_distinct) +
                                static_cast<std::size_t>(i)];
        best = std::max(best, value);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct ScenarioRate {
    std::vector<int> active;
    std::vector<int> demands;
    double weight = 0.0;  // Pr(active set) times the demand-vector probability
    double rate = 0.0;
};

struct RateReport {
    Scheme scheme = Scheme::dmccs;
    double average_rate = 0.0;
    std::optional<std::vector<ScenarioRate>> per_scenario;
};

/// Exact average delivery rate: a nested sum over every active set and every
/// demand vector. Nothing is sampled here; randomness lives in the simulator.
inline RateReport average_rate(Scheme scheme, const std::vector<double>& q,
                               const FileCatalog& cat, const UserPopulation& users,
                               bool keep_scenarios = false) {
    const int k = users.n_users();
    const int n = cat.n_files();
    if (static_cast<int>(q.size()) != n) throw LengthMismatch("placement length != catalog");
    if (std::pow(static_cast<double>(n), k) * std::pow(2.0, k) > 1e7)
        throw EnumerationTooLarge("demand space too large for exact enumeration");

    RateReport report;
    report.scheme = scheme;
    if (keep_scenarios) report.per_scenario.emplace();

    // Lower-bound rates depend only on (|A|, distinct file set); memoize per
    // active-set size.
    std::vector<std::map<std::vector<int>, double>> lb_memo(static_cast<std::size_t>(k) + 1);

    double total = 0.0;
    for (const auto& [mask, set_prob] : enumerate_active_sets(users)) {
        if (mask == 0 || set_prob <= 0.0) continue;
        DemandScenario scenario;
        scenario.active = mask_to_users(mask);
        const int a = scenario.n_active();
        for_each_demand(cat, a, [&](const std::vector<int>& demands, double demand_weight) {
            scenario.demands = demands;
            double rate = 0.0;
            switch (scheme) {
                case Scheme::dmccs: rate = rate_mccs_demand(scenario, q, cat); break;
                case Scheme::dccs: rate = rate_ccs_demand(scenario, q, cat); break;
                case Scheme::lower_bound: {
                    DistinctDemand distinct = distinct_demand(scenario);
                    auto& memo = lb_memo[static_cast<std::size_t>(a)];
                    auto it = memo.find(distinct.files);
                    if (it == memo.end())
                        it = memo.emplace(distinct.files, rate_lb_demand(distinct, q, cat, a))
                                 .first;
                    rate = it->second;
                    break;
                }
            }
            total += set_prob * demand_weight * rate;
            if (keep_scenarios)
                report.per_scenario->push_back(
                    {scenario.active, demands, set_prob * demand_weight, rate});
        });
    }
    report.average_rate = total;
    return report;
}

}  // namespace dcc
