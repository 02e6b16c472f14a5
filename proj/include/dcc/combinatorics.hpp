#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dcc/errors.hpp"
#include "dcc/model.hpp"

namespace dcc {

/// Binomial coefficient as an exact 64-bit integer; zero outside 0 <= k <= n.
inline std::int64_t binomial(int n, int k) {
    if (k < 0 || k > n || n < 0) return 0;
    if (n > 62) throw OutOfRange("binomial limited to n <= 62");
    k = std::min(k, n - k);
    std::int64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
    }
    return result;
}

/// All 2^K active sets as (bitmask, probability) pairs in ascending bitmask
/// order. Bit k of the mask marks user k as active. Probabilities are the
/// independent-activity products and sum to one.
inline std::vector<std::pair<std::uint32_t, double>> enumerate_active_sets(
    const UserPopulation& users) {
    const int k = users.n_users();
    if (k > 20) throw TooManyUsers("active-set enumeration limited to 20 users");
    std::vector<std::pair<std::uint32_t, double>> sets;
    sets.reserve(std::size_t{1} << k);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << k); ++mask) {
        double prob = 1.0;
        for (int u = 0; u < k; ++u) {
            const double pa = users.activity[static_cast<std::size_t>(u)];
            prob *= (mask >> u & 1u) ? pa : 1.0 - pa;
        }
        sets.emplace_back(mask, prob);
    }
    return sets;
}

inline std::vector<int> mask_to_users(std::uint32_t mask) {
    std::vector<int> users;
    for (int u = 0; mask != 0; ++u, mask >>= 1)
        if (mask & 1u) users.push_back(u);
    return users;
}

/// The distinct files in a demand vector with their request multiplicities.
struct DistinctDemand {
    std::vector<int> files;         // sorted ascending
    std::vector<int> multiplicity;  // parallel to files

    int n_distinct() const { return static_cast<int>(files.size()); }
};

inline DistinctDemand distinct_demand(const DemandScenario& scenario) {
    DistinctDemand out;
    for (int file : scenario.demands) {
        auto it = std::lower_bound(out.files.begin(), out.files.end(), file);
        if (it != out.files.end() && *it == file) {
            out.multiplicity[static_cast<std::size_t>(it - out.files.begin())] += 1;
        } else {
            const auto pos = it - out.files.begin();
            out.files.insert(it, file);
            out.multiplicity.insert(out.multiplicity.begin() + pos, 1);
        }
    }
    return out;
}

/// Active users whose requests are pairwise distinct and cover every distinct
/// file in the scenario.
struct LeaderGroup {
    std::vector<int> users;  // sorted ascending
};

/// Deterministic leader choice: the lowest-index requester of each distinct
/// file. Any valid leader group would do for the delivery rate; a fixed choice
/// keeps enumeration reproducible.
inline LeaderGroup canonical_leader_group(const DemandScenario& scenario) {
    if (scenario.active.empty()) throw EmptyActiveSet("leader group needs an active user");
    const DistinctDemand distinct = distinct_demand(scenario);
    LeaderGroup leaders;
    for (int file : distinct.files) {
        for (std::size_t i = 0; i < scenario.active.size(); ++i) {
            if (scenario.demands[i] == file) {
                leaders.users.push_back(scenario.active[i]);
                break;
            }
        }
    }
    std::sort(leaders.users.begin(), leaders.users.end());
    return leaders;
}

/// Every nonempty subset of the active set that intersects the leader group,
/// ordered by (size, bitmask). Only these subsets receive coded messages.
inline std::vector<std::vector<int>> nonredundant_groups(const std::vector<int>& active,
                                                         const LeaderGroup& leaders) {
    const int a = static_cast<int>(active.size());
    std::uint32_t leader_mask = 0;
    for (int u : leaders.users) {
        auto it = std::lower_bound(active.begin(), active.end(), u);
        if (it == active.end() || *it != u) throw OutOfRange("leader outside active set");
        leader_mask |= std::uint32_t{1} << (it - active.begin());
    }
    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << a); ++mask)
        if ((mask & leader_mask) != 0) masks.push_back(mask);
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t lhs, std::uint32_t rhs) {
        const int pl = __builtin_popcount(lhs), pr = __builtin_popcount(rhs);
        if (pl != pr) return pl < pr;
        return lhs < rhs;
    });
    std::vector<std::vector<int>> groups;
    groups.reserve(masks.size());
    for (std::uint32_t mask : masks) {
        std::vector<int> group;
        for (int i = 0; i < a; ++i)
            if (mask >> i & 1u) group.push_back(active[static_cast<std::size_t>(i)]);
        groups.push_back(std::move(group));
    }
    return groups;
}

/// Number of non-redundant groups of cardinality s+1 among A active users with
/// n_distinct distinct requests. Both closed forms are evaluated and must
/// agree: C(A,s+1) - C(A-n,s+1) and the sum of C(A-i,s) for i = 1..n.
inline std::int64_t count_nonredundant(int active_count, int n_distinct, int s) {
    if (n_distinct < 1 || n_distinct > active_count || s < 0 || s > active_count - 1)
        throw OutOfRange("count_nonredundant arguments out of range");
    const std::int64_t direct =
        binomial(active_count, s + 1) - binomial(active_count - n_distinct, s + 1);
    std::int64_t summed = 0;
    for (int i = 1; i <= n_distinct; ++i) summed += binomial(active_count - i, s);
    if (direct != summed) throw NumericalBreakdown("non-redundant counting identity failed");
    return direct;
}

/// Calls fn(demands, weight) for every demand vector in {0..N-1}^A, where the
/// weight is the product of the requested files' popularities. Iteration is in
/// ascending odometer order with the last position fastest.
template <typename Fn>
inline void for_each_demand(const FileCatalog& cat, int active_count, Fn&& fn) {
    const int n = cat.n_files();
    std::vector<int> demands(static_cast<std::size_t>(active_count), 0);
    while (true) {
        double weight = 1.0;
        for (int d : demands) weight *= cat.popularity[static_cast<std::size_t>(d)];
        fn(demands, weight);
        int pos = active_count - 1;
        while (pos >= 0) {
            if (++demands[static_cast<std::size_t>(pos)] < n) break;
            demands[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
}

}  // namespace dcc
