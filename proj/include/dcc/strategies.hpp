#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dcc/combinatorics.hpp"
#include "dcc/errors.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"

namespace dcc {

enum class TwoGroupStrategy { pfsa, pf, sf };

/// A two-group placement: the first `n1` files (in the relevant order) share
/// the cache, the rest are left at the server.
struct TwoGroupPlacement {
    int n1 = 0;
    Placement placement;
    TwoGroupStrategy strategy = TwoGroupStrategy::pfsa;
    // Set when the first n1 files cannot absorb the whole budget (n1 < N);
    // such a split wastes cache and is skipped during the search.
    bool cache_underuse = false;
};

inline bool catalog_has_uniform_sizes(const FileCatalog& cat) {
    for (double f : cat.sizes)
        if (std::abs(f - cat.sizes[0]) > 1e-12 * cat.sizes[0]) return false;
    return true;
}

/// Popularity-first size-aware placement: the n1 most popular files are cached
/// with one common fraction chosen to fill the budget, so a larger popular
/// file gets more cached bits.
inline TwoGroupPlacement pfsa_placement(int n1, const FileCatalog& cat, double budget) {
    const int n = cat.n_files();
    if (n1 < 1 || n1 > n) throw OutOfRange("group size outside 1..N");
    double group_bits = 0.0;
    for (int i = 0; i < n1; ++i) group_bits += cat.sizes[static_cast<std::size_t>(i)];
    const double fraction = std::min(1.0, budget / group_bits);
    TwoGroupPlacement out;
    out.n1 = n1;
    out.strategy = TwoGroupStrategy::pfsa;
    out.cache_underuse = group_bits < budget && n1 < n;
    out.placement.budget = budget;
    out.placement.q.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n1; ++i) out.placement.q[static_cast<std::size_t>(i)] = fraction;
    return out;
}

/// Average rate of the two-group placement evaluated with the closed per-demand
/// form: cached-group messages carry the shared fraction's subfile size with a
/// max over the cached files requested in the subset, and each distinct
/// uncached request costs its full size.
inline double pfsa_rate_general(int n1, const FileCatalog& cat, const UserPopulation& users,
                                double budget) {
    const int n = cat.n_files();
    if (n1 < 1 || n1 > n) throw OutOfRange("group size outside 1..N");
    double group_bits = 0.0;
    for (int i = 0; i < n1; ++i) group_bits += cat.sizes[static_cast<std::size_t>(i)];
    const double fraction = std::min(1.0, budget / group_bits);

    double total = 0.0;
    for (const auto& [mask, set_prob] : enumerate_active_sets(users)) {
        if (mask == 0 || set_prob <= 0.0) continue;
        const int a = __builtin_popcount(mask);
        std::vector<double> fraction_pow(static_cast<std::size_t>(a));
        for (int s = 0; s < a; ++s)
            fraction_pow[static_cast<std::size_t>(s)] =
                ipow(fraction, s) * ipow(1.0 - fraction, a - s);
        for_each_demand(cat, a, [&](const std::vector<int>& demands, double demand_weight) {
            const std::uint32_t leader_mask = detail::leader_mask_of(demands);
            std::uint32_t cached_mask = 0;  // positions requesting a cached file
            for (int i = 0; i < a; ++i)
                if (demands[static_cast<std::size_t>(i)] < n1)
                    cached_mask |= std::uint32_t{1} << i;
            double rate = 0.0;
            for (std::uint32_t sub = 1; sub < (std::uint32_t{1} << a); ++sub) {
                if ((sub & leader_mask) == 0) continue;
                std::uint32_t hit = sub & cached_mask;
                if (hit == 0) continue;
                const int s = __builtin_popcount(sub) - 1;
                double largest = 0.0;
                while (hit != 0) {
                    const int i = __builtin_ctz(hit);
                    hit &= hit - 1;
                    largest = std::max(
                        largest, cat.sizes[static_cast<std::size_t>(
                                     demands[static_cast<std::size_t>(i)])]);
                }
                rate += fraction_pow[static_cast<std::size_t>(s)] * largest;
            }
            // distinct uncached requests are sent in the clear
            for (int i = 0; i < a; ++i) {
                const int file = demands[static_cast<std::size_t>(i)];
                if (file < n1) continue;
                bool seen = false;
                for (int j = 0; j < i; ++j)
                    if (demands[static_cast<std::size_t>(j)] == file) {
                        seen = true;
                        break;
                    }
                if (!seen) rate += cat.sizes[static_cast<std::size_t>(file)];
            }
            total += set_prob * demand_weight * rate;
        });
    }
    return total;
}

/// Counting shortcut for equal file sizes: the number of cached-group
/// messages per subset size has a closed binomial form, so no max or subset
/// scan is needed.
inline double pfsa_rate_uniform_size(int n1, const FileCatalog& cat, const UserPopulation& users,
                                     double budget) {
    const int n = cat.n_files();
    if (n1 < 1 || n1 > n) throw OutOfRange("group size outside 1..N");
    if (!catalog_has_uniform_sizes(cat))
        throw NonuniformSizes("uniform-size rate form needs equal file sizes");
    const double bits = cat.sizes[0];
    const double fraction = std::min(1.0, budget / (static_cast<double>(n1) * bits));

    double total = 0.0;
    for (const auto& [mask, set_prob] : enumerate_active_sets(users)) {
        if (mask == 0 || set_prob <= 0.0) continue;
        const int a = __builtin_popcount(mask);
        std::vector<double> fraction_pow(static_cast<std::size_t>(a));
        for (int s = 0; s < a; ++s)
            fraction_pow[static_cast<std::size_t>(s)] =
                ipow(fraction, s) * ipow(1.0 - fraction, a - s);
        for_each_demand(cat, a, [&](const std::vector<int>& demands, double demand_weight) {
            int n_distinct = 0, n_distinct_uncached = 0, uncached_users = 0;
            for (int i = 0; i < a; ++i) {
                const int file = demands[static_cast<std::size_t>(i)];
                if (file >= n1) ++uncached_users;
                bool seen = false;
                for (int j = 0; j < i; ++j)
                    if (demands[static_cast<std::size_t>(j)] == file) {
                        seen = true;
                        break;
                    }
                if (!seen) {
                    ++n_distinct;
                    if (file >= n1) ++n_distinct_uncached;
                }
            }
            double rate = static_cast<double>(n_distinct_uncached) * bits;
            for (int s = 0; s < a; ++s) {
                std::int64_t count = 0;
                for (int i = 1; i <= n_distinct; ++i) count += binomial(a - i, s);
                for (int i = 1; i <= n_distinct_uncached; ++i)
                    count -= binomial(uncached_users - i, s);
                if (count != 0)
                    rate += static_cast<double>(count) * fraction_pow[static_cast<std::size_t>(s)] *
                            bits;
            }
            total += set_prob * demand_weight * rate;
        });
    }
    return total;
}

struct TwoGroupSearchResult {
    int n1 = 0;
    TwoGroupPlacement placement;
    double rate = 0.0;
    // rate per candidate n1 (1-based offset: index i holds n1 = i+1);
    // NaN marks candidates skipped for cache underuse
    std::vector<double> rate_by_n1;
};

/// Algorithm: evaluate the two-group rate for every admissible n1 and keep the
/// smallest; ties go to the smaller group.
inline TwoGroupSearchResult pfsa_search(const FileCatalog& cat, const UserPopulation& users,
                                        double budget) {
    const int n = cat.n_files();
    const bool uniform = catalog_has_uniform_sizes(cat);
    TwoGroupSearchResult result;
    result.rate_by_n1.assign(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    double prefix_bits = 0.0;
    for (int n1 = 1; n1 <= n; ++n1) {
        prefix_bits += cat.sizes[static_cast<std::size_t>(n1 - 1)];
        if (prefix_bits < budget && n1 < n) continue;  // cache would be underused
        const double rate = uniform ? pfsa_rate_uniform_size(n1, cat, users, budget)
                                    : pfsa_rate_general(n1, cat, users, budget);
        result.rate_by_n1[static_cast<std::size_t>(n1 - 1)] = rate;
        if (rate < best) {
            best = rate;
            result.n1 = n1;
        }
    }
    result.rate = best;
    result.placement = pfsa_placement(result.n1, cat, budget);
    return result;
}

namespace detail {

template <typename BitsFn>
inline TwoGroupSearchResult two_group_baseline(const FileCatalog& cat,
                                               const UserPopulation& users, double budget,
                                               TwoGroupStrategy strategy, BitsFn&& cached_bits) {
    const int n = cat.n_files();
    TwoGroupSearchResult result;
    result.rate_by_n1.assign(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    for (int n1 = 1; n1 <= n; ++n1) {
        std::vector<double> q(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            const double bits = cached_bits(n1, i);
            q[static_cast<std::size_t>(i)] = bits / cat.sizes[static_cast<std::size_t>(i)];
        }
        const double rate = average_rate(Scheme::dmccs, q, cat, users).average_rate;
        result.rate_by_n1[static_cast<std::size_t>(n1 - 1)] = rate;
        if (rate < best) {
            best = rate;
            result.n1 = n1;
            result.placement.n1 = n1;
            result.placement.strategy = strategy;
            result.placement.placement = {q, budget};
            result.placement.cache_underuse = false;
        }
    }
    result.rate = best;
    return result;
}

}  // namespace detail

/// Popularity-first baseline: file n in the popular group gets
/// min(M/n1, min(F_1..F_n)) cached bits. Unused budget is not redistributed.
inline TwoGroupSearchResult pf_baseline(const FileCatalog& cat, const UserPopulation& users,
                                        double budget) {
    const int n = cat.n_files();
    std::vector<double> prefix_min(static_cast<std::size_t>(n));
    double running = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        running = std::min(running, cat.sizes[static_cast<std::size_t>(i)]);
        prefix_min[static_cast<std::size_t>(i)] = running;
    }
    return detail::two_group_baseline(
        cat, users, budget, TwoGroupStrategy::pf, [&](int n1, int file) {
            if (file >= n1) return 0.0;
            return std::min(budget / static_cast<double>(n1),
                            prefix_min[static_cast<std::size_t>(file)]);
        });
}

/// Size-first baseline: the n1 largest files each get min(M/n1, F_n) cached
/// bits. Equal sizes keep their popularity order when ranking by size.
inline TwoGroupSearchResult sf_baseline(const FileCatalog& cat, const UserPopulation& users,
                                        double budget) {
    const int n = cat.n_files();
    std::vector<int> by_size(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) by_size[static_cast<std::size_t>(i)] = i;
    std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
        return cat.sizes[static_cast<std::size_t>(a)] > cat.sizes[static_cast<std::size_t>(b)];
    });
    std::vector<int> size_rank(static_cast<std::size_t>(n));
    for (int rank = 0; rank < n; ++rank)
        size_rank[static_cast<std::size_t>(by_size[static_cast<std::size_t>(rank)])] = rank;
    return detail::two_group_baseline(
        cat, users, budget, TwoGroupStrategy::sf, [&](int n1, int file) {
            if (size_rank[static_cast<std::size_t>(file)] >= n1) return 0.0;
            return std::min(budget / static_cast<double>(n1),
                            cat.sizes[static_cast<std::size_t>(file)]);
        });
}

}  // namespace dcc
