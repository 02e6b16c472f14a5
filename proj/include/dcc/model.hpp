#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dcc/errors.hpp"

namespace dcc {

/// File catalog in canonical order: popularity non-increasing, ties broken by
/// non-increasing size, remaining ties by original input position. Sizes are
/// in bits. Popularity sums to one.
struct FileCatalog {
    std::vector<double> popularity;
    std::vector<double> sizes;

    int n_files() const { return static_cast<int>(popularity.size()); }
    double total_bits() const { return std::accumulate(sizes.begin(), sizes.end(), 0.0); }
};

struct UserPopulation {
    std::vector<double> activity;  // per-user probability of being active

    int n_users() const { return static_cast<int>(activity.size()); }
};

/// Per-file caching fractions under a per-user cache budget of `budget` bits.
struct Placement {
    std::vector<double> q;
    double budget = 0.0;
};

/// An active user set together with what each active user requests.
/// `active` is sorted ascending; `demands[i]` is the file index requested by
/// user `active[i]`. User and file indices are 0-based.
struct DemandScenario {
    std::vector<int> active;
    std::vector<int> demands;

    int n_active() const { return static_cast<int>(active.size()); }
    int demand_of(int user) const {
        auto it = std::lower_bound(active.begin(), active.end(), user);
        if (it == active.end() || *it != user) throw OutOfRange("user not in active set");
        return demands[static_cast<std::size_t>(it - active.begin())];
    }
};

inline bool catalog_is_canonical(const FileCatalog& cat) {
    for (std::size_t i = 0; i + 1 < cat.popularity.size(); ++i) {
        if (cat.popularity[i] < cat.popularity[i + 1]) return false;
        if (cat.popularity[i] == cat.popularity[i + 1] && cat.sizes[i] < cat.sizes[i + 1])
            return false;
    }
    return true;
}

struct CatalogBuildResult {
    FileCatalog catalog;
    // permutation[i] = position of canonical file i in the caller's input
    std::vector<int> permutation;
};

/// Sorts (popularity, size) pairs into canonical order and renormalizes the
/// popularity mass. A total popularity off from one by more than 1e-9 is
/// rejected rather than silently rescaled.
inline CatalogBuildResult build_catalog(const std::vector<double>& popularity,
                                        const std::vector<double>& sizes) {
    if (popularity.size() != sizes.size())
        throw LengthMismatch("popularity and size lists differ in length");
    if (popularity.empty()) throw LengthMismatch("catalog must contain at least one file");
    for (double p : popularity)
        if (!(p > 0.0)) throw NonPositiveValue("file popularity must be positive");
    for (double f : sizes)
        if (!(f > 0.0)) throw NonPositiveValue("file size must be positive");

    const double total = std::accumulate(popularity.begin(), popularity.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9)
        throw PopularityNotNormalized("popularity sums to " + std::to_string(total));
    // a mass already within the catalog invariant is kept bit-for-bit, so
    // rebuilding a built catalog reproduces it exactly
    const double scale = std::abs(total - 1.0) <= 1e-12 ? 1.0 : total;

    std::vector<int> order(popularity.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (popularity[a] != popularity[b]) return popularity[a] > popularity[b];
        if (sizes[a] != sizes[b]) return sizes[a] > sizes[b];
        return a < b;
    });

    CatalogBuildResult out;
    out.permutation = order;
    out.catalog.popularity.reserve(popularity.size());
    out.catalog.sizes.reserve(sizes.size());
    for (int idx : order) {
        out.catalog.popularity.push_back(popularity[static_cast<std::size_t>(idx)] / scale);
        out.catalog.sizes.push_back(sizes[static_cast<std::size_t>(idx)]);
    }
    return out;
}

/// Zipf popularity over n files: p_i proportional to (i+1)^-theta.
inline std::vector<double> zipf_popularity(int n, double theta) {
    if (n < 1) throw OutOfRange("zipf_popularity requires n >= 1");
    if (theta < 0.0) throw OutOfRange("zipf_popularity requires theta >= 0");
    std::vector<double> p(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        p[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -theta);
        total += p[static_cast<std::size_t>(i)];
    }
    for (double& v : p) v /= total;
    return p;
}

struct ConstraintViolation {
    std::string constraint;
    int file = -1;       // -1 for the budget constraint
    double excess = 0.0; // amount by which the constraint is exceeded
};

struct ValidationReport {
    std::vector<ConstraintViolation> violations;
    double budget_used = 0.0;

    bool ok() const { return violations.empty(); }
};

/// Checks the per-file fraction bounds and the cache budget. The budget is
/// allowed a relative slack of 1e-9 to absorb solver output.
inline ValidationReport validate_placement(const std::vector<double>& q, const FileCatalog& cat,
                                           double budget) {
    if (static_cast<int>(q.size()) != cat.n_files())
        throw LengthMismatch("placement length does not match catalog");
    ValidationReport report;
    double used = 0.0;
    for (int n = 0; n < cat.n_files(); ++n) {
        const double qn = q[static_cast<std::size_t>(n)];
        if (qn < 0.0) report.violations.push_back({"fraction >= 0", n, -qn});
        if (qn > 1.0) report.violations.push_back({"fraction <= 1", n, qn - 1.0});
        used += qn * cat.sizes[static_cast<std::size_t>(n)];
    }
    report.budget_used = used;
    if (used > budget + 1e-9 * budget)
        report.violations.push_back({"cache budget", -1, used - budget});
    return report;
}

}  // namespace dcc
