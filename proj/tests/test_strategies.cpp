#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dcc/strategies.hpp"

using namespace dcc;

namespace {

const std::vector<double> kTable6Popularity = {0.4643, 0.2021, 0.1242,
                                               0.0880, 0.0673, 0.0541};
const std::vector<double> kTable6Sizes = {166.7, 333.3, 500.0, 833.3, 1000.0, 666.7};

FileCatalog table6() { return build_catalog(kTable6Popularity, kTable6Sizes).catalog; }

FileCatalog random_catalog(std::mt19937& rng, int n, bool uniform_sizes) {
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    std::vector<double> p(n), f(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = unit(rng);
        f[i] = uniform_sizes ? 1.0 : unit(rng) * 3.0;
        total += p[i];
    }
    for (double& v : p) v /= total;
    return build_catalog(p, f).catalog;
}

}  // namespace

TEST_CASE("two-group placement", "[strategies]") {
    const FileCatalog cat = table6();

    // the three most popular files sum to exactly 1 kbit
    const TwoGroupPlacement three = pfsa_placement(3, cat, 1000.0);
    CHECK_FALSE(three.cache_underuse);
    for (int i = 0; i < 3; ++i) CHECK(three.placement.q[i] == Catch::Approx(1.0));
    for (int i = 3; i < 6; ++i) CHECK(three.placement.q[i] == 0.0);

    const TwoGroupPlacement all = pfsa_placement(6, cat, cat.total_bits());
    for (double q : all.placement.q) CHECK(q == Catch::Approx(1.0));

    const TwoGroupPlacement empty = pfsa_placement(4, cat, 0.0);
    for (double q : empty.placement.q) CHECK(q == 0.0);
    CHECK_FALSE(empty.cache_underuse);

    // a too-small group cannot absorb the budget
    CHECK(pfsa_placement(1, cat, 1000.0).cache_underuse);
    CHECK_THROWS_AS(pfsa_placement(0, cat, 1.0), OutOfRange);
    CHECK_THROWS_AS(pfsa_placement(7, cat, 1.0), OutOfRange);
}

TEST_CASE("closed-form rate equals the generic evaluation", "[strategies]") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 12; ++round) {
        const int n = 2 + static_cast<int>(rng() % 4);
        const int k = 1 + static_cast<int>(rng() % 3);
        const FileCatalog cat = random_catalog(rng, n, false);
        std::vector<double> activity(k);
        for (double& p : activity) p = unit(rng);
        const UserPopulation users{activity};
        const double budget = unit(rng) * cat.total_bits();
        for (int n1 = 1; n1 <= n; ++n1) {
            const double closed = pfsa_rate_general(n1, cat, users, budget);
            const double generic =
                average_rate(Scheme::dmccs, pfsa_placement(n1, cat, budget).placement.q, cat,
                             users)
                    .average_rate;
            CHECK(closed == Catch::Approx(generic).epsilon(1e-9).margin(1e-12));
        }
    }
}

TEST_CASE("uniform-size counting form equals the general form", "[strategies]") {
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 10; ++round) {
        const int n = 2 + static_cast<int>(rng() % 4);
        const int k = 1 + static_cast<int>(rng() % 3);
        const FileCatalog cat = random_catalog(rng, n, true);
        std::vector<double> activity(k);
        for (double& p : activity) p = unit(rng);
        const UserPopulation users{activity};
        const double budget = unit(rng) * cat.total_bits();
        for (int n1 = 1; n1 <= n; ++n1)
            CHECK(pfsa_rate_uniform_size(n1, cat, users, budget) ==
                  Catch::Approx(pfsa_rate_general(n1, cat, users, budget))
                      .epsilon(1e-12)
                      .margin(1e-15));
    }
    CHECK_THROWS_AS(pfsa_rate_uniform_size(1, random_catalog(rng, 3, false),
                                           UserPopulation{{0.5}}, 1.0),
                    NonuniformSizes);
}

TEST_CASE("uncached boundary rates", "[strategies]") {
    const FileCatalog cat = table6();
    const UserPopulation users{{0.5, 0.5}};
    // full cache: nothing to deliver
    CHECK(pfsa_rate_general(6, cat, users, cat.total_bits()) ==
          Catch::Approx(0.0).margin(1e-12));
    // no cache: expected total size of the distinct requested files
    const double nothing_cached = pfsa_rate_general(6, cat, users, 0.0);
    const double reference =
        average_rate(Scheme::dmccs, std::vector<double>(6, 0.0), cat, users).average_rate;
    CHECK(nothing_cached == Catch::Approx(reference).epsilon(1e-12));
}

TEST_CASE("group-size search", "[strategies]") {
    const FileCatalog single = build_catalog({1.0}, {2.0}).catalog;
    const UserPopulation one_user{{0.8}};
    CHECK(pfsa_search(single, one_user, 1.0).n1 == 1);

    const FileCatalog cat = table6();
    const UserPopulation users{{0.5, 0.5, 0.5}};
    const TwoGroupSearchResult full = pfsa_search(cat, users, cat.total_bits());
    CHECK(full.n1 == 6);
    CHECK(full.rate == Catch::Approx(0.0).margin(1e-12));

    const TwoGroupSearchResult mid = pfsa_search(cat, users, 1000.0);
    // candidates that cannot absorb the budget are skipped
    CHECK(std::isnan(mid.rate_by_n1[0]));
    CHECK(std::isnan(mid.rate_by_n1[1]));
    double best = std::numeric_limits<double>::infinity();
    for (double r : mid.rate_by_n1)
        if (!std::isnan(r)) best = std::min(best, r);
    CHECK(mid.rate == Catch::Approx(best));
    CHECK(mid.rate_by_n1[mid.n1 - 1] == Catch::Approx(mid.rate));
}

TEST_CASE("popularity-first and size-first baselines", "[strategies]") {
    std::mt19937 rng(47);
    const UserPopulation users{{0.5, 0.5}};

    // equal sizes and budget a multiple of the file size: all three coincide
    const FileCatalog uniform = random_catalog(rng, 3, true);
    const double budget = 2.0;  // two files' worth
    const TwoGroupSearchResult pf = pf_baseline(uniform, users, budget);
    const TwoGroupSearchResult sf = sf_baseline(uniform, users, budget);
    const TwoGroupSearchResult pfsa = pfsa_search(uniform, users, budget);
    CHECK(pf.rate == Catch::Approx(pfsa.rate).epsilon(1e-12));
    CHECK(sf.rate == Catch::Approx(pfsa.rate).epsilon(1e-12));

    // the popularity-first allocation is capped by the smallest popular file,
    // so past that point extra budget changes nothing
    const FileCatalog cat = table6();
    const TwoGroupSearchResult pf2 = pf_baseline(cat, users, 2000.0);
    const TwoGroupSearchResult pf3 = pf_baseline(cat, users, 3000.0);
    CHECK(pf2.rate == Catch::Approx(pf3.rate).epsilon(1e-6));

    // baseline placements stay within the budget
    for (const TwoGroupSearchResult* r : {&pf, &sf, &pf2, &pf3}) {
        const FileCatalog& c = r == &pf || r == &sf ? uniform : cat;
        CHECK(validate_placement(r->placement.placement.q, c, r->placement.placement.budget)
                  .ok());
    }
}
