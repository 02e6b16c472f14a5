#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dcc/model.hpp"

using namespace dcc;

namespace {

const std::vector<double> kTable6Popularity = {0.4643, 0.2021, 0.1242,
                                               0.0880, 0.0673, 0.0541};
const std::vector<double> kTable6SizesKbit = {0.1667, 0.3333, 0.5, 0.8333, 1.0, 0.6667};

}  // namespace

TEST_CASE("catalog is sorted by popularity, ties by size", "[model]") {
    const auto bySize = build_catalog({0.2, 0.8}, {1.0, 2.0});
    CHECK(bySize.catalog.popularity == std::vector<double>{0.8, 0.2});
    CHECK(bySize.catalog.sizes == std::vector<double>{2.0, 1.0});
    CHECK(bySize.permutation == std::vector<int>{1, 0});

    const auto tie = build_catalog({0.5, 0.5}, {1.0, 2.0});
    CHECK(tie.catalog.sizes == std::vector<double>{2.0, 1.0});

    // a catalog already in canonical order is accepted unchanged
    const auto canonical = build_catalog(kTable6Popularity, kTable6SizesKbit);
    CHECK(canonical.permutation == std::vector<int>{0, 1, 2, 3, 4, 5});
    for (int i = 0; i < 6; ++i)
        CHECK(canonical.catalog.sizes[i] == Catch::Approx(kTable6SizesKbit[i]));
}

TEST_CASE("catalog construction rejects bad input", "[model]") {
    CHECK_THROWS_AS(build_catalog({0.5, 0.5}, {1.0}), LengthMismatch);
    CHECK_THROWS_AS(build_catalog({}, {}), LengthMismatch);
    CHECK_THROWS_AS(build_catalog({0.5, -0.5}, {1.0, 1.0}), NonPositiveValue);
    CHECK_THROWS_AS(build_catalog({0.5, 0.5}, {1.0, 0.0}), NonPositiveValue);
    CHECK_THROWS_AS(build_catalog({0.6, 0.5}, {1.0, 1.0}), PopularityNotNormalized);

    // mass off by less than 1e-9 is renormalized to exactly one
    const auto nudged = build_catalog({0.5 + 2e-10, 0.5}, {1.0, 1.0});
    double total = 0.0;
    for (double p : nudged.catalog.popularity) total += p;
    CHECK(total == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("catalog construction is idempotent", "[model]") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (int round = 0; round < 25; ++round) {
        const int n = 1 + static_cast<int>(rng() % 8);
        std::vector<double> p(n), f(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            p[i] = unit(rng);
            f[i] = unit(rng) * 10.0;
            total += p[i];
        }
        for (double& v : p) v /= total;
        const auto first = build_catalog(p, f);
        const auto second =
            build_catalog(first.catalog.popularity, first.catalog.sizes);
        CHECK(second.catalog.popularity == first.catalog.popularity);
        CHECK(second.catalog.sizes == first.catalog.sizes);
        CHECK(catalog_is_canonical(first.catalog));
    }
}

TEST_CASE("zipf popularity", "[model]") {
    CHECK(zipf_popularity(1, 1.2) == std::vector<double>{1.0});
    CHECK(zipf_popularity(2, 0.0) == std::vector<double>{0.5, 0.5});

    const std::vector<double> six = zipf_popularity(6, 1.2);
    for (int i = 0; i < 6; ++i)
        CHECK(six[i] == Catch::Approx(kTable6Popularity[i]).margin(5e-5));

    for (double theta : {0.3, 0.56, 1.2, 2.0}) {
        const std::vector<double> p = zipf_popularity(9, theta);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < p.size(); ++i) CHECK(p[i] > p[i + 1]);
        for (double v : p) total += v;
        CHECK(total == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("placement validation", "[model]") {
    const FileCatalog cat = build_catalog({0.5, 0.5}, {2.0, 2.0}).catalog;

    CHECK(validate_placement({0.0, 0.0}, cat, 0.0).ok());
    CHECK(validate_placement({0.0, 0.0}, cat, 5.0).ok());

    const ValidationReport full = validate_placement({1.0, 1.0}, cat, 4.0);
    CHECK(full.ok());
    CHECK(full.budget_used == Catch::Approx(4.0));

    const ValidationReport over = validate_placement({0.5, 0.9}, cat, 2.0);
    REQUIRE_FALSE(over.ok());
    REQUIRE(over.violations.size() == 1);
    CHECK(over.violations[0].constraint == "cache budget");
    CHECK(over.violations[0].excess == Catch::Approx(0.8));

    const ValidationReport bounds = validate_placement({-0.1, 1.2}, cat, 4.0);
    CHECK(bounds.violations.size() == 2);
    CHECK_THROWS_AS(validate_placement({0.5}, cat, 1.0), LengthMismatch);
}

TEST_CASE("valid placements stay valid under downscaling", "[model]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const FileCatalog cat = build_catalog({0.4, 0.3, 0.3}, {3.0, 2.0, 1.0}).catalog;
    for (int round = 0; round < 50; ++round) {
        std::vector<double> q = {unit(rng), unit(rng), unit(rng)};
        double used = 0.0;
        for (int i = 0; i < 3; ++i) used += q[i] * cat.sizes[i];
        const double budget = used * (1.0 + unit(rng));
        REQUIRE(validate_placement(q, cat, budget).ok());
        const double lambda = unit(rng);
        std::vector<double> scaled = q;
        for (double& v : scaled) v *= lambda;
        CHECK(validate_placement(scaled, cat, budget).ok());
    }
}
