#include <catch2/catch_amalgamated.hpp>

#include "dcc/experiment.hpp"

using namespace dcc;

namespace {

const char* kSmallConfig = R"({
  "units": "kbit",
  "seed": 7,
  "catalog": {"popularity": [0.7, 0.3], "sizes": [2.0, 1.0]},
  "users": {"k": 2, "p_active": 0.5},
  "m_grid": [1.0],
  "schemes": ["pfsa", "pf", "sf"],
  "simulation": {"f_scale": 1.0, "trials": 200, "seeds": 2}
})";

}  // namespace

TEST_CASE("config parsing and unit conversion", "[experiment]") {
    const ExperimentConfig config = parse_config_text(kSmallConfig);
    CHECK(config.seed == 7);
    CHECK(config.catalog.n_files() == 2);
    CHECK(config.catalog.sizes[0] == Catch::Approx(2000.0));  // kbit to bits
    CHECK(config.m_grid == std::vector<double>{1000.0});
    CHECK(config.users.activity == std::vector<double>{0.5, 0.5});
    REQUIRE(config.simulation.has_value());
    CHECK(config.simulation->trials == 200);

    const ExperimentConfig zipf = parse_config_text(R"({
      "catalog": {"zipf": {"n": 3, "theta": 1.2}, "sizes": 1.0},
      "users": {"k": 1, "p_active": [1.0]},
      "m_grid": [0.5],
      "schemes": ["pfsa"]
    })");
    CHECK(zipf.catalog.n_files() == 3);
    CHECK(zipf.catalog.sizes == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(zipf.catalog.popularity[0] > zipf.catalog.popularity[2]);
}

TEST_CASE("config errors carry field paths", "[experiment]") {
    CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);
    CHECK_THROWS_WITH(parse_config_text(R"({"users": {}, "catalog": {}})"),
                      Catch::Matchers::ContainsSubstring("catalog"));
    CHECK_THROWS_WITH(
        parse_config_text(
            R"({"catalog": {"popularity": [1.0], "sizes": [1.0]},
                "users": {"k": 2, "p_active": [0.5]},
                "m_grid": [1], "schemes": ["pfsa"]})"),
        Catch::Matchers::ContainsSubstring("users.p_active"));
    CHECK_THROWS_WITH(
        parse_config_text(
            R"({"catalog": {"popularity": [1.0], "sizes": [1.0]},
                "users": {"k": 1, "p_active": 0.5},
                "m_grid": [1], "schemes": ["nope"]})"),
        Catch::Matchers::ContainsSubstring("unknown scheme"));
    CHECK_THROWS_WITH(
        parse_config_text(
            R"({"catalog": {"popularity": [1.0], "sizes": [1.0]},
                "users": {"k": 1, "p_active": 0.5},
                "m_grid": [-1], "schemes": ["pfsa"]})"),
        Catch::Matchers::ContainsSubstring("m_grid"));
}

TEST_CASE("experiment run and csv round trip", "[experiment]") {
    const ExperimentConfig config = parse_config_text(kSmallConfig);
    const ResultTable table = run_experiment(config);
    REQUIRE(table.rows.size() == 3);
    // rows sorted by (budget, scheme)
    CHECK(table.rows[0].scheme == "pf");
    CHECK(table.rows[1].scheme == "pfsa");
    CHECK(table.rows[2].scheme == "sf");
    for (const ResultRow& row : table.rows) {
        CHECK(row.avg_rate >= 0.0);
        CHECK(row.n1.has_value());
        CHECK(row.q.size() == 2);
    }

    const std::string csv = emit_csv(table);
    const ResultTable parsed = parse_csv(csv);
    REQUIRE(parsed.rows.size() == table.rows.size());
    CHECK(parsed.n_files == table.n_files);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(parsed.rows[i].scheme == table.rows[i].scheme);
        CHECK(parsed.rows[i].budget == table.rows[i].budget);
        CHECK(parsed.rows[i].avg_rate == table.rows[i].avg_rate);
        CHECK(parsed.rows[i].n1 == table.rows[i].n1);
        CHECK(parsed.rows[i].q == table.rows[i].q);
    }

    // an empty grid produces an empty table and a bare header
    ExperimentConfig empty = config;
    empty.m_grid.clear();
    const ResultTable none = run_experiment(empty);
    CHECK(none.rows.empty());
    CHECK(emit_csv(none).rfind("M,scheme,", 0) == 0);
    CHECK(parse_csv(emit_csv(none)).rows.empty());
}

TEST_CASE("no scheme row undercuts the emitted lower bound", "[experiment]") {
    // the closed-form search can land exactly on the shared optimum while a
    // cold-started bound run stops a step short; the two-phase seeding in
    // run_experiment keeps the emitted bound at or below every scheme row
    ExperimentConfig config = parse_config_text(R"({
      "catalog": {"popularity": [0.7, 0.3], "sizes": [2.0, 1.0]},
      "users": {"k": 2, "p_active": 0.5},
      "m_grid": [1.0, 2.0],
      "schemes": ["gp_dmccs", "gp_dccs", "gp_lb", "pfsa", "pf", "sf"]
    })");
    const ResultTable table = run_experiment(config);
    const CompareSummary summary = compare_report(table);
    CHECK(summary.has_lower_bound);
    for (const CompareEntry& entry : summary.entries) {
        INFO(entry.scheme << " at M=" << entry.budget << " rel_gap " << entry.rel_gap);
        CHECK_FALSE(entry.violation);
    }
    CHECK_FALSE(summary.any_violation);
}

TEST_CASE("multithreaded run matches single-threaded", "[experiment]") {
    ExperimentConfig config = parse_config_text(kSmallConfig);
    config.m_grid = {500.0, 1000.0};
    const ResultTable serial = run_experiment(config, 1);
    const ResultTable parallel = run_experiment(config, 4);
    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].scheme == parallel.rows[i].scheme);
        CHECK(serial.rows[i].avg_rate == parallel.rows[i].avg_rate);
    }
}

TEST_CASE("comparison report", "[experiment]") {
    ResultTable table;
    table.n_files = 1;
    table.rows.push_back({1.0, "gp_lb", 0.50, std::nullopt, 3, 0.1, {0.5}});
    table.rows.push_back({1.0, "pfsa", 0.52, 1, 0, 0.0, {0.5}});
    table.rows.push_back({1.0, "pf", 0.49999995, 1, 0, 0.0, {0.5}});  // below, within tolerance
    const CompareSummary summary = compare_report(table);
    REQUIRE(summary.entries.size() == 2);
    CHECK(summary.has_lower_bound);
    CHECK_FALSE(summary.any_violation);
    CHECK(summary.entries[0].abs_gap == Catch::Approx(0.02));

    // an undercut beyond 1e-6 relative is flagged
    table.rows[2].avg_rate = 0.4999;
    CHECK(compare_report(table).any_violation);

    ResultTable lone;
    lone.n_files = 1;
    lone.rows.push_back({1.0, "pfsa", 0.52, 1, 0, 0.0, {0.5}});
    CHECK_THROWS_AS(compare_report(lone), NeedTwoSchemes);

    const std::string formatted = format_compare(summary);
    CHECK(formatted.find("pfsa") != std::string::npos);
}

TEST_CASE("monte carlo cross-check rows", "[experiment]") {
    ExperimentConfig config = parse_config_text(kSmallConfig);
    config.schemes = {"pfsa"};
    config.simulation->f_scale = 0.01;  // 2000/1000-bit files scale to 20/10 bits
    config.simulation->trials = 400;
    const std::vector<SimulationRow> rows = run_simulation(config);
    REQUIRE(rows.size() == 2);  // one budget, one scheme, two replications
    for (const SimulationRow& row : rows) {
        CHECK(row.trials == 400);
        CHECK(row.analytic > 0.0);
        // crude agreement at tiny file sizes; the acceptance suite does the
        // statistically careful version
        CHECK(std::abs(row.z) < 6.0);
    }
    CHECK(rows[0].seed != rows[1].seed);
    const std::string csv = emit_simulation_csv(rows);
    CHECK(csv.rfind("M,scheme,seed,", 0) == 0);
}
