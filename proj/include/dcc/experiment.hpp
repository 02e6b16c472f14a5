#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dcc/errors.hpp"
#include "dcc/gp_successive.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"
#include "dcc/simulate.hpp"
#include "dcc/strategies.hpp"

namespace dcc {

struct SimulationSpec {
    double f_scale = 1.0;  // multiplies file sizes to reach bit-level resolution
    int trials = 2000;
    int seeds = 1;  // independent replications per (M, scheme)
};

struct ExperimentConfig {
    FileCatalog catalog;
    UserPopulation users;
    std::vector<double> m_grid;  // bits
    std::vector<std::string> schemes;
    gp::SolverConfig solver;
    std::optional<SimulationSpec> simulation;
    std::uint64_t seed = 0;
};

inline const std::vector<std::string>& known_schemes() {
    static const std::vector<std::string> names = {"gp_dmccs", "gp_lb", "gp_dccs",
                                                   "pfsa",     "pf",    "sf"};
    return names;
}

namespace cfg_detail {

using json = nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

inline double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) fail(path, "expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace cfg_detail

/// Parses a JSON experiment description. Sizes and cache budgets may be given
/// in kbit via `"units": "kbit"`; they are converted to bits here, at the
/// boundary, never inside the library.
inline ExperimentConfig parse_config_text(const std::string& text) {
    using cfg_detail::fail;
    using nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("config", "expected a JSON object");

    double unit_scale = 1.0;
    if (root.contains("units")) {
        const std::string units = root["units"].is_string() ? root["units"].get<std::string>()
                                                            : std::string();
        if (units == "kbit")
            unit_scale = 1000.0;
        else if (units == "bit")
            unit_scale = 1.0;
        else
            fail("units", "expected \"bit\" or \"kbit\"");
    }

    ExperimentConfig out;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_integer()) fail("seed", "expected an integer");
        out.seed = root["seed"].get<std::uint64_t>();
    }

    if (!root.contains("catalog") || !root["catalog"].is_object())
        fail("catalog", "expected an object");
    const json& cat = root["catalog"];
    std::vector<double> popularity;
    int n_files = 0;
    if (cat.contains("popularity")) {
        popularity = cfg_detail::number_list(cat["popularity"], "catalog.popularity");
        n_files = static_cast<int>(popularity.size());
    } else if (cat.contains("zipf")) {
        const json& zipf = cat["zipf"];
        if (!zipf.is_object() || !zipf.contains("n") || !zipf.contains("theta"))
            fail("catalog.zipf", "expected {\"n\": int, \"theta\": number}");
        if (!zipf["n"].is_number_integer() || zipf["n"].get<int>() < 1)
            fail("catalog.zipf.n", "expected a positive integer");
        n_files = zipf["n"].get<int>();
        popularity = zipf_popularity(n_files, cfg_detail::number_at(zipf["theta"],
                                                                    "catalog.zipf.theta"));
    } else {
        fail("catalog", "needs either \"popularity\" or \"zipf\"");
    }
    std::vector<double> sizes;
    if (!cat.contains("sizes")) fail("catalog.sizes", "missing");
    if (cat["sizes"].is_number()) {
        sizes.assign(static_cast<std::size_t>(n_files),
                     cfg_detail::number_at(cat["sizes"], "catalog.sizes"));
    } else {
        sizes = cfg_detail::number_list(cat["sizes"], "catalog.sizes");
    }
    if (static_cast<int>(sizes.size()) != n_files)
        fail("catalog.sizes", "length does not match the number of files");
    for (double& s : sizes) s *= unit_scale;
    try {
        out.catalog = build_catalog(popularity, sizes).catalog;
    } catch (const Error& e) {
        fail("catalog", e.what());
    }

    if (!root.contains("users") || !root["users"].is_object()) fail("users", "expected an object");
    const json& users = root["users"];
    if (!users.contains("k") || !users["k"].is_number_integer() || users["k"].get<int>() < 1)
        fail("users.k", "expected a positive integer");
    const int k = users["k"].get<int>();
    if (!users.contains("p_active")) fail("users.p_active", "missing");
    if (users["p_active"].is_number()) {
        out.users.activity.assign(static_cast<std::size_t>(k),
                                  cfg_detail::number_at(users["p_active"], "users.p_active"));
    } else {
        out.users.activity = cfg_detail::number_list(users["p_active"], "users.p_active");
    }
    if (static_cast<int>(out.users.activity.size()) != k)
        fail("users.p_active", "length does not match k");
    for (double p : out.users.activity)
        if (!(p >= 0.0 && p <= 1.0)) fail("users.p_active", "probabilities must be in [0,1]");

    if (!root.contains("m_grid")) fail("m_grid", "missing");
    out.m_grid = cfg_detail::number_list(root["m_grid"], "m_grid");
    for (double& m : out.m_grid) {
        if (m < 0.0) fail("m_grid", "cache sizes must be nonnegative");
        m *= unit_scale;
    }

    if (!root.contains("schemes")) fail("schemes", "missing");
    if (!root["schemes"].is_array() || root["schemes"].empty())
        fail("schemes", "expected a nonempty array");
    for (const auto& s : root["schemes"]) {
        if (!s.is_string()) fail("schemes", "expected strings");
        const std::string name = s.get<std::string>();
        bool known = false;
        for (const std::string& candidate : known_schemes()) known |= candidate == name;
        if (!known) fail("schemes", "unknown scheme \"" + name + "\"");
        out.schemes.push_back(name);
    }

    if (root.contains("solver")) {
        const json& solver = root["solver"];
        if (!solver.is_object()) fail("solver", "expected an object");
        if (solver.contains("outer_tol"))
            out.solver.outer_tol = cfg_detail::number_at(solver["outer_tol"], "solver.outer_tol");
        if (solver.contains("inner_tol"))
            out.solver.inner_tol = cfg_detail::number_at(solver["inner_tol"], "solver.inner_tol");
        if (solver.contains("max_outer")) out.solver.max_outer = solver["max_outer"].get<int>();
        if (solver.contains("max_inner")) out.solver.max_inner = solver["max_inner"].get<int>();
        if (!(out.solver.outer_tol > 0.0) || !(out.solver.inner_tol > 0.0))
            fail("solver", "tolerances must be positive");
    }

    if (root.contains("simulation")) {
        const json& sim = root["simulation"];
        if (!sim.is_object()) fail("simulation", "expected an object");
        SimulationSpec spec;
        if (sim.contains("f_scale"))
            spec.f_scale = cfg_detail::number_at(sim["f_scale"], "simulation.f_scale");
        if (sim.contains("trials")) spec.trials = sim["trials"].get<int>();
        if (sim.contains("seeds")) spec.seeds = sim["seeds"].get<int>();
        if (!(spec.f_scale > 0.0)) fail("simulation.f_scale", "must be positive");
        if (spec.trials < 1) fail("simulation.trials", "must be at least 1");
        if (spec.seeds < 1) fail("simulation.seeds", "must be at least 1");
        out.simulation = spec;
    }
    return out;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

struct ResultRow {
    double budget = 0.0;
    std::string scheme;
    double avg_rate = 0.0;
    std::optional<int> n1;
    int iterations = 0;
    double seconds = 0.0;
    std::vector<double> q;
};

struct ResultTable {
    int n_files = 0;
    std::vector<ResultRow> rows;
};

namespace run_detail {

inline ResultRow run_one(const ExperimentConfig& config, double budget,
                         const std::string& scheme, std::ostream* progress,
                         const std::vector<double>* seed_q = nullptr) {
    ResultRow row;
    row.budget = budget;
    row.scheme = scheme;
    const auto start = std::chrono::steady_clock::now();
    if (scheme == "gp_dmccs" || scheme == "gp_lb" || scheme == "gp_dccs") {
        gp::SolverConfig solver = config.solver;
        if (seed_q != nullptr) solver.initial_q = *seed_q;
        if (progress != nullptr) {
            solver.progress = [&, scheme, budget](int iter, double rate, double kkt) {
                (*progress) << scheme << " M=" << budget << " iter=" << iter
                            << " rate=" << rate << " kkt=" << kkt << '\n';
            };
        }
        const gp::Target target = scheme == "gp_dmccs" ? gp::Target::p0_dmccs
                                  : scheme == "gp_lb"  ? gp::Target::p3_lower_bound
                                                       : gp::Target::p0_dccs;
        const gp::SuccessiveResult result =
            gp::successive_gp(target, config.catalog, config.users, budget, solver);
        row.avg_rate = result.rate;
        row.iterations = result.outer_iterations;
        row.q = result.q;
    } else if (scheme == "pfsa") {
        const TwoGroupSearchResult result = pfsa_search(config.catalog, config.users, budget);
        row.avg_rate = result.rate;
        row.n1 = result.n1;
        row.q = result.placement.placement.q;
    } else if (scheme == "pf" || scheme == "sf") {
        const TwoGroupSearchResult result = scheme == "pf"
                                                ? pf_baseline(config.catalog, config.users, budget)
                                                : sf_baseline(config.catalog, config.users, budget);
        row.avg_rate = result.rate;
        row.n1 = result.n1;
        row.q = result.placement.placement.q;
    } else {
        throw ConfigError("unknown scheme \"" + scheme + "\"");
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

template <typename Task>
inline void run_pool(int n_tasks, int threads, Task&& task) {
    if (threads <= 1) {
        for (int i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min(threads, n_tasks);
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) task(i);
        });
    for (std::thread& t : pool) t.join();
}

}  // namespace run_detail

/// Runs every (budget, scheme) pair of the configuration and returns the
/// result rows sorted by (budget, scheme). Tasks are independent and may be
/// dispatched to a worker pool. The lower-bound rows run in a second phase,
/// warm-started from the best placement found at the same budget: the
/// per-placement bound never exceeds the delivery rate there, so no scheme
/// row can undercut the emitted gp_lb row beyond solver noise.
inline ResultTable run_experiment(const ExperimentConfig& config, int threads = 1,
                                  std::ostream* progress = nullptr) {
    ResultTable table;
    table.n_files = config.catalog.n_files();
    struct Task {
        double budget;
        std::string scheme;
    };
    std::vector<Task> first, second;
    for (double budget : config.m_grid)
        for (const std::string& scheme : config.schemes)
            (scheme == "gp_lb" ? second : first).push_back({budget, scheme});

    std::exception_ptr failure;
    std::mutex failure_lock;
    auto run_phase = [&](const std::vector<Task>& tasks, std::vector<ResultRow>& rows,
                         auto&& seed_for) {
        rows.resize(tasks.size());
        run_detail::run_pool(static_cast<int>(tasks.size()), threads, [&](int i) {
            try {
                const std::vector<double>* seed = seed_for(tasks[static_cast<std::size_t>(i)]);
                rows[static_cast<std::size_t>(i)] =
                    run_detail::run_one(config, tasks[static_cast<std::size_t>(i)].budget,
                                        tasks[static_cast<std::size_t>(i)].scheme,
                                        threads <= 1 ? progress : nullptr, seed);
            } catch (...) {
                std::lock_guard<std::mutex> hold(failure_lock);
                if (!failure) failure = std::current_exception();
            }
        });
        if (failure) std::rethrow_exception(failure);
    };

    std::vector<ResultRow> first_rows, second_rows;
    run_phase(first, first_rows, [](const Task&) { return nullptr; });
    run_phase(second, second_rows, [&](const Task& task) -> const std::vector<double>* {
        const ResultRow* best = nullptr;
        for (const ResultRow& row : first_rows)
            if (row.budget == task.budget && (best == nullptr || row.avg_rate < best->avg_rate))
                best = &row;
        return best != nullptr ? &best->q : nullptr;
    });

    table.rows = std::move(first_rows);
    table.rows.insert(table.rows.end(), second_rows.begin(), second_rows.end());
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const ResultRow& a, const ResultRow& b) {
                         if (a.budget != b.budget) return a.budget < b.budget;
                         return a.scheme < b.scheme;
                     });
    return table;
}

namespace csv_detail {

inline std::string format_double(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

}  // namespace csv_detail

inline std::string emit_csv(const ResultTable& table) {
    std::ostringstream os;
    os << "M,scheme,avg_rate,n1,iters,seconds";
    for (int f = 0; f < table.n_files; ++f) os << ",q" << f + 1;
    os << '\n';
    for (const ResultRow& row : table.rows) {
        os << csv_detail::format_double(row.budget) << ',' << row.scheme << ','
           << csv_detail::format_double(row.avg_rate) << ',';
        if (row.n1) os << *row.n1;
        os << ',' << row.iterations << ',' << csv_detail::format_double(row.seconds);
        for (int f = 0; f < table.n_files; ++f)
            os << ','
               << csv_detail::format_double(
                      f < static_cast<int>(row.q.size()) ? row.q[static_cast<std::size_t>(f)]
                                                         : 0.0);
        os << '\n';
    }
    return os.str();
}

inline ResultTable parse_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw CsvError("empty input");
    const std::vector<std::string> header = csv_detail::split(line);
    if (header.size() < 6 || header[0] != "M" || header[1] != "scheme")
        throw CsvError("unrecognized header");
    ResultTable table;
    table.n_files = static_cast<int>(header.size()) - 6;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = csv_detail::split(line);
        if (fields.size() != header.size()) throw CsvError("row width does not match header");
        ResultRow row;
        try {
            row.budget = std::stod(fields[0]);
            row.scheme = fields[1];
            row.avg_rate = std::stod(fields[2]);
            if (!fields[3].empty()) row.n1 = std::stoi(fields[3]);
            row.iterations = std::stoi(fields[4]);
            row.seconds = std::stod(fields[5]);
            for (int f = 0; f < table.n_files; ++f)
                row.q.push_back(std::stod(fields[static_cast<std::size_t>(6 + f)]));
        } catch (const std::exception&) {
            throw CsvError("malformed row: " + line);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

struct CompareEntry {
    double budget = 0.0;
    std::string scheme;
    double rate = 0.0;
    double lower_bound = 0.0;
    double abs_gap = 0.0;
    double rel_gap = 0.0;
    bool violation = false;  // scheme undercuts the lower bound beyond tolerance
};

struct CompareSummary {
    std::vector<CompareEntry> entries;
    bool any_violation = false;
    bool has_lower_bound = false;
};

/// Per-budget gaps between each scheme and the computed lower bound, with a
/// flag on any scheme that lands below the bound by more than 1e-6 relative.
inline CompareSummary compare_report(const ResultTable& table) {
    std::vector<std::string> schemes;
    for (const ResultRow& row : table.rows)
        if (std::find(schemes.begin(), schemes.end(), row.scheme) == schemes.end())
            schemes.push_back(row.scheme);
    if (schemes.size() < 2)
        throw NeedTwoSchemes("comparison needs at least two schemes in the table");

    CompareSummary summary;
    for (const ResultRow& row : table.rows) {
        if (row.scheme != "gp_lb") continue;
        summary.has_lower_bound = true;
        for (const ResultRow& other : table.rows) {
            if (other.budget != row.budget || other.scheme == "gp_lb") continue;
            CompareEntry entry;
            entry.budget = other.budget;
            entry.scheme = other.scheme;
            entry.rate = other.avg_rate;
            entry.lower_bound = row.avg_rate;
            entry.abs_gap = other.avg_rate - row.avg_rate;
            entry.rel_gap = row.avg_rate > 0.0 ? entry.abs_gap / row.avg_rate : entry.abs_gap;
            entry.violation = entry.rel_gap < -1e-6;
            summary.any_violation |= entry.violation;
            summary.entries.push_back(std::move(entry));
        }
    }
    return summary;
}

inline std::string format_compare(const CompareSummary& summary) {
    std::ostringstream os;
    if (!summary.has_lower_bound) {
        os << "no gp_lb rows present; nothing to compare against\n";
        return os.str();
    }
    os << "M,scheme,rate,lower_bound,abs_gap,rel_gap,flag\n";
    for (const CompareEntry& e : summary.entries) {
        os << csv_detail::format_double(e.budget) << ',' << e.scheme << ','
           << csv_detail::format_double(e.rate) << ',' << csv_detail::format_double(e.lower_bound)
           << ',' << csv_detail::format_double(e.abs_gap) << ','
           << csv_detail::format_double(e.rel_gap) << ',' << (e.violation ? "VIOLATION" : "ok")
           << '\n';
    }
    return os.str();
}

struct SimulationRow {
    double budget = 0.0;
    std::string scheme;
    std::uint64_t seed = 0;
    double analytic = 0.0;   // exact delivery-scheme average at the placement
    double empirical = 0.0;  // Monte Carlo mean, same units as analytic
    double std_error = 0.0;
    double z = 0.0;
    int trials = 0;
};

/// Bit-level Monte Carlo cross-validation: computes each scheme's placement,
/// scales the catalog to integer bit sizes, and compares the simulated
/// delivery load against the exact average (of the delivery actually
/// simulated, i.e. the modified scheme).
inline std::vector<SimulationRow> run_simulation(const ExperimentConfig& config,
                                                 int threads = 1,
                                                 std::ostream* progress = nullptr) {
    if (!config.simulation)
        throw ConfigError("simulation: block required for the simulate command");
    const SimulationSpec spec = *config.simulation;

    FileCatalog scaled = config.catalog;
    for (double& f : scaled.sizes) {
        f = std::max(1.0, std::round(f * spec.f_scale));
    }

    const ResultTable placements = run_experiment(config, threads, progress);
    std::vector<SimulationRow> rows(placements.rows.size() * static_cast<std::size_t>(spec.seeds));
    run_detail::run_pool(static_cast<int>(rows.size()), threads, [&](int i) {
        const ResultRow& base =
            placements.rows[static_cast<std::size_t>(i) / static_cast<std::size_t>(spec.seeds)];
        const int rep = i % spec.seeds;
        SimulationRow row;
        row.budget = base.budget;
        row.scheme = base.scheme;
        row.trials = spec.trials;
        row.seed = sim::derive_seed(config.seed, 0x51edull, static_cast<std::uint64_t>(rep));
        row.analytic =
            average_rate(Scheme::dmccs, base.q, scaled, config.users).average_rate / spec.f_scale;
        const sim::EmpiricalRate emp =
            sim::empirical_rate(base.q, scaled, config.users, spec.trials, row.seed);
        row.empirical = emp.mean / spec.f_scale;
        row.std_error = emp.std_error / spec.f_scale;
        row.z = row.std_error > 0.0 ? (row.empirical - row.analytic) / row.std_error : 0.0;
        rows[static_cast<std::size_t>(i)] = std::move(row);
    });
    return rows;
}

inline std::string emit_simulation_csv(const std::vector<SimulationRow>& rows) {
    std::ostringstream os;
    os << "M,scheme,seed,analytic,empirical,std_error,z,trials\n";
    for (const SimulationRow& row : rows) {
        os << csv_detail::format_double(row.budget) << ',' << row.scheme << ',' << row.seed << ','
           << csv_detail::format_double(row.analytic) << ','
           << csv_detail::format_double(row.empirical) << ','
           << csv_detail::format_double(row.std_error) << ','
           << csv_detail::format_double(row.z) << ',' << row.trials << '\n';
    }
    return os.str();
}

}  // namespace dcc
