#include "qchain/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace qchain {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "qchain 0.1.0";

std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + 0x5bd1e9955bd1e995ULL));
}

template <typename T>
T get_or(const json& config, const char* key, T fallback) {
    if (!config.contains(key) || config.at(key).is_null()) return fallback;
    try {
        return config.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key +
                          "' has the wrong type");
    }
}

std::optional<double> optional_cutoff(const json& config, const char* key,
                                      std::optional<double> fallback) {
    if (!config.contains(key)) return fallback;
    if (config.at(key).is_null()) return std::nullopt;
    const double value = config.at(key).get<double>();
    if (value <= 0.0) throw ConfigError("cutoff must be > 0 (or null for none)");
    return value;
}

struct Timer {
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void finish(SweepResult& result, const json& config, const Timer& timer) {
    result.metadata["experiment"] = result.experiment;
    result.metadata["version"] = kVersion;
    result.metadata["config"] = config;
    result.metadata["wall_time_s"] = timer.seconds();
    result.metadata["rows"] = result.rows.size();
}

std::string protocol_name(Protocol p) {
    return p == Protocol::sequential ? "sequential" : "parallel";
}

std::vector<Protocol> protocols_from_config(const json& config,
                                            const std::string& fallback) {
    const std::string which = get_or<std::string>(config, "protocol", fallback);
    if (which == "sequential") return {Protocol::sequential};
    if (which == "parallel") return {Protocol::parallel};
    if (which == "both") return {Protocol::sequential, Protocol::parallel};
    throw ConfigError("protocol must be sequential, parallel or both");
}

// auto = closed forms for sequential chains, Monte Carlo otherwise.
Engine pick_engine(const json& config, Protocol protocol) {
    const std::string name = get_or<std::string>(config, "engine", "auto");
    if (name == "auto")
        return protocol == Protocol::sequential ? Engine::analytic : Engine::mc;
    return engine_from_string(name);
}

EvalOptions eval_options(const json& config, Protocol protocol,
                         std::uint64_t seed) {
    EvalOptions options;
    options.engine = pick_engine(config, protocol);
    options.seed = seed;
    options.n_samples = get_or<std::uint64_t>(config, "n_samples", 100000);
    options.classical_delay = get_or<bool>(config, "classical_delay", true);
    return options;
}

std::vector<double> grid_from_config(const json& config, const char* key,
                                     std::vector<double> fallback) {
    auto grid = get_or<std::vector<double>>(config, key, std::move(fallback));
    if (grid.empty()) throw ConfigError(std::string(key) + " must be non-empty");
    return grid;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        grid.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(n - 1));
    return grid;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
    std::vector<double> grid;
    grid.reserve(n);
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        grid.push_back(std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                          static_cast<double>(n - 1)));
    return grid;
}

struct CutoffScan {
    double best_cutoff = 0.0;
    double best_skr = 0.0;
    bool any_feasible = false;
};

// Argmax over the grid; equal SKRs resolve to the lowest cutoff.
CutoffScan scan_cutoffs(ChainSpec chain, Protocol protocol,
                        const EvalOptions& options,
                        const std::vector<double>& grid) {
    CutoffScan scan;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        chain.cutoff_s = grid[i];
        EvalOptions cell = options;
        cell.seed = cell_seed(options.seed, i);
        const PerformanceReport report = evaluate_chain(chain, protocol, cell);
        if (report.infeasible_cutoff) continue;
        scan.any_feasible = true;
        if (report.skr_hz > scan.best_skr) {
            scan.best_skr = report.skr_hz;
            scan.best_cutoff = grid[i];
        } else if (scan.best_skr == 0.0 && scan.best_cutoff == 0.0) {
            scan.best_cutoff = grid[i];
        }
    }
    return scan;
}

}  // namespace

Engine engine_from_string(std::string_view s) {
    if (s == "analytic") return Engine::analytic;
    if (s == "mc") return Engine::mc;
    if (s == "des") return Engine::des;
    throw ConfigError("engine must be analytic, mc or des");
}

Protocol protocol_from_string(std::string_view s) {
    if (s == "sequential") return Protocol::sequential;
    if (s == "parallel") return Protocol::parallel;
    throw ConfigError("protocol must be sequential or parallel");
}

PerformanceReport evaluate_chain(const ChainSpec& chain, Protocol protocol,
                                 const EvalOptions& options) {
    switch (options.engine) {
        case Engine::analytic:
            if (protocol != Protocol::sequential)
                throw ConfigError(
                    "the analytic engine only covers the sequential protocol");
            if (!options.classical_delay)
                throw ConfigError(
                    "the analytic engine models classical delay as present");
            return evaluate_sequential(chain);
        case Engine::mc: {
            McConfig config;
            config.n_samples = options.n_samples;
            config.seed = options.seed;
            config.classical_delay = options.classical_delay;
            config.abort_policy = options.abort_policy;
            return estimate(chain, protocol, config);
        }
        case Engine::des: {
            DesConfig config;
            config.seed = options.seed;
            config.classical_delay = options.classical_delay;
            config.abort_policy = options.abort_policy;
            return run_des(chain, protocol, config, options.n_samples);
        }
    }
    throw ConfigError("unknown engine");
}

std::vector<double> cutoff_search_grid(const ChainSpec& chain,
                                       std::size_t per_link_multiples,
                                       std::size_t log_points) {
    double cap = 0.0;
    double min_step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < chain.link_count(); ++i) {
        const double tau = chain.tau_s(i);
        const double p = link_success_prob(chain.links[i], chain.alpha_per_km);
        cap = std::max(cap, 10.0 * 2.0 * tau / std::max(p, 1e-12));
        min_step = std::min(min_step, 2.0 * tau);
    }
    std::set<double> grid;
    for (std::size_t i = 0; i < chain.link_count(); ++i) {
        const double step = 2.0 * chain.tau_s(i);
        for (std::size_t k = 1; k <= per_link_multiples; ++k) {
            const double value = step * static_cast<double>(k);
            if (value <= cap) grid.insert(value);
        }
    }
    for (double value : logspace(min_step, cap, log_points)) grid.insert(value);
    return {grid.begin(), grid.end()};
}

std::vector<double> default_positions(double l_e2e_km, std::size_t count) {
    std::vector<double> positions;
    positions.reserve(count);
    for (std::size_t i = 1; i <= count; ++i)
        positions.push_back(l_e2e_km * static_cast<double>(i) /
                            static_cast<double>(count + 1));
    return positions;
}

std::vector<double> sample_placement(double total_km, std::size_t n_repeaters,
                                     double min_spacing_km, Rng& rng) {
    const std::size_t gaps = n_repeaters + 1;
    const double slack = total_km - min_spacing_km * static_cast<double>(gaps);
    if (slack < 0.0)
        throw ConfigError("min spacing leaves no room for the repeaters");
    // Uniform over the constrained simplex: sorted uniforms on the slack.
    std::vector<double> cuts(n_repeaters);
    for (double& c : cuts) c = rng.uniform01() * slack;
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> positions(n_repeaters);
    for (std::size_t i = 0; i < n_repeaters; ++i)
        positions[i] = cuts[i] + min_spacing_km * static_cast<double>(i + 1);
    return positions;
}

namespace {

std::vector<double> segment_lengths(double total_km,
                                    const std::vector<double>& positions) {
    std::vector<double> lengths;
    lengths.reserve(positions.size() + 1);
    double previous = 0.0;
    for (double x : positions) {
        lengths.push_back(x - previous);
        previous = x;
    }
    lengths.push_back(total_km - previous);
    return lengths;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

SweepResult one_repeater_sweep(const json& config) {
    Timer timer;
    const double l_e2e = get_or<double>(config, "l_e2e_km", 200.0);
    const double tau_coh = get_or<double>(config, "tau_coh_s", 0.1);
    const auto cutoff = optional_cutoff(config, "cutoff_s", 0.05);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto positions = grid_from_config(config, "positions_km",
                                            default_positions(l_e2e, 19));
    for (double x : positions)
        if (!(x > 0.0 && x < l_e2e))
            throw ConfigError("repeater position outside (0, L)");

    SweepResult result;
    result.experiment = "one_repeater_sweep";
    result.columns = {"position_km", "scheme",        "ebit_rate_hz",
                      "skr_hz",      "fidelity_e2e",  "stderr_rate"};

    const ChainSpec direct = [&] {
        ChainSpec c = make_chain({l_e2e}, tau_coh);
        return c;
    }();
    const PerformanceReport direct_report = evaluate_sequential(direct);

    struct Row {
        double x;
        std::string scheme;
        PerformanceReport report;
    };
    std::vector<Row> rows(positions.size() * 2);
    parallel_for(positions.size(), [&](std::size_t i) {
        const double x = positions[i];
        ChainSpec chain = make_chain({x, l_e2e - x}, tau_coh, cutoff);
        EvalOptions seq = eval_options(config, Protocol::sequential,
                                       cell_seed(seed, 2 * i));
        EvalOptions par = eval_options(config, Protocol::parallel,
                                       cell_seed(seed, 2 * i + 1));
        rows[2 * i] = Row{x, "sequential",
                          evaluate_chain(chain, Protocol::sequential, seq)};
        rows[2 * i + 1] =
            Row{x, "parallel", evaluate_chain(chain, Protocol::parallel, par)};
    });
    for (const Row& row : rows) {
        result.rows.push_back({format_cell(row.x), row.scheme,
                               format_cell(row.report.ebit_rate_hz),
                               format_cell(row.report.skr_hz),
                               format_cell(row.report.fidelity_e2e),
                               format_cell(row.report.stderr_rate)});
    }
    for (double x : positions) {
        result.rows.push_back({format_cell(x), "direct",
                               format_cell(direct_report.ebit_rate_hz),
                               format_cell(direct_report.skr_hz),
                               format_cell(direct_report.fidelity_e2e),
                               format_cell(0.0)});
    }
    finish(result, config, timer);
    return result;
}

SweepResult cutoff_sweep(const json& config) {
    Timer timer;
    const std::size_t n_rep = get_or<std::size_t>(config, "n_repeaters", 7);
    const double tau_coh = get_or<double>(config, "tau_coh_s", 0.003);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto lengths =
        grid_from_config(config, "l_e2e_km", {200.0, 300.0, 400.0});
    const auto protocols = protocols_from_config(config, "sequential");

    SweepResult result;
    result.experiment = "cutoff_sweep";
    result.columns = {"l_e2e_km", "protocol",      "cutoff_s",
                      "skr_hz",   "ebit_rate_hz",  "fidelity_e2e"};
    std::uint64_t cell = 0;
    for (double l : lengths) {
        ChainSpec chain = make_uniform_chain(l, n_rep, tau_coh);
        const auto grid = get_or<std::vector<double>>(
            config, "cutoffs_s", cutoff_search_grid(chain));
        for (Protocol protocol : protocols) {
            // No-cutoff reference row first.
            chain.cutoff_s.reset();
            EvalOptions options =
                eval_options(config, protocol, cell_seed(seed, cell++));
            PerformanceReport reference =
                evaluate_chain(chain, protocol, options);
            result.rows.push_back(
                {format_cell(l), protocol_name(protocol), "inf",
                 format_cell(reference.skr_hz),
                 format_cell(reference.ebit_rate_hz),
                 format_cell(reference.fidelity_e2e)});
            for (double tau_cut : grid) {
                chain.cutoff_s = tau_cut;
                EvalOptions opt =
                    eval_options(config, protocol, cell_seed(seed, cell++));
                const PerformanceReport report =
                    evaluate_chain(chain, protocol, opt);
                result.rows.push_back({format_cell(l), protocol_name(protocol),
                                       format_cell(tau_cut),
                                       format_cell(report.skr_hz),
                                       format_cell(report.ebit_rate_hz),
                                       format_cell(report.fidelity_e2e)});
            }
        }
    }
    finish(result, config, timer);
    return result;
}

SweepResult opt_skr_heatmap(const json& config) {
    Timer timer;
    const std::size_t n_rep = get_or<std::size_t>(config, "n_repeaters", 7);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto l_grid =
        grid_from_config(config, "l_grid_km", linspace(100.0, 500.0, 17));
    const auto tau_grid = grid_from_config(config, "tau_coh_grid_s",
                                           logspace(1e-4, 1.0, 13));
    const auto protocols = protocols_from_config(config, "sequential");

    SweepResult result;
    result.experiment = "opt_skr_heatmap";
    result.columns = {"L_km", "tau_coh_s", "best_cutoff_s", "skr_hz", "regime"};

    struct Cell {
        double l, tau_coh;
        Protocol protocol;
        CutoffScan scan;
        double nocut_skr;
    };
    std::vector<Cell> cells;
    for (Protocol protocol : protocols)
        for (double l : l_grid)
            for (double tau_coh : tau_grid)
                cells.push_back(Cell{l, tau_coh, protocol, {}, 0.0});

    parallel_for(cells.size(), [&](std::size_t i) {
        Cell& cell = cells[i];
        ChainSpec chain = make_uniform_chain(cell.l, n_rep, cell.tau_coh);
        EvalOptions options =
            eval_options(config, cell.protocol, cell_seed(seed, i));
        cell.nocut_skr =
            evaluate_chain(chain, cell.protocol, options).skr_hz;
        cell.scan = scan_cutoffs(chain, cell.protocol, options,
                                 cutoff_search_grid(chain));
    });

    bool any_feasible = false;
    for (const Cell& cell : cells) {
        const bool cut_ok = cell.scan.best_skr > 0.0;
        const bool nocut_ok = cell.nocut_skr > 0.0;
        const std::string regime = nocut_ok          ? "feasible_nocut"
                                   : cut_ok          ? "cutoff_only"
                                                     : "infeasible";
        any_feasible = any_feasible || cut_ok || nocut_ok;
        result.rows.push_back({format_cell(cell.l), format_cell(cell.tau_coh),
                               format_cell(cell.scan.best_cutoff),
                               format_cell(cell.scan.best_skr), regime});
    }
    result.all_infeasible = !any_feasible;
    finish(result, config, timer);
    return result;
}

SweepResult feasible_region(const json& config) {
    Timer timer;
    const std::size_t n_rep = get_or<std::size_t>(config, "n_repeaters", 7);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto l_grid =
        grid_from_config(config, "l_grid_km", linspace(100.0, 500.0, 9));
    const double tau_lo = get_or<double>(config, "tau_coh_lo_s", 1e-5);
    const double tau_hi = get_or<double>(config, "tau_coh_hi_s", 10.0);
    std::vector<std::vector<double>> triples = get_or<std::vector<std::vector<double>>>(
        config, "triples",
        {{1.0, 1.0, 1.0}, {0.99, 1.0, 1.0}, {1.0, 0.99, 1.0}, {1.0, 1.0, 0.99}});
    const auto protocols = protocols_from_config(config, "sequential");

    SweepResult result;
    result.experiment = "feasible_region";
    result.columns = {"F",    "mu",          "p_link", "protocol",
                      "cutoff_mode", "L_km", "min_tau_coh_s"};

    struct Cell {
        double f, mu, p_link, l;
        Protocol protocol;
        bool with_cutoff;
        double boundary;
    };
    std::vector<Cell> cells;
    for (const auto& triple : triples) {
        if (triple.size() != 3)
            throw ConfigError("each feasibility triple is [F, mu, p_link]");
        for (Protocol protocol : protocols)
            for (bool with_cutoff : {false, true})
                for (double l : l_grid)
                    cells.push_back(Cell{triple[0], triple[1], triple[2], l,
                                         protocol, with_cutoff, 0.0});
    }

    parallel_for(cells.size(), [&](std::size_t i) {
        Cell& cell = cells[i];
        ChainSpec base = make_uniform_chain(cell.l, n_rep, 1.0);
        for (LinkSpec& link : base.links) {
            link.fidelity = cell.f;
            link.mu_link = cell.mu;
            link.p_link = cell.p_link;
        }
        base.mu_swap = cell.mu;
        EvalOptions options =
            eval_options(config, cell.protocol, cell_seed(seed, i));
        const std::vector<double> grid =
            cell.with_cutoff ? cutoff_search_grid(base) : std::vector<double>{};

        auto feasible = [&](double tau_coh) {
            ChainSpec chain = base;
            chain.tau_coh_s = tau_coh;
            if (!cell.with_cutoff) {
                chain.cutoff_s.reset();
                return evaluate_chain(chain, cell.protocol, options).skr_hz >
                       0.0;
            }
            return scan_cutoffs(chain, cell.protocol, options, grid).best_skr >
                   0.0;
        };

        // Bisect the monotone feasibility boundary in log(tau_coh).
        if (!feasible(tau_hi)) {
            cell.boundary = std::numeric_limits<double>::infinity();
            return;
        }
        if (feasible(tau_lo)) {
            cell.boundary = tau_lo;
            return;
        }
        double lo = std::log(tau_lo), hi = std::log(tau_hi);
        for (int iter = 0; iter < 40; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (feasible(std::exp(mid)))
                hi = mid;
            else
                lo = mid;
        }
        cell.boundary = std::exp(hi);
    });

    for (const Cell& cell : cells) {
        result.rows.push_back({format_cell(cell.f), format_cell(cell.mu),
                               format_cell(cell.p_link),
                               protocol_name(cell.protocol),
                               cell.with_cutoff ? "cutoff" : "nocut",
                               format_cell(cell.l), format_cell(cell.boundary)});
    }
    finish(result, config, timer);
    return result;
}

SweepResult cc_delay_compare(const json& config) {
    Timer timer;
    const std::size_t n_rep = get_or<std::size_t>(config, "n_repeaters", 7);
    const double tau_coh = get_or<double>(config, "tau_coh_s", 0.1);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto l_grid =
        grid_from_config(config, "l_grid_km", linspace(100.0, 600.0, 11));
    const auto cutoff = optional_cutoff(config, "cutoff_s", std::nullopt);
    const auto protocols = protocols_from_config(config, "both");

    SweepResult result;
    result.experiment = "cc_delay_compare";
    result.columns = {"l_e2e_km",     "protocol", "classical_delay",
                      "ebit_rate_hz", "skr_hz",   "fidelity_e2e",
                      "stderr_rate"};

    struct Cell {
        double l;
        Protocol protocol;
        bool delay;
        PerformanceReport report;
    };
    std::vector<Cell> cells;
    for (double l : l_grid)
        for (Protocol protocol : protocols)
            for (bool delay : {true, false})
                cells.push_back(Cell{l, protocol, delay, {}});

    parallel_for(cells.size(), [&](std::size_t i) {
        Cell& cell = cells[i];
        ChainSpec chain = make_uniform_chain(cell.l, n_rep, tau_coh, cutoff);
        // Same seed for the on/off pair: per-sample dominance is exact.
        EvalOptions options = eval_options(config, cell.protocol,
                                           cell_seed(seed, i / 2));
        options.engine = pick_engine(config, cell.protocol);
        if (options.engine == Engine::analytic) options.engine = Engine::mc;
        options.classical_delay = cell.delay;
        cell.report = evaluate_chain(chain, cell.protocol, options);
    });

    for (const Cell& cell : cells) {
        result.rows.push_back(
            {format_cell(cell.l), protocol_name(cell.protocol),
             cell.delay ? "on" : "off", format_cell(cell.report.ebit_rate_hz),
             format_cell(cell.report.skr_hz),
             format_cell(cell.report.fidelity_e2e),
             format_cell(cell.report.stderr_rate)});
    }
    finish(result, config, timer);
    return result;
}

SweepResult random_placement(const json& config) {
    Timer timer;
    const double l_e2e = get_or<double>(config, "l_e2e_km", 200.0);
    const std::size_t n_rep = get_or<std::size_t>(config, "n_repeaters", 5);
    const double spacing = get_or<double>(config, "min_spacing_km", 5.0);
    const double tau_coh = get_or<double>(config, "tau_coh_s", 0.1);
    const auto cutoff = optional_cutoff(config, "cutoff_s", 0.05);
    const std::size_t n_placements =
        get_or<std::size_t>(config, "n_placements", 500);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);

    SweepResult result;
    result.experiment = "random_placement";
    result.columns = {"placement", "protocol",     "cutoff_s", "ebit_rate_hz",
                      "skr_hz",    "fidelity_e2e", "positions_km"};

    std::vector<std::vector<double>> placements(n_placements);
    Rng placement_rng(mix64(seed ^ 0x706c6163656d656eULL));
    for (auto& p : placements)
        p = sample_placement(l_e2e, n_rep, spacing, placement_rng);

    struct Cell {
        PerformanceReport report;
    };
    std::vector<Cell> cells(n_placements * 4);
    parallel_for(n_placements, [&](std::size_t i) {
        const auto lengths = segment_lengths(l_e2e, placements[i]);
        std::size_t slot = 4 * i;
        for (Protocol protocol : {Protocol::sequential, Protocol::parallel}) {
            for (bool with_cutoff : {false, true}) {
                ChainSpec chain = make_chain(
                    lengths, tau_coh,
                    with_cutoff ? cutoff : std::optional<double>{});
                EvalOptions options =
                    eval_options(config, protocol, cell_seed(seed, slot));
                cells[slot].report = evaluate_chain(chain, protocol, options);
                ++slot;
            }
        }
    });

    for (std::size_t i = 0; i < n_placements; ++i) {
        std::string positions;
        for (double x : placements[i]) {
            if (!positions.empty()) positions += ';';
            positions += format_cell(x);
        }
        std::size_t slot = 4 * i;
        for (Protocol protocol : {Protocol::sequential, Protocol::parallel}) {
            for (bool with_cutoff : {false, true}) {
                const PerformanceReport& report = cells[slot++].report;
                result.rows.push_back(
                    {std::to_string(i), protocol_name(protocol),
                     with_cutoff && cutoff ? format_cell(*cutoff) : "inf",
                     format_cell(report.ebit_rate_hz),
                     format_cell(report.skr_hz),
                     format_cell(report.fidelity_e2e), positions});
            }
        }
    }

    // Histogram bins over the SKR, per protocol and cutoff mode.
    ordered_json histograms = ordered_json::object();
    double max_skr = 0.0;
    for (const Cell& cell : cells) max_skr = std::max(max_skr, cell.report.skr_hz);
    const std::size_t n_bins = 30;
    for (Protocol protocol : {Protocol::sequential, Protocol::parallel}) {
        for (bool with_cutoff : {false, true}) {
            std::vector<std::size_t> bins(n_bins, 0);
            for (std::size_t i = 0; i < n_placements; ++i) {
                const std::size_t slot =
                    4 * i + (protocol == Protocol::parallel ? 2 : 0) +
                    (with_cutoff ? 1 : 0);
                const double skr = cells[slot].report.skr_hz;
                const std::size_t bin = max_skr > 0.0
                        ? std::min(n_bins - 1, static_cast<std::size_t>(
                                                   skr / max_skr * n_bins))
                        : 0;
                ++bins[bin];
            }
            histograms[protocol_name(protocol) +
                       (with_cutoff ? "_cutoff" : "_nocut")] = bins;
        }
    }
    histograms["bin_upper_skr_hz"] = max_skr;
    result.metadata["skr_histograms"] = histograms;
    finish(result, config, timer);
    return result;
}

SweepResult topology_study(const json& config) {
    Timer timer;
    const std::string path =
        get_or<std::string>(config, "graphml", "data/Surfnet.graphml");
    const double length_scale = get_or<double>(config, "length_scale", 1.0);
    const double min_km = get_or<double>(config, "min_km", 50.0);
    const double max_km = get_or<double>(config, "max_km", 350.0);
    const std::size_t min_rep = get_or<std::size_t>(config, "min_repeaters", 2);
    const std::size_t pair_count = get_or<std::size_t>(config, "pair_count", 900);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const auto tau_grid = grid_from_config(config, "tau_coh_grid_s",
                                           {0.003, 0.01, 0.03, 0.1});
    const auto protocols = protocols_from_config(config, "sequential");

    const NetworkGraph graph = load_graphml(path, length_scale);
    const PairSelection selection =
        select_user_pairs(graph, min_km, max_km, min_rep, pair_count, seed);

    ChainDefaults defaults;
    defaults.p_link = get_or<double>(config, "p_link", 1.0);
    defaults.fidelity = get_or<double>(config, "fidelity", 1.0);
    defaults.mu_link = get_or<double>(config, "mu", 1.0);
    defaults.mu_swap = get_or<double>(config, "mu", 1.0);

    SweepResult result;
    result.experiment = "topology_study";
    result.columns = {"tau_coh_s",     "protocol",   "src",
                      "dst",           "path_km",    "n_repeaters",
                      "best_cutoff_s", "skr_opt_hz", "skr_nocut_hz",
                      "skr_avgcut_hz"};

    struct PairCell {
        CutoffScan scan;
        double nocut = 0.0;
        double avgcut = 0.0;
    };
    ordered_json aggregates = ordered_json::array();
    std::uint64_t cell_index = 0;
    for (Protocol protocol : protocols) {
        for (double tau_coh : tau_grid) {
            ChainDefaults d = defaults;
            d.tau_coh_s = tau_coh;
            std::vector<PairCell> cells(selection.pairs.size());
            const std::uint64_t base = cell_index;
            cell_index += selection.pairs.size();
            parallel_for(selection.pairs.size(), [&](std::size_t i) {
                ChainSpec chain =
                    chain_from_pair(graph, selection.pairs[i], d);
                EvalOptions options = eval_options(
                    config, protocol, cell_seed(seed, base + i));
                cells[i].nocut =
                    evaluate_chain(chain, protocol, options).skr_hz;
                cells[i].scan = scan_cutoffs(chain, protocol, options,
                                             cutoff_search_grid(chain));
            });

            // Network-wide average of the per-pair optimal cutoffs, then
            // every pair re-evaluated at that shared cutoff.
            double cutoff_sum = 0.0;
            std::size_t cutoff_n = 0;
            std::vector<double> best_cutoffs;
            for (const PairCell& cell : cells) {
                if (cell.scan.best_skr > 0.0) {
                    cutoff_sum += cell.scan.best_cutoff;
                    ++cutoff_n;
                    best_cutoffs.push_back(cell.scan.best_cutoff);
                }
            }
            const double avg_cutoff =
                cutoff_n > 0 ? cutoff_sum / static_cast<double>(cutoff_n) : 0.0;
            parallel_for(selection.pairs.size(), [&](std::size_t i) {
                if (avg_cutoff <= 0.0) return;
                ChainSpec chain =
                    chain_from_pair(graph, selection.pairs[i], d);
                chain.cutoff_s = avg_cutoff;
                EvalOptions options = eval_options(
                    config, protocol, cell_seed(seed, base + i));
                cells[i].avgcut =
                    evaluate_chain(chain, protocol, options).skr_hz;
            });

            double mean_opt = 0.0, mean_nocut = 0.0, mean_avgcut = 0.0;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const PairCell& cell = cells[i];
                const UserPair& pair = selection.pairs[i];
                mean_opt += cell.scan.best_skr;
                mean_nocut += cell.nocut;
                mean_avgcut += cell.avgcut;
                result.rows.push_back(
                    {format_cell(tau_coh), protocol_name(protocol), pair.src,
                     pair.dst, format_cell(pair.path_length_km),
                     std::to_string(pair.n_repeaters),
                     format_cell(cell.scan.best_cutoff),
                     format_cell(cell.scan.best_skr), format_cell(cell.nocut),
                     format_cell(cell.avgcut)});
            }
            const double n = static_cast<double>(cells.size());
            std::sort(best_cutoffs.begin(), best_cutoffs.end());
            auto quantile = [&](double q) {
                if (best_cutoffs.empty()) return 0.0;
                const std::size_t idx = static_cast<std::size_t>(
                    q * static_cast<double>(best_cutoffs.size() - 1) + 0.5);
                return best_cutoffs[idx];
            };
            ordered_json aggregate;
            aggregate["protocol"] = protocol_name(protocol);
            aggregate["tau_coh_s"] = tau_coh;
            aggregate["avg_cutoff_s"] = avg_cutoff;
            aggregate["mean_skr_opt_hz"] = mean_opt / n;
            aggregate["mean_skr_nocut_hz"] = mean_nocut / n;
            aggregate["mean_skr_avgcut_hz"] = mean_avgcut / n;
            aggregate["cutoff_q1_s"] = quantile(0.25);
            aggregate["cutoff_median_s"] = quantile(0.5);
            aggregate["cutoff_q3_s"] = quantile(0.75);
            aggregates.push_back(aggregate);
        }
    }
    result.metadata["qualifying_pairs"] = selection.qualifying;
    result.metadata["selected_pairs"] = selection.pairs.size();
    result.metadata["selection_truncated"] = selection.truncated;
    result.metadata["aggregates"] = aggregates;
    finish(result, config, timer);
    return result;
}

SweepResult run_experiment(const json& config) {
    const std::string name = get_or<std::string>(config, "experiment", "");
    if (name == "one_repeater_sweep") return one_repeater_sweep(config);
    if (name == "cutoff_sweep") return cutoff_sweep(config);
    if (name == "opt_skr_heatmap") return opt_skr_heatmap(config);
    if (name == "feasible_region") return feasible_region(config);
    if (name == "cc_delay_compare") return cc_delay_compare(config);
    if (name == "random_placement") return random_placement(config);
    if (name == "topology_study") return topology_study(config);
    throw ConfigError("unknown experiment '" + name + "'");
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_string(const SweepResult& result) {
    std::string out;
    for (std::size_t c = 0; c < result.columns.size(); ++c) {
        if (c) out += ',';
        out += result.columns[c];
    }
    out += '\n';
    for (const auto& row : result.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += row[c];
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << csv_string(result);
}

void emit_json(const SweepResult& result, const std::string& path) {
    ordered_json doc;
    doc["experiment"] = result.experiment;
    doc["metadata"] = result.metadata;
    doc["columns"] = result.columns;
    doc["rows"] = result.rows;
    doc["all_infeasible"] = result.all_infeasible;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
}

}  // namespace qchain
