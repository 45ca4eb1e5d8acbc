#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qchain/des.hpp"
#include "qchain/monte_carlo.hpp"
#include "qchain/parallel.hpp"
#include "qchain/topology.hpp"

namespace qchain {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Engine { analytic, mc, des };

Engine engine_from_string(std::string_view s);
Protocol protocol_from_string(std::string_view s);

struct EvalOptions {
    Engine engine = Engine::mc;
    std::uint64_t seed = 1;
    std::uint64_t n_samples = 100000;
    bool classical_delay = true;
    AbortPolicy abort_policy = AbortPolicy::abort_messaged;
};

/// Single-point evaluation behind a uniform interface. engine=analytic is
/// only valid for the sequential protocol with classical delay on.
PerformanceReport evaluate_chain(const ChainSpec& chain, Protocol protocol,
                                 const EvalOptions& options);

/// Tabular sweep output: one row per grid point, preformatted cells, plus a
/// JSON metadata block (config echo, code version, wall time).
struct SweepResult {
    std::string experiment;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    nlohmann::ordered_json metadata;
    bool all_infeasible = false;
};

/// Cutoff-optimization search grid: multiples {2 k tau_i} of every link's
/// round trip (the SKR steps sit exactly there) unioned with a log-uniform
/// fill, capped at 10 * max_i(2 tau_i / p_i).
std::vector<double> cutoff_search_grid(const ChainSpec& chain,
                                       std::size_t per_link_multiples = 24,
                                       std::size_t log_points = 16);

// Experiment drivers. Each takes a JSON config (missing keys fall back to
// the evaluation defaults) and is deterministic given (config, seed).
SweepResult one_repeater_sweep(const nlohmann::json& config);
SweepResult cutoff_sweep(const nlohmann::json& config);
SweepResult opt_skr_heatmap(const nlohmann::json& config);
SweepResult feasible_region(const nlohmann::json& config);
SweepResult cc_delay_compare(const nlohmann::json& config);
SweepResult random_placement(const nlohmann::json& config);
SweepResult topology_study(const nlohmann::json& config);

/// Dispatch on config["experiment"].
SweepResult run_experiment(const nlohmann::json& config);

/// Evenly spaced interior repeater positions used by one_repeater_sweep.
std::vector<double> default_positions(double l_e2e_km, std::size_t count);

/// Random 5-km-min-spacing repeater placement: sorted positions, exact total.
std::vector<double> sample_placement(double total_km, std::size_t n_repeaters,
                                     double min_spacing_km, Rng& rng);

std::string csv_string(const SweepResult& result);
void emit_csv(const SweepResult& result, const std::string& path);
void emit_json(const SweepResult& result, const std::string& path);
std::string format_cell(double v);

}  // namespace qchain
