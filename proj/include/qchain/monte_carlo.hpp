#pragma once

#include <cstdint>
#include <vector>

#include "qchain/metrics.hpp"
#include "qchain/rng.hpp"
#include "qchain/sequential_analytic.hpp"

namespace qchain {

enum class Protocol { sequential, parallel };

/// Elapsed-time accounting for parallel attempts that violate the cutoff.
/// abort_messaged (default): the expiring memory's node broadcasts the
///   failure, every node restarts once the relay is through: a failed
///   attempt charges its first expiry time plus one end-to-end signal.
/// abort_instant: charge up to the first memory expiry only.
/// full_duration: the attempt always runs to completion and charges its
///   whole duration T, as if nobody acted before the sender collected all
///   outcomes.
/// Identical semantics in the Monte Carlo and discrete-event engines.
enum class AbortPolicy { abort_messaged, abort_instant, full_duration };

struct McConfig {
    std::uint64_t n_samples = 100000;
    std::uint64_t seed = 1;
    bool classical_delay = true;
    AbortPolicy abort_policy = AbortPolicy::abort_messaged;
};

/// One end-to-end success: per-link attempt counts of the delivering round,
/// total elapsed time (failed rounds included), and the two idle-time sums.
struct AttemptRecord {
    std::vector<std::uint64_t> attempt_counts;
    double duration_s = 0.0;
    double idle_fidelity_s = 0.0;  // T_A + T_B + sum of repeater idles
    double idle_skr_s = 0.0;       // repeater idles only
    bool success = true;
};

/// Precomputed per-chain sampling tables (probabilities, travel times,
/// cutoff windows for the configured classical-delay mode).
struct McChain {
    McChain(const ChainSpec& chain, bool classical_delay);

    bool classical_delay;
    std::vector<double> tau;    // one-way times
    std::vector<double> p;      // link success probabilities
    std::vector<double> prefix_tau;  // prefix_tau[i] = sum_{j<=i} tau[j]
    double tau_e2e;
    double cutoff = 0.0;        // 0 = none
    std::vector<std::uint64_t> window;  // attempt windows; [0] unconstrained
    bool feasible_cutoff = true;

    std::size_t n_links() const { return tau.size(); }
};

std::uint64_t sample_geometric(double p, Rng& rng);

// Record assembly from sampled attempt counts; exposed so tests can drive
// the duration/idle formulas with fixed counts.
AttemptRecord sequential_record(const McChain& mc,
                                const std::vector<std::uint64_t>& counts,
                                double prior_elapsed_s = 0.0);
AttemptRecord parallel_record(const McChain& mc,
                              const std::vector<std::uint64_t>& counts,
                              double prior_elapsed_s = 0.0);

AttemptRecord simulate_sequential_attempt(const McChain& mc, Rng& rng);
AttemptRecord simulate_sequential_cut(const McChain& mc, Rng& rng);
AttemptRecord simulate_parallel_attempt(const McChain& mc, Rng& rng);
AttemptRecord simulate_parallel_cut(const McChain& mc, Rng& rng,
                                    AbortPolicy policy);

/// Swap time of repeater k (1-based) given the sampled attempt counts.
double parallel_swap_time(const McChain& mc,
                          const std::vector<std::uint64_t>& counts,
                          std::size_t k);

/// Monte Carlo estimate over config.n_samples independent successes.
/// Deterministic for fixed (chain, protocol, config) independent of the
/// worker thread count.
PerformanceReport estimate(const ChainSpec& chain, Protocol protocol,
                           const McConfig& config);

}  // namespace qchain
