#pragma once

#include <cstdint>
#include <vector>

#include "qchain/metrics.hpp"

namespace qchain {

/// Idle-time convention: fidelity includes the end-user memories, SKR
/// excludes them (users measure as soon as they hold a qubit).
enum class IdleMode { fidelity, skr };

/// Per-link attempt windows m_k = floor(tau_cut / (2 tau_k)). Index 0
/// (the sender-side first link) is exempt from the cutoff and its value is
/// informational only.
struct CutoffLimits {
    std::vector<std::uint64_t> m;

    // The protocol can never finish if some constrained window is empty.
    bool feasible() const {
        for (std::size_t k = 1; k < m.size(); ++k)
            if (m[k] == 0) return false;
        return true;
    }
};

struct AnalyticResult {
    double mean_duration_s = 0.0;
    double mean_decoherence_fidelity = 1.0;
    double mean_decoherence_skr = 1.0;
};

/// Mean end-to-end generation time without cutoff: sum_i 2 tau_i / p_i.
double mean_duration_nocut(const ChainSpec& chain);

/// E[exp(-idle/tau_coh)] without cutoff, closed form per idle convention.
double exp_idle_nocut(const ChainSpec& chain, IdleMode mode);

/// Windows for the chain's cutoff. classical_delay=false halves the attempt
/// round trip, so windows become floor(tau_cut / tau_k).
CutoffLimits cutoff_limits(const ChainSpec& chain, bool classical_delay = true);

/// Unnormalized truncated-geometric mean sum_{N=1..m} N p q^(N-1)
/// = (1 - (1 + m p) q^m) / p. Callers pair it with P_m = 1 - q^m.
double truncated_mean_attempts(double p, std::uint64_t m);

/// Mean duration with cutoff via the segment recursion
///   T_k = T_{k-1}/P_k + (1/P_k - 1) tau_cut + 2 N_m(p_k) tau_k / P_k,
/// starting from T_1 = 2 tau_1 / p_1. A failed window discards all progress
/// and restarts from the first link.
/// Throws std::domain_error if some window is empty (infeasible cutoff).
double mean_duration_cut(const ChainSpec& chain);

/// Truncated E[exp(-idle/tau_coh)] with cutoff. Throws on infeasible cutoff.
double exp_idle_cut(const ChainSpec& chain, IdleMode mode);

/// Convenience bundle of the three closed-form statistics.
AnalyticResult evaluate_sequential_stats(const ChainSpec& chain);

/// Full closed-form sequential report (classical delay on). Infeasible
/// cutoffs yield a rate-0 flagged report instead of throwing.
PerformanceReport evaluate_sequential(const ChainSpec& chain);

}  // namespace qchain
