#pragma once

#include <cstdint>

#include "qchain/chain.hpp"

namespace qchain {

/// Binary entropy h(p), with h(0) = h(1) = 0 by continuous extension.
double binary_entropy(double p);

/// Link-level entanglement success probability p_i = p_link * exp(-alpha * L).
double link_success_prob(const LinkSpec& link, double alpha_per_km);

/// End-to-end depolarizing parameter: mu_swap^n * prod_i mu_i.
double mu_e2e(const ChainSpec& chain);

/// Memory dephasing factor exp(-idle / tau_coh).
double decoherence_factor(double idle_s, double tau_coh_s);

/// prod_i (2 F_i - 1) over all links.
double product_2f_minus_1(const ChainSpec& chain);

/// Mean dephasing parameter: 1/2 + 1/2 * prod(2F_i-1) * E[exp(-idle/tau_coh)].
/// Linear in the decoherence mean, so averaging commutes with this map.
double f_e2e_mean(const ChainSpec& chain, double mean_decoherence);

/// End-to-end noise summary of a batch of delivered pairs.
struct EndToEndNoise {
    double mu_e2e = 1.0;
    double mean_decoherence = 1.0;  // E[exp(-idle / tau_coh)]
    double product_2f_minus_1 = 1.0;

    double f_e2e() const {
        return 0.5 + 0.5 * product_2f_minus_1 * mean_decoherence;
    }
};

/// Final-state fidelity F = mu * fbar + (1 - mu)/4.
double fidelity_e2e(const EndToEndNoise& noise);

struct Qber {
    double e_z = 0.0;
    double e_x = 0.0;
};

/// Z/X-basis error rates: e_z = (1-mu)/2, e_x = (1+mu)/2 - mu*fbar.
Qber qber(const EndToEndNoise& noise);

/// Secret fraction r = 1 - h(e_x) - h(e_z); may be negative (infeasible).
double secret_fraction(double e_z, double e_x);

/// Secret key rate S = R * max(r, 0); zero signals the infeasible regime.
double skr(double ebit_rate_hz, double r);

/// Engine output for one chain/protocol evaluation. Fidelity-side quantities
/// include end-memory idle times; SKR-side quantities exclude them (the users
/// measure as soon as they hold their qubits).
struct PerformanceReport {
    double ebit_rate_hz = 0.0;
    double mean_duration_s = 0.0;
    double mean_dec_fidelity = 1.0;  // E[exp(-idle_F / tau_coh)]
    double mean_dec_skr = 1.0;       // E[exp(-idle_SKR / tau_coh)]
    double mean_f_e2e = 1.0;         // SKR-convention fbar (enters the QBER)
    double fidelity_e2e = 1.0;
    double qber_z = 0.0;
    double qber_x = 0.0;
    double secret_fraction = 1.0;    // raw; may be negative
    double skr_hz = 0.0;
    std::uint64_t n_samples = 0;
    double stderr_rate = 0.0;
    double stderr_duration_s = 0.0;
    double stderr_dec_fidelity = 0.0;
    double stderr_dec_skr = 0.0;
    bool infeasible_cutoff = false;
};

/// Composes rate and noise statistics into the full report. Shared by all
/// engines so cross-checks compare only the duration/idle statistics.
PerformanceReport assemble_report(const ChainSpec& chain,
                                  double mean_duration_s, double dec_fidelity,
                                  double dec_skr, std::uint64_t n_samples,
                                  double stderr_duration_s = 0.0,
                                  double stderr_dec_fidelity = 0.0,
                                  double stderr_dec_skr = 0.0);

/// Rate-zero report carrying the infeasible-cutoff flag (sweeps degrade
/// gracefully instead of throwing at scale).
PerformanceReport infeasible_cutoff_report();

}  // namespace qchain
