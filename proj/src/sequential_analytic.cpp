#include "qchain/sequential_analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace qchain {

namespace {

std::vector<double> success_probs(const ChainSpec& chain) {
    std::vector<double> p;
    p.reserve(chain.link_count());
    for (const LinkSpec& link : chain.links)
        p.push_back(link_success_prob(link, chain.alpha_per_km));
    return p;
}

void require_feasible(const CutoffLimits& limits) {
    if (!limits.feasible())
        throw std::domain_error(
            "cutoff shorter than a constrained link round trip: the protocol "
            "can never succeed");
}

}  // namespace

double mean_duration_nocut(const ChainSpec& chain) {
    const std::vector<double> p = success_probs(chain);
    double total = 0.0;
    for (std::size_t i = 0; i < chain.link_count(); ++i)
        total += 2.0 * chain.tau_s(i) / p[i];
    return total;
}

double exp_idle_nocut(const ChainSpec& chain, IdleMode mode) {
    const std::vector<double> p = success_probs(chain);
    const double tau_coh = chain.tau_coh_s;
    double result =
        mode == IdleMode::fidelity
            ? std::exp(-3.0 * chain.tau_e2e_s() / tau_coh)
            : 1.0;
    for (std::size_t i = 1; i < chain.link_count(); ++i) {
        const double tau = chain.tau_s(i);
        const double q = 1.0 - p[i];
        const double num = p[i] * std::exp(-4.0 * tau / tau_coh);
        const double denom_exp = mode == IdleMode::fidelity ? 4.0 : 2.0;
        result *= num / (1.0 - q * std::exp(-denom_exp * tau / tau_coh));
    }
    return result;
}

CutoffLimits cutoff_limits(const ChainSpec& chain, bool classical_delay) {
    if (!chain.has_cutoff())
        throw std::domain_error("cutoff_limits requires a cutoff");
    const double tau_cut = *chain.cutoff_s;
    const double round_trip = classical_delay ? 2.0 : 1.0;
    CutoffLimits limits;
    limits.m.reserve(chain.link_count());
    for (std::size_t i = 0; i < chain.link_count(); ++i) {
        // Guard the floor against boundary rounding (tau_cut an exact
        // multiple of the round trip): widen by 1e-12 * tau_cut.
        const double ratio =
            (tau_cut * (1.0 + 1e-12)) / (round_trip * chain.tau_s(i));
        limits.m.push_back(static_cast<std::uint64_t>(std::floor(ratio)));
    }
    return limits;
}

double truncated_mean_attempts(double p, std::uint64_t m) {
    if (p >= 1.0) return 1.0;
    const double q = 1.0 - p;
    const double md = static_cast<double>(m);
    return (1.0 - (1.0 + md * p) * std::pow(q, md)) / p;
}

double mean_duration_cut(const ChainSpec& chain) {
    const CutoffLimits limits = cutoff_limits(chain);
    require_feasible(limits);
    const std::vector<double> p = success_probs(chain);
    const double tau_cut = *chain.cutoff_s;

    double duration = 2.0 * chain.tau_s(0) / p[0];
    for (std::size_t k = 1; k < chain.link_count(); ++k) {
        const double md = static_cast<double>(limits.m[k]);
        const double window_success =
            1.0 - std::pow(1.0 - p[k], md);  // P_{k,m}
        duration = duration / window_success +
                   (1.0 / window_success - 1.0) * tau_cut +
                   2.0 * truncated_mean_attempts(p[k], limits.m[k]) *
                       chain.tau_s(k) / window_success;
    }
    return duration;
}

double exp_idle_cut(const ChainSpec& chain, IdleMode mode) {
    const CutoffLimits limits = cutoff_limits(chain);
    require_feasible(limits);
    const std::vector<double> p = success_probs(chain);
    const double tau_coh = chain.tau_coh_s;

    double result =
        mode == IdleMode::fidelity
            ? std::exp(-3.0 * chain.tau_e2e_s() / tau_coh)
            : 1.0;
    for (std::size_t i = 1; i < chain.link_count(); ++i) {
        const double tau = chain.tau_s(i);
        const double q = 1.0 - p[i];
        const double md = static_cast<double>(limits.m[i]);
        const double window_success = 1.0 - std::pow(q, md);
        const double denom_exp = mode == IdleMode::fidelity ? 4.0 : 2.0;
        const double x = std::exp(-denom_exp * tau / tau_coh);
        const double truncation =
            1.0 - std::pow(q, md) * std::exp(-denom_exp * md * tau / tau_coh);
        result *= (p[i] * std::exp(-4.0 * tau / tau_coh) / window_success) *
                  truncation / (1.0 - q * x);
    }
    return result;
}

AnalyticResult evaluate_sequential_stats(const ChainSpec& chain) {
    AnalyticResult result;
    if (chain.has_cutoff()) {
        result.mean_duration_s = mean_duration_cut(chain);
        result.mean_decoherence_fidelity = exp_idle_cut(chain, IdleMode::fidelity);
        result.mean_decoherence_skr = exp_idle_cut(chain, IdleMode::skr);
    } else {
        result.mean_duration_s = mean_duration_nocut(chain);
        result.mean_decoherence_fidelity =
            exp_idle_nocut(chain, IdleMode::fidelity);
        result.mean_decoherence_skr = exp_idle_nocut(chain, IdleMode::skr);
    }
    return result;
}

PerformanceReport evaluate_sequential(const ChainSpec& chain) {
    validate(chain);
    if (chain.has_cutoff() && !cutoff_limits(chain).feasible())
        return infeasible_cutoff_report();
    const AnalyticResult stats = evaluate_sequential_stats(chain);
    return assemble_report(chain, stats.mean_duration_s,
                           stats.mean_decoherence_fidelity,
                           stats.mean_decoherence_skr, 0);
}

}  // namespace qchain
