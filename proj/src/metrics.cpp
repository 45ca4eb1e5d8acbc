#include "qchain/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace qchain {

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double link_success_prob(const LinkSpec& link, double alpha_per_km) {
    return link.p_link * std::exp(-alpha_per_km * link.length_km);
}

double mu_e2e(const ChainSpec& chain) {
    double mu = 1.0;
    for (std::size_t s = 0; s < chain.repeater_count(); ++s)
        mu *= chain.mu_swap;
    for (const LinkSpec& link : chain.links) mu *= link.mu_link;
    return mu;
}

double decoherence_factor(double idle_s, double tau_coh_s) {
    return std::exp(-idle_s / tau_coh_s);
}

double product_2f_minus_1(const ChainSpec& chain) {
    double prod = 1.0;
    for (const LinkSpec& link : chain.links) prod *= 2.0 * link.fidelity - 1.0;
    return prod;
}

double f_e2e_mean(const ChainSpec& chain, double mean_decoherence) {
    return 0.5 + 0.5 * product_2f_minus_1(chain) * mean_decoherence;
}

double fidelity_e2e(const EndToEndNoise& noise) {
    return noise.mu_e2e * noise.f_e2e() + (1.0 - noise.mu_e2e) / 4.0;
}

Qber qber(const EndToEndNoise& noise) {
    return Qber{
        .e_z = (1.0 - noise.mu_e2e) / 2.0,
        .e_x = (1.0 + noise.mu_e2e) / 2.0 - noise.mu_e2e * noise.f_e2e(),
    };
}

double secret_fraction(double e_z, double e_x) {
    return 1.0 - binary_entropy(e_x) - binary_entropy(e_z);
}

double skr(double ebit_rate_hz, double r) {
    return ebit_rate_hz * std::max(r, 0.0);
}

PerformanceReport assemble_report(const ChainSpec& chain,
                                  double mean_duration_s, double dec_fidelity,
                                  double dec_skr, std::uint64_t n_samples,
                                  double stderr_duration_s,
                                  double stderr_dec_fidelity,
                                  double stderr_dec_skr) {
    PerformanceReport report;
    report.mean_duration_s = mean_duration_s;
    report.ebit_rate_hz = mean_duration_s > 0.0 ? 1.0 / mean_duration_s : 0.0;
    report.mean_dec_fidelity = dec_fidelity;
    report.mean_dec_skr = dec_skr;
    report.n_samples = n_samples;
    report.stderr_duration_s = stderr_duration_s;
    report.stderr_dec_fidelity = stderr_dec_fidelity;
    report.stderr_dec_skr = stderr_dec_skr;
    // First-order propagation of the duration error to the rate.
    report.stderr_rate = mean_duration_s > 0.0
                             ? stderr_duration_s / (mean_duration_s * mean_duration_s)
                             : 0.0;

    const double mu = mu_e2e(chain);
    const double prod = product_2f_minus_1(chain);
    const EndToEndNoise noise_f{mu, dec_fidelity, prod};
    const EndToEndNoise noise_s{mu, dec_skr, prod};

    report.fidelity_e2e = fidelity_e2e(noise_f);
    report.mean_f_e2e = noise_s.f_e2e();
    const Qber q = qber(noise_s);
    report.qber_z = q.e_z;
    report.qber_x = q.e_x;
    report.secret_fraction = secret_fraction(q.e_z, q.e_x);
    report.skr_hz = skr(report.ebit_rate_hz, report.secret_fraction);
    return report;
}

PerformanceReport infeasible_cutoff_report() {
    PerformanceReport report;
    report.ebit_rate_hz = 0.0;
    report.mean_duration_s = 0.0;
    report.mean_dec_fidelity = 0.0;
    report.mean_dec_skr = 0.0;
    report.mean_f_e2e = 0.5;
    report.fidelity_e2e = 0.5;
    report.qber_z = 0.0;
    report.qber_x = 0.5;
    report.secret_fraction = 0.0;
    report.skr_hz = 0.0;
    report.infeasible_cutoff = true;
    return report;
}

}  // namespace qchain
