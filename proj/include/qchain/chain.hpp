#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qchain {

// Fiber defaults: 0.2 dB/km attenuation and light speed in fiber.
inline constexpr double kDefaultAttenuationPerKm = 0.046;
inline constexpr double kDefaultFiberSpeedMPerS = 2.0e8;

/// One fiber segment between adjacent nodes.
struct LinkSpec {
    double length_km = 0.0;
    double p_link = 1.0;     // insertion-loss prefactor (coupling, detector, ...)
    double fidelity = 1.0;   // initial EPR-pair fidelity F_i, in [0.5, 1]
    double mu_link = 1.0;    // depolarizing parameter of link generation
};

/// Ordered sender -> receiver repeater chain: n repeaters, n+1 links.
struct ChainSpec {
    std::vector<LinkSpec> links;
    double mu_swap = 1.0;    // depolarizing parameter per swap
    double tau_coh_s = 0.1;  // memory coherence time
    double alpha_per_km = kDefaultAttenuationPerKm;
    double c_m_per_s = kDefaultFiberSpeedMPerS;
    std::optional<double> cutoff_s;  // absent = no cutoff

    std::size_t link_count() const { return links.size(); }
    std::size_t repeater_count() const { return links.size() - 1; }
    bool has_cutoff() const { return cutoff_s.has_value(); }

    // One-way signal travel time over link i (0-based).
    double tau_s(std::size_t i) const {
        return links[i].length_km * 1000.0 / c_m_per_s;
    }
    double tau_e2e_s() const {
        double t = 0.0;
        for (std::size_t i = 0; i < links.size(); ++i) t += tau_s(i);
        return t;
    }
    double total_length_km() const {
        double l = 0.0;
        for (const auto& link : links) l += link.length_km;
        return l;
    }
};

/// Throws std::invalid_argument on any violated invariant.
void validate(const ChainSpec& chain);

/// n_repeaters equally spaced repeaters on a span of total_km.
ChainSpec make_uniform_chain(double total_km, std::size_t n_repeaters,
                             double tau_coh_s,
                             std::optional<double> cutoff_s = std::nullopt);

/// Chain from explicit segment lengths, shared noise parameters.
ChainSpec make_chain(const std::vector<double>& lengths_km, double tau_coh_s,
                     std::optional<double> cutoff_s = std::nullopt);

}  // namespace qchain
