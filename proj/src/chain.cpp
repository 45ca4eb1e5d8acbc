#include "qchain/chain.hpp"

#include <cmath>
#include <string>

namespace qchain {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("ChainSpec: " + what);
}

}  // namespace

void validate(const ChainSpec& chain) {
    require(!chain.links.empty(), "needs at least one link");
    for (std::size_t i = 0; i < chain.links.size(); ++i) {
        const LinkSpec& link = chain.links[i];
        const std::string at = " (link " + std::to_string(i) + ")";
        require(std::isfinite(link.length_km) && link.length_km > 0.0,
                "length_km must be > 0" + at);
        require(link.p_link >= 0.0 && link.p_link <= 1.0,
                "p_link must be in [0,1]" + at);
        require(link.fidelity >= 0.5 && link.fidelity <= 1.0,
                "fidelity must be in [0.5,1]" + at);
        require(link.mu_link >= 0.0 && link.mu_link <= 1.0,
                "mu_link must be in [0,1]" + at);
        require(chain.tau_s(i) > 0.0, "derived tau must be > 0" + at);
    }
    require(chain.mu_swap >= 0.0 && chain.mu_swap <= 1.0,
            "mu_swap must be in [0,1]");
    require(std::isfinite(chain.tau_coh_s) && chain.tau_coh_s > 0.0,
            "tau_coh_s must be > 0");
    require(chain.alpha_per_km >= 0.0, "alpha_per_km must be >= 0");
    require(chain.c_m_per_s > 0.0, "c_m_per_s must be > 0");
    if (chain.cutoff_s)
        require(std::isfinite(*chain.cutoff_s) && *chain.cutoff_s > 0.0,
                "cutoff_s must be > 0 when present");
}

ChainSpec make_uniform_chain(double total_km, std::size_t n_repeaters,
                             double tau_coh_s,
                             std::optional<double> cutoff_s) {
    const std::size_t n_links = n_repeaters + 1;
    return make_chain(
        std::vector<double>(n_links, total_km / static_cast<double>(n_links)),
        tau_coh_s, cutoff_s);
}

ChainSpec make_chain(const std::vector<double>& lengths_km, double tau_coh_s,
                     std::optional<double> cutoff_s) {
    ChainSpec chain;
    chain.links.reserve(lengths_km.size());
    for (double l : lengths_km) chain.links.push_back(LinkSpec{.length_km = l});
    chain.tau_coh_s = tau_coh_s;
    chain.cutoff_s = cutoff_s;
    validate(chain);
    return chain;
}

}  // namespace qchain
