#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "qchain/monte_carlo.hpp"

namespace qchain {

struct DesConfig {
    std::uint64_t seed = 1;
    bool classical_delay = true;
    AbortPolicy abort_policy = AbortPolicy::abort_messaged;
    std::ostream* trace = nullptr;  // newline-delimited time,kind,node,link,tag
    // Watchdog: give up (flagged report) if this many rounds pass without a
    // single delivery.
    std::uint64_t stall_round_limit = 1u << 21;
};

/// Event-driven engine: photons, acknowledgements, swaps, outcome messages
/// and cutoff timers as timestamped events. Independent implementation used
/// to validate the Monte Carlo engine and the closed forms.
PerformanceReport run_des(const ChainSpec& chain, Protocol protocol,
                          const DesConfig& config, std::uint64_t n_successes);

/// Same event loop, handing every delivered pair to the callback. Used by
/// tests that compare per-trace idle times with the closed-form expressions.
PerformanceReport run_des_collect(
    const ChainSpec& chain, Protocol protocol, const DesConfig& config,
    std::uint64_t n_successes,
    const std::function<void(const AttemptRecord&)>& on_success);

}  // namespace qchain
