#include "qchain/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qchain/parallel.hpp"

namespace qchain {

std::uint64_t sample_geometric(double p, Rng& rng) {
    if (p >= 1.0) return 1;
    const double u = rng.uniform01();
    const double n = std::floor(std::log(u) / std::log1p(-p));
    return 1 + static_cast<std::uint64_t>(std::max(0.0, n));
}

McChain::McChain(const ChainSpec& chain, bool delay)
    : classical_delay(delay) {
    const std::size_t n = chain.link_count();
    tau.reserve(n);
    p.reserve(n);
    prefix_tau.reserve(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tau.push_back(chain.tau_s(i));
        p.push_back(link_success_prob(chain.links[i], chain.alpha_per_km));
        acc += tau.back();
        prefix_tau.push_back(acc);
    }
    tau_e2e = acc;
    if (chain.has_cutoff()) {
        cutoff = *chain.cutoff_s;
        const CutoffLimits limits = cutoff_limits(chain, delay);
        window = limits.m;
        feasible_cutoff = limits.feasible();
    }
}

namespace {

// Failed link attempts cost a full round trip 2*tau when the herald travels
// back classically, one flight when heralding is instantaneous.
double attempt_cost(const McChain& mc, std::size_t i) {
    return (mc.classical_delay ? 2.0 : 1.0) * mc.tau[i];
}

}  // namespace

AttemptRecord sequential_record(const McChain& mc,
                                const std::vector<std::uint64_t>& counts,
                                double prior_elapsed_s) {
    AttemptRecord rec;
    rec.attempt_counts = counts;
    const std::size_t n_links = mc.n_links();
    double duration = 0.0;
    double repeater_idle = 0.0;
    for (std::size_t i = 0; i < n_links; ++i) {
        const double nd = static_cast<double>(counts[i]);
        duration += attempt_cost(mc, i) * nd;
        if (i >= 1) {
            // t_{i-1,L} + t_{i-1,R}: the left neighbour waits one window of
            // link-i attempts, the local qubit one round trip.
            repeater_idle += mc.classical_delay
                                 ? (2.0 * nd + 2.0) * mc.tau[i]
                                 : (nd + 1.0) * mc.tau[i];
        }
    }
    rec.duration_s = prior_elapsed_s + duration;
    rec.idle_skr_s = repeater_idle;
    // Fidelity side adds T_A and T_B.
    if (mc.classical_delay) {
        rec.idle_fidelity_s = 3.0 * mc.tau_e2e;
        for (std::size_t i = 1; i < n_links; ++i)
            rec.idle_fidelity_s += 4.0 * static_cast<double>(counts[i]) * mc.tau[i];
    } else {
        rec.idle_fidelity_s = mc.tau_e2e;
        for (std::size_t i = 1; i < n_links; ++i)
            rec.idle_fidelity_s += 2.0 * static_cast<double>(counts[i]) * mc.tau[i];
    }
    return rec;
}

double parallel_swap_time(const McChain& mc,
                          const std::vector<std::uint64_t>& counts,
                          std::size_t k) {
    const double left = static_cast<double>(counts[k - 1]);
    const double right = static_cast<double>(counts[k]);
    if (mc.classical_delay)
        return std::max((2.0 * left - 1.0) * mc.tau[k - 1],
                        2.0 * right * mc.tau[k]);
    return std::max(left * mc.tau[k - 1], right * mc.tau[k]);
}

AttemptRecord parallel_record(const McChain& mc,
                              const std::vector<std::uint64_t>& counts,
                              double prior_elapsed_s) {
    AttemptRecord rec;
    rec.attempt_counts = counts;
    const std::size_t n_links = mc.n_links();
    const std::size_t n_rep = n_links - 1;
    const bool cd = mc.classical_delay;

    if (n_rep == 0) {
        // Direct transmission; identical to the sequential single link.
        rec = sequential_record(mc, counts, prior_elapsed_s);
        return rec;
    }

    double total = 0.0;
    double repeater_idle = 0.0;
    for (std::size_t k = 1; k <= n_rep; ++k) {
        const double t_swap = parallel_swap_time(mc, counts, k);
        total = std::max(total, t_swap + (cd ? mc.prefix_tau[k - 1] : 0.0));
        const double left = static_cast<double>(counts[k - 1]);
        const double right = static_cast<double>(counts[k]);
        const double arrive_left =
            cd ? (2.0 * left - 1.0) * mc.tau[k - 1] : left * mc.tau[k - 1];
        const double emit_right =
            cd ? 2.0 * (right - 1.0) * mc.tau[k] : (right - 1.0) * mc.tau[k];
        repeater_idle += (t_swap - arrive_left) + (t_swap - emit_right);
    }

    const double first = static_cast<double>(counts[0]);
    const double last = static_cast<double>(counts[n_links - 1]);
    const double t_a =
        total - (cd ? 2.0 * (first - 1.0) : (first - 1.0)) * mc.tau[0];
    const double t_b =
        total -
        (cd ? 2.0 * last - 1.0 : last) * mc.tau[n_links - 1];

    rec.duration_s = prior_elapsed_s + total;
    rec.idle_skr_s = repeater_idle;
    rec.idle_fidelity_s = repeater_idle + t_a + t_b;
    return rec;
}

AttemptRecord simulate_sequential_attempt(const McChain& mc, Rng& rng) {
    std::vector<std::uint64_t> counts(mc.n_links());
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] = sample_geometric(mc.p[i], rng);
    return sequential_record(mc, counts);
}

AttemptRecord simulate_sequential_cut(const McChain& mc, Rng& rng) {
    const std::size_t n_links = mc.n_links();
    std::vector<std::uint64_t> counts(n_links);
    double elapsed = 0.0;
    for (;;) {
        // First link repeats until it succeeds; every later link gets one
        // cutoff window. A blown window discards all progress: the elapsed
        // time to the preceding repeater plus the cutoff is charged and the
        // round restarts from the first link.
        counts[0] = sample_geometric(mc.p[0], rng);
        double round = attempt_cost(mc, 0) * static_cast<double>(counts[0]);
        bool done = true;
        for (std::size_t k = 1; k < n_links; ++k) {
            const std::uint64_t n = sample_geometric(mc.p[k], rng);
            if (n > mc.window[k]) {
                elapsed += round + mc.cutoff;
                done = false;
                break;
            }
            counts[k] = n;
            round += attempt_cost(mc, k) * static_cast<double>(n);
        }
        if (done) return sequential_record(mc, counts, elapsed);
    }
}

AttemptRecord simulate_parallel_attempt(const McChain& mc, Rng& rng) {
    std::vector<std::uint64_t> counts(mc.n_links());
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] = sample_geometric(mc.p[i], rng);
    return parallel_record(mc, counts);
}

namespace {

struct Violation {
    bool violated = false;
    double first_expiry = std::numeric_limits<double>::infinity();
};

// Earliest cutoff-timer expiry among repeater memories whose idle exceeds
// the cutoff, given when each memory was last loaded.
Violation check_parallel_cutoff(const McChain& mc,
                                const std::vector<std::uint64_t>& counts) {
    Violation v;
    const bool cd = mc.classical_delay;
    const std::size_t n_rep = mc.n_links() - 1;
    for (std::size_t k = 1; k <= n_rep; ++k) {
        const double t_swap = parallel_swap_time(mc, counts, k);
        const double left = static_cast<double>(counts[k - 1]);
        const double right = static_cast<double>(counts[k]);
        const double occupied_left =
            cd ? (2.0 * left - 1.0) * mc.tau[k - 1] : left * mc.tau[k - 1];
        const double occupied_right =
            cd ? 2.0 * (right - 1.0) * mc.tau[k] : (right - 1.0) * mc.tau[k];
        for (double occupied : {occupied_left, occupied_right}) {
            if (t_swap - occupied > mc.cutoff) {
                v.violated = true;
                v.first_expiry = std::min(v.first_expiry, occupied + mc.cutoff);
            }
        }
    }
    return v;
}

}  // namespace

AttemptRecord simulate_parallel_cut(const McChain& mc, Rng& rng,
                                    AbortPolicy policy) {
    std::vector<std::uint64_t> counts(mc.n_links());
    double elapsed = 0.0;
    for (;;) {
        for (std::size_t i = 0; i < counts.size(); ++i)
            counts[i] = sample_geometric(mc.p[i], rng);
        AttemptRecord rec = parallel_record(mc, counts);
        const Violation v = mc.n_links() > 1 ? check_parallel_cutoff(mc, counts)
                                             : Violation{};
        if (!v.violated) {
            rec.duration_s += elapsed;
            return rec;
        }
        switch (policy) {
            case AbortPolicy::full_duration:
                elapsed += rec.duration_s;
                break;
            case AbortPolicy::abort_instant:
                elapsed += v.first_expiry;
                break;
            case AbortPolicy::abort_messaged:
                elapsed += v.first_expiry +
                           (mc.classical_delay ? mc.tau_e2e : 0.0);
                break;
        }
    }
}

namespace {

struct Accum {
    double sum_duration = 0.0;
    double sumsq_duration = 0.0;
    double sum_dec_f = 0.0;
    double sumsq_dec_f = 0.0;
    double sum_dec_s = 0.0;
    double sumsq_dec_s = 0.0;

    void add(const AttemptRecord& rec, double tau_coh) {
        const double dec_f = std::exp(-rec.idle_fidelity_s / tau_coh);
        const double dec_s = std::exp(-rec.idle_skr_s / tau_coh);
        sum_duration += rec.duration_s;
        sumsq_duration += rec.duration_s * rec.duration_s;
        sum_dec_f += dec_f;
        sumsq_dec_f += dec_f * dec_f;
        sum_dec_s += dec_s;
        sumsq_dec_s += dec_s * dec_s;
    }

    void merge(const Accum& other) {
        sum_duration += other.sum_duration;
        sumsq_duration += other.sumsq_duration;
        sum_dec_f += other.sum_dec_f;
        sumsq_dec_f += other.sumsq_dec_f;
        sum_dec_s += other.sum_dec_s;
        sumsq_dec_s += other.sumsq_dec_s;
    }
};

double stderr_of_mean(double sum, double sumsq, double n) {
    if (n < 2.0) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
}

}  // namespace

PerformanceReport estimate(const ChainSpec& chain, Protocol protocol,
                           const McConfig& config) {
    validate(chain);
    const McChain mc(chain, config.classical_delay);
    if (chain.has_cutoff() && !mc.feasible_cutoff)
        return infeasible_cutoff_report();

    const std::uint64_t n = std::max<std::uint64_t>(1, config.n_samples);
    const bool cut = chain.has_cutoff();

    // Fixed chunk layout keeps the reduction order (and thus the result)
    // independent of the worker count.
    const std::uint64_t chunk_size = 4096;
    const std::size_t n_chunks =
        static_cast<std::size_t>((n + chunk_size - 1) / chunk_size);
    std::vector<Accum> partial(n_chunks);

    parallel_for(n_chunks, [&](std::size_t c) {
        const std::uint64_t begin = static_cast<std::uint64_t>(c) * chunk_size;
        const std::uint64_t end = std::min(n, begin + chunk_size);
        Accum acc;
        for (std::uint64_t i = begin; i < end; ++i) {
            Rng rng = stream_for(config.seed, i);
            AttemptRecord rec;
            if (protocol == Protocol::sequential)
                rec = cut ? simulate_sequential_cut(mc, rng)
                          : simulate_sequential_attempt(mc, rng);
            else
                rec = cut ? simulate_parallel_cut(mc, rng, config.abort_policy)
                          : simulate_parallel_attempt(mc, rng);
            acc.add(rec, chain.tau_coh_s);
        }
        partial[c] = acc;
    });

    Accum total;
    for (const Accum& acc : partial) total.merge(acc);

    const double nd = static_cast<double>(n);
    PerformanceReport report = assemble_report(
        chain, total.sum_duration / nd, total.sum_dec_f / nd,
        total.sum_dec_s / nd, n,
        stderr_of_mean(total.sum_duration, total.sumsq_duration, nd),
        stderr_of_mean(total.sum_dec_f, total.sumsq_dec_f, nd),
        stderr_of_mean(total.sum_dec_s, total.sumsq_dec_s, nd));
    return report;
}

}  // namespace qchain
