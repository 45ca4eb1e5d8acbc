#include <cmath>
#include <vector>

#include "doctest.h"
#include "qchain/monte_carlo.hpp"

using namespace qchain;

namespace {

ChainSpec exact_chain(const std::vector<double>& lengths_km,
                      const std::vector<double>& probs, double tau_coh_s,
                      std::optional<double> cutoff_s = std::nullopt) {
    ChainSpec chain = make_chain(lengths_km, tau_coh_s, cutoff_s);
    chain.alpha_per_km = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        chain.links[i].p_link = probs[i];
    return chain;
}

ChainSpec random_chain(Rng& rng, std::size_t max_links = 6,
                       std::optional<double> cutoff_s = std::nullopt) {
    std::vector<double> lengths;
    const std::size_t n_links = 1 + rng.next() % max_links;
    for (std::size_t i = 0; i < n_links; ++i)
        lengths.push_back(5.0 + 95.0 * rng.uniform01());
    return make_chain(lengths, 1e-3 + 0.1 * rng.uniform01(), cutoff_s);
}

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

template <typename F>
Moments sample_mean(std::uint64_t n, std::uint64_t seed, F&& draw) {
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng rng = stream_for(seed, i);
        const double x = draw(rng);
        sum += x;
        sumsq += x * x;
    }
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    return Moments{mean, std::sqrt(std::max(0.0, (sumsq / nd - mean * mean) /
                                                     (nd - 1.0)))};
}

}  // namespace

TEST_CASE("geometric sampling") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) CHECK(sample_geometric(1.0, rng) == 1);

    const std::uint64_t n = 1000000;
    const Moments half = sample_mean(n, 99, [](Rng& r) {
        return static_cast<double>(sample_geometric(0.5, r));
    });
    CHECK(std::abs(half.mean - 2.0) < 0.005);

    std::uint64_t ones = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng r = stream_for(123, i);
        if (sample_geometric(0.1, r) == 1) ++ones;
    }
    CHECK(std::abs(static_cast<double>(ones) / n - 0.1) < 0.001);
}

TEST_CASE("sequential record formulas") {
    // Uniform tau, all N = 1: duration 2(n+1)tau, repeater idle 4n tau.
    ChainSpec uniform = exact_chain({40.0, 40.0, 40.0}, {1.0, 1.0, 1.0}, 0.1);
    McChain mc(uniform, true);
    const double tau = uniform.tau_s(0);
    AttemptRecord rec = sequential_record(mc, {1, 1, 1});
    CHECK(rec.duration_s == doctest::Approx(6.0 * tau).epsilon(1e-12));
    CHECK(rec.idle_skr_s == doctest::Approx(8.0 * tau).epsilon(1e-12));

    // n=1, N=(2,3), tau=(1e-3, 2e-3).
    ChainSpec pair = exact_chain({200.0, 400.0}, {0.5, 0.5}, 0.1);
    McChain mc2(pair, true);
    rec = sequential_record(mc2, {2, 3});
    CHECK(rec.duration_s == doctest::Approx(0.016).epsilon(1e-12));
    CHECK(rec.idle_skr_s == doctest::Approx(0.016).epsilon(1e-12));
    CHECK(rec.idle_fidelity_s ==
          doctest::Approx(3.0 * 3e-3 + 4.0 * 3.0 * 2e-3).epsilon(1e-12));
    CHECK(rec.idle_skr_s <= rec.idle_fidelity_s);

    // Sample mean of the duration matches the closed form.
    ChainSpec chain = make_chain({60.0, 35.0, 80.0}, 0.05);
    McChain mc3(chain, true);
    const Moments duration = sample_mean(1000000, 7, [&](Rng& r) {
        return simulate_sequential_attempt(mc3, r).duration_s;
    });
    CHECK(std::abs(duration.mean - mean_duration_nocut(chain)) <
          3.0 * duration.se);
}

TEST_CASE("sequential cutoff sampling") {
    // Sure links collapse to the no-cutoff single-attempt record.
    ChainSpec sure = exact_chain({50.0, 50.0}, {1.0, 1.0}, 0.1, 1e-3);
    McChain mc(sure, true);
    Rng rng(3);
    const AttemptRecord rec = simulate_sequential_cut(mc, rng);
    CHECK(rec.duration_s == doctest::Approx(2.0 * sure.tau_e2e_s()));
    CHECK(rec.attempt_counts == std::vector<std::uint64_t>{1, 1});

    // Mean duration and decoherence factors match the recursion and the
    // truncated expectations; windows are respected per attempt.
    ChainSpec chain =
        exact_chain({80.0, 60.0, 90.0}, {0.4, 0.5, 0.3}, 4e-3, 2.5e-3);
    McChain mcc(chain, true);
    const CutoffLimits limits = cutoff_limits(chain);
    const std::uint64_t n = 400000;
    double sum_d = 0.0, sumsq_d = 0.0, sum_e = 0.0, sumsq_e = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng r = stream_for(41, i);
        const AttemptRecord sample = simulate_sequential_cut(mcc, r);
        for (std::size_t k = 1; k < sample.attempt_counts.size(); ++k)
            CHECK(sample.attempt_counts[k] <= limits.m[k]);
        sum_d += sample.duration_s;
        sumsq_d += sample.duration_s * sample.duration_s;
        const double dec = std::exp(-sample.idle_skr_s / chain.tau_coh_s);
        sum_e += dec;
        sumsq_e += dec * dec;
    }
    const double nd = static_cast<double>(n);
    const double mean_d = sum_d / nd;
    const double se_d = std::sqrt((sumsq_d / nd - mean_d * mean_d) / (nd - 1));
    CHECK(std::abs(mean_d - mean_duration_cut(chain)) < 3.0 * se_d);
    const double mean_e = sum_e / nd;
    const double se_e = std::sqrt((sumsq_e / nd - mean_e * mean_e) / (nd - 1));
    CHECK(std::abs(mean_e - exp_idle_cut(chain, IdleMode::skr)) < 3.0 * se_e);
}

TEST_CASE("parallel record identities") {
    // One repeater, N=(1,1), uniform tau: swap at 2tau, done at 3tau, total
    // fidelity idle 8tau, matching 4T - (4N1-1)tau - (4N2-3)tau.
    ChainSpec one = exact_chain({100.0, 100.0}, {0.5, 0.5}, 0.1);
    McChain mc(one, true);
    const double tau = one.tau_s(0);
    AttemptRecord rec = parallel_record(mc, {1, 1});
    CHECK(parallel_swap_time(mc, {1, 1}, 1) == doctest::Approx(2.0 * tau));
    CHECK(rec.duration_s == doctest::Approx(3.0 * tau).epsilon(1e-12));
    CHECK(rec.idle_fidelity_s == doctest::Approx(8.0 * tau).epsilon(1e-12));

    Rng rng(43);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::uint64_t n1 = 1 + rng.next() % 12;
        const std::uint64_t n2 = 1 + rng.next() % 12;
        const double tau1 = one.tau_s(0), tau2 = one.tau_s(1);
        rec = parallel_record(mc, {n1, n2});
        // Closed-form identity for the repeater idles.
        const double lhs = rec.idle_skr_s;
        const double rhs =
            std::abs((2.0 * static_cast<double>(n1) - 1.0) * tau1 -
                     2.0 * static_cast<double>(n2) * tau2) +
            2.0 * tau2;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        // n=1 total idle identity.
        CHECK(rec.idle_fidelity_s ==
              doctest::Approx(4.0 * rec.duration_s -
                              (4.0 * static_cast<double>(n1) - 1.0) * tau1 -
                              (4.0 * static_cast<double>(n2) - 3.0) * tau2)
                  .epsilon(1e-12));
    }

    // One branch of every swap max is tight: t_{k,L} = 0 or t_{k,R} = 2 tau.
    ChainSpec chain = make_chain({25.0, 60.0, 45.0, 30.0}, 0.1);
    McChain mcl(chain, true);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::uint64_t> counts(4);
        for (auto& c : counts) c = 1 + rng.next() % 9;
        for (std::size_t k = 1; k <= 3; ++k) {
            const double t_swap = parallel_swap_time(mcl, counts, k);
            const double left =
                t_swap - (2.0 * static_cast<double>(counts[k - 1]) - 1.0) *
                             chain.tau_s(k - 1);
            const double right =
                t_swap -
                2.0 * (static_cast<double>(counts[k]) - 1.0) * chain.tau_s(k);
            const bool left_tight = std::abs(left) < 1e-15;
            const bool right_tight =
                std::abs(right - 2.0 * chain.tau_s(k)) < 1e-15;
            CHECK((left_tight || right_tight));
        }
    }

    // All links certain, uniform tau: T = (n+2) tau.
    ChainSpec sure =
        exact_chain({50.0, 50.0, 50.0, 50.0}, {1.0, 1.0, 1.0, 1.0}, 0.1);
    McChain mcs(sure, true);
    Rng r2(1);
    CHECK(simulate_parallel_attempt(mcs, r2).duration_s ==
          doctest::Approx(5.0 * sure.tau_s(0)).epsilon(1e-12));
}

TEST_CASE("parallel cutoff") {
    // A huge cutoff reproduces the unconstrained attempt sample for sample.
    ChainSpec loose = exact_chain({70.0, 40.0}, {0.4, 0.7}, 0.01, 1e3);
    ChainSpec open = loose;
    open.cutoff_s.reset();
    McChain mc_loose(loose, true), mc_open(open, true);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        Rng a = stream_for(7, i), b = stream_for(7, i);
        const AttemptRecord with_cut =
            simulate_parallel_cut(mc_loose, a, AbortPolicy::full_duration);
        const AttemptRecord without = simulate_parallel_attempt(mc_open, b);
        CHECK(with_cut.duration_s == without.duration_s);
        CHECK(with_cut.idle_fidelity_s == without.idle_fidelity_s);
    }

    // Brute-force enumeration oracle on one repeater: classify every
    // (N1, N2) in [1,50]^2, accumulate the pass probability and E[T], then
    // check the accepted records and Wald's identity E[total] = E[T] / P.
    const double tau_cut = 1.4e-3;
    ChainSpec chain = exact_chain({100.0, 100.0}, {0.45, 0.35}, 0.01, tau_cut);
    const double tau1 = chain.tau_s(0), tau2 = chain.tau_s(1);
    double pass_mass = 0.0, mean_t = 0.0;
    for (int n1 = 1; n1 <= 50; ++n1) {
        for (int n2 = 1; n2 <= 50; ++n2) {
            const double mass = 0.45 * std::pow(0.55, n1 - 1) * 0.35 *
                                std::pow(0.65, n2 - 1);
            const double t_swap =
                std::max((2.0 * n1 - 1.0) * tau1, 2.0 * n2 * tau2);
            const double t_l = t_swap - (2.0 * n1 - 1.0) * tau1;
            const double t_r = t_swap - 2.0 * (n2 - 1.0) * tau2;
            mean_t += mass * (t_swap + tau1);
            if (t_l <= tau_cut && t_r <= tau_cut) pass_mass += mass;
        }
    }
    McChain mcc(chain, true);
    const std::uint64_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng r = stream_for(91, i);
        const AttemptRecord rec =
            simulate_parallel_cut(mcc, r, AbortPolicy::full_duration);
        // Accepted records always honour the constraints.
        const double t_swap = parallel_swap_time(mcc, rec.attempt_counts, 1);
        CHECK(t_swap -
                  (2.0 * static_cast<double>(rec.attempt_counts[0]) - 1.0) *
                      tau1 <=
              tau_cut * (1 + 1e-12));
        CHECK(t_swap -
                  2.0 * (static_cast<double>(rec.attempt_counts[1]) - 1.0) *
                      tau2 <=
              tau_cut * (1 + 1e-12));
        sum += rec.duration_s;
        sumsq += rec.duration_s * rec.duration_s;
    }
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    const double se = std::sqrt((sumsq / nd - mean * mean) / (nd - 1.0));
    CHECK(std::abs(mean - mean_t / pass_mass) < 3.0 * se);

    // Early-abort accounting never exceeds the full-duration charge.
    for (std::uint64_t i = 0; i < 5000; ++i) {
        Rng a = stream_for(17, i), b = stream_for(17, i), c = stream_for(17, i);
        const double full =
            simulate_parallel_cut(mcc, a, AbortPolicy::full_duration)
                .duration_s;
        const double instant =
            simulate_parallel_cut(mcc, b, AbortPolicy::abort_instant)
                .duration_s;
        const double messaged =
            simulate_parallel_cut(mcc, c, AbortPolicy::abort_messaged)
                .duration_s;
        CHECK(instant <= full * (1.0 + 1e-12));
        CHECK(instant <= messaged * (1.0 + 1e-12));
    }

    // Conditioning on the cutoff raises the decoherence mean.
    double cond = 0.0, uncond = 0.0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        Rng a = stream_for(29, i), b = stream_for(29, i);
        cond += std::exp(-simulate_parallel_cut(mcc, a,
                                                AbortPolicy::full_duration)
                              .idle_skr_s /
                         chain.tau_coh_s);
        uncond += std::exp(-simulate_parallel_attempt(mcc, b).idle_skr_s /
                           chain.tau_coh_s);
    }
    CHECK(cond >= uncond);
}

TEST_CASE("parallel idles decohere less than sequential on uniform chains") {
    // Waiting happens concurrently in the parallel scheme, so its repeater
    // idle sum is stochastically smaller and the decoherence mean larger.
    for (double l : {150.0, 250.0}) {
        ChainSpec chain = make_uniform_chain(l, 4, 0.05);
        McConfig config{.n_samples = 50000, .seed = 14};
        const PerformanceReport seq =
            estimate(chain, Protocol::sequential, config);
        const PerformanceReport par =
            estimate(chain, Protocol::parallel, config);
        CHECK(par.mean_dec_skr + 3.0 * (par.stderr_dec_skr +
                                        seq.stderr_dec_skr) >
              seq.mean_dec_skr);
    }
}

TEST_CASE("attempt record invariants") {
    // Durations positive and at least one link flight; SKR idles never
    // exceed the fidelity-side idles; all idles non-negative.
    Rng rng(401);
    for (int trial = 0; trial < 40; ++trial) {
        ChainSpec chain = random_chain(rng);
        double max_tau = 0.0;
        for (std::size_t i = 0; i < chain.link_count(); ++i)
            max_tau = std::max(max_tau, chain.tau_s(i));
        for (bool delay : {true, false}) {
            McChain mc(chain, delay);
            for (std::uint64_t i = 0; i < 200; ++i) {
                Rng stream = stream_for(4000 + trial, i);
                for (const AttemptRecord& rec :
                     {simulate_sequential_attempt(mc, stream),
                      simulate_parallel_attempt(mc, stream)}) {
                    CHECK(rec.duration_s >= max_tau);
                    CHECK(rec.idle_skr_s >= 0.0);
                    CHECK(rec.idle_fidelity_s >=
                          rec.idle_skr_s * (1.0 - 1e-12));
                    CHECK(rec.success);
                }
            }
        }
    }
}

TEST_CASE("classical delay off transforms") {
    ChainSpec chain = exact_chain({50.0, 50.0, 50.0}, {1.0, 1.0, 1.0}, 0.1);
    McChain on(chain, true), off(chain, false);
    // All N = 1 sequential: photon flights only.
    CHECK(sequential_record(off, {1, 1, 1}).duration_s ==
          doctest::Approx(chain.tau_e2e_s()).epsilon(1e-12));
    CHECK(sequential_record(on, {1, 1, 1}).duration_s ==
          doctest::Approx(2.0 * chain.tau_e2e_s()).epsilon(1e-12));

    ChainSpec one = exact_chain({80.0, 80.0}, {0.5, 0.5}, 0.1);
    McChain off1(one, false);
    CHECK(parallel_record(off1, {1, 1}).duration_s ==
          doctest::Approx(one.tau_s(0)).epsilon(1e-12));

    // Per-sample dominance: removing the delay shortens every attempt.
    McChain on1(one, true);
    for (std::uint64_t i = 0; i < 5000; ++i) {
        Rng a = stream_for(3, i), b = stream_for(3, i);
        const AttemptRecord fast = simulate_parallel_attempt(off1, a);
        const AttemptRecord slow = simulate_parallel_attempt(on1, b);
        CHECK(fast.duration_s < slow.duration_s);
        CHECK(fast.idle_fidelity_s <= slow.idle_fidelity_s);
    }
}

TEST_CASE("estimate") {
    // Bit-identical reruns.
    ChainSpec chain = make_chain({45.0, 70.0}, 0.02, 0.03);
    McConfig config{.n_samples = 20000, .seed = 77};
    const PerformanceReport a = estimate(chain, Protocol::parallel, config);
    const PerformanceReport b = estimate(chain, Protocol::parallel, config);
    CHECK(a.ebit_rate_hz == b.ebit_rate_hz);
    CHECK(a.skr_hz == b.skr_hz);
    CHECK(a.mean_dec_fidelity == b.mean_dec_fidelity);

    // Sequential estimates agree with the closed forms on random chains.
    Rng rng(57);
    for (int trial = 0; trial < 5; ++trial) {
        ChainSpec c = random_chain(rng);
        McConfig mc{.n_samples = 200000,
                    .seed = static_cast<std::uint64_t>(1000 + trial)};
        const PerformanceReport report = estimate(c, Protocol::sequential, mc);
        const AnalyticResult exact = evaluate_sequential_stats(c);
        CHECK(std::abs(report.mean_duration_s - exact.mean_duration_s) <
              3.0 * report.stderr_duration_s);
        CHECK(std::abs(report.mean_dec_fidelity -
                       exact.mean_decoherence_fidelity) <
              3.0 * report.stderr_dec_fidelity + 1e-12);
        CHECK(std::abs(report.mean_dec_skr - exact.mean_decoherence_skr) <
              3.0 * report.stderr_dec_skr + 1e-12);
    }

    // The parallel protocol is at least as fast as the sequential one.
    ChainSpec two = make_uniform_chain(200.0, 2, 0.1);
    McConfig mc{.n_samples = 100000, .seed = 5};
    const PerformanceReport seq = estimate(two, Protocol::sequential, mc);
    const PerformanceReport par = estimate(two, Protocol::parallel, mc);
    CHECK(par.ebit_rate_hz >
          seq.ebit_rate_hz - 3.0 * (seq.stderr_rate + par.stderr_rate));

    // Removing classical delay speeds both protocols up at fixed seed.
    for (Protocol protocol : {Protocol::sequential, Protocol::parallel}) {
        McConfig on{.n_samples = 50000, .seed = 11, .classical_delay = true};
        McConfig off{.n_samples = 50000, .seed = 11, .classical_delay = false};
        CHECK(estimate(two, protocol, off).ebit_rate_hz >
              estimate(two, protocol, on).ebit_rate_hz);
    }

    // Longer links never raise the rate (3-stderr slack).
    Rng lrng(61);
    for (int trial = 0; trial < 5; ++trial) {
        ChainSpec base = random_chain(lrng, 4);
        ChainSpec longer = base;
        longer.links[lrng.next() % longer.links.size()].length_km += 15.0;
        McConfig mcl{.n_samples = 50000,
                     .seed = static_cast<std::uint64_t>(400 + trial)};
        const PerformanceReport r1 = estimate(base, Protocol::parallel, mcl);
        const PerformanceReport r2 = estimate(longer, Protocol::parallel, mcl);
        CHECK(r2.ebit_rate_hz <=
              r1.ebit_rate_hz + 3.0 * (r1.stderr_rate + r2.stderr_rate));
    }

    // Infeasible cutoff degrades to a flagged zero-rate report.
    ChainSpec blocked = make_chain({50.0, 140.0}, 0.01, 1e-4);
    const PerformanceReport flagged =
        estimate(blocked, Protocol::sequential, McConfig{.n_samples = 10});
    CHECK(flagged.infeasible_cutoff);
    CHECK(flagged.ebit_rate_hz == 0.0);
}
