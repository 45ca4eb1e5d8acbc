#include "qchain/des.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <queue>
#include <vector>

namespace qchain {

namespace {

enum class EventKind : std::uint8_t {
    EmitPair,
    PhotonArrive,
    AckArrive,
    SwapDone,
    OutcomeArrive,
    CutoffExpire,
};

const char* kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::EmitPair: return "EmitPair";
        case EventKind::PhotonArrive: return "PhotonArrive";
        case EventKind::AckArrive: return "AckArrive";
        case EventKind::SwapDone: return "SwapDone";
        case EventKind::OutcomeArrive: return "OutcomeArrive";
        case EventKind::CutoffExpire: return "CutoffExpire";
    }
    return "?";
}

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::EmitPair;
    int node = 0;
    int link = 0;        // 1-based link id, 0 when not link-bound
    std::uint64_t tag = 0;   // ok/abort flag or timer generation
    std::uint64_t round = 0;
    std::uint64_t seq = 0;   // FIFO tie-break at equal times
};

struct EventCmp {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

struct Memory {
    bool occupied = false;
    double since = 0.0;
    std::uint64_t generation = 0;

    void stamp(double t) {
        occupied = true;
        since = t;
        ++generation;
    }
    void clear() {
        occupied = false;
        ++generation;
    }
};

struct NodeState {
    Memory left;    // qubit received from the left neighbour
    Memory right;   // local half of the pair sent rightward
    bool right_ack = false;
};

struct Stats {
    double sum_duration = 0.0, sumsq_duration = 0.0;
    double sum_dec_f = 0.0, sumsq_dec_f = 0.0;
    double sum_dec_s = 0.0, sumsq_dec_s = 0.0;
    std::uint64_t n = 0;

    void add(const AttemptRecord& rec, double tau_coh) {
        const double dec_f = std::exp(-rec.idle_fidelity_s / tau_coh);
        const double dec_s = std::exp(-rec.idle_skr_s / tau_coh);
        sum_duration += rec.duration_s;
        sumsq_duration += rec.duration_s * rec.duration_s;
        sum_dec_f += dec_f;
        sumsq_dec_f += dec_f * dec_f;
        sum_dec_s += dec_s;
        sumsq_dec_s += dec_s * dec_s;
        ++n;
    }
};

double stderr_of_mean(double sum, double sumsq, double n) {
    if (n < 2.0) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
}

class DesEngine {
public:
    DesEngine(const ChainSpec& chain, Protocol protocol,
              const DesConfig& config,
              const std::function<void(const AttemptRecord&)>* on_success)
        : chain_(chain),
          mc_(chain, config.classical_delay),
          protocol_(protocol),
          config_(config),
          rng_(config.seed),
          on_success_(on_success),
          n_links_(chain.link_count()),
          n_rep_(chain.repeater_count()),
          nodes_(chain.link_count() + 1),
          counts_(chain.link_count(), 0) {}

    PerformanceReport run(std::uint64_t n_successes) {
        if (chain_.has_cutoff() && !mc_.feasible_cutoff)
            return infeasible_cutoff_report();
        target_ = n_successes;
        start_iteration(0.0);
        while (stats_.n < target_ && !stalled_ && !queue_.empty()) {
            const Event ev = pop();
            dispatch(ev);
        }
        const double n = static_cast<double>(stats_.n);
        PerformanceReport report =
            n > 0.0 ? assemble_report(
                          chain_, stats_.sum_duration / n, stats_.sum_dec_f / n,
                          stats_.sum_dec_s / n, stats_.n,
                          stderr_of_mean(stats_.sum_duration,
                                         stats_.sumsq_duration, n),
                          stderr_of_mean(stats_.sum_dec_f, stats_.sumsq_dec_f, n),
                          stderr_of_mean(stats_.sum_dec_s, stats_.sumsq_dec_s, n))
                    : infeasible_cutoff_report();
        report.infeasible_cutoff = stalled_;
        return report;
    }

private:
    // ----- scheduling ---------------------------------------------------

    void schedule(double time, EventKind kind, int node, int link,
                  std::uint64_t tag) {
        queue_.push(Event{time, kind, node, link, tag, round_, seq_++});
    }

    Event pop() {
        Event ev = queue_.top();
        queue_.pop();
        if (config_.trace) {
            char line[160];
            std::snprintf(line, sizeof line, "%.12g,%s,%d,%d,%llu",
                          ev.time, kind_name(ev.kind), ev.node, ev.link,
                          static_cast<unsigned long long>(ev.tag));
            *config_.trace << line << '\n';
        }
        return ev;
    }

    double classical(double tau) const {
        return config_.classical_delay ? tau : 0.0;
    }

    // Distance from node j (> 0) back to the sender.
    double leftward_tau(int node) const { return mc_.prefix_tau[node - 1]; }

    // ----- iteration / round bookkeeping --------------------------------

    void start_iteration(double now) {
        iter_start_ = now;
        rounds_in_iteration_ = 0;
        start_round(now);
    }

    void start_round(double now) {
        if (++rounds_in_iteration_ > config_.stall_round_limit) {
            stalled_ = true;
            return;
        }
        ++round_;
        for (auto& node : nodes_) {
            node.left.clear();
            node.right.clear();
            node.right_ack = false;
        }
        std::fill(counts_.begin(), counts_.end(), 0);
        round_idle_ = 0.0;
        outcomes_ = 0;
        violated_ = false;
        if (protocol_ == Protocol::sequential) {
            schedule(now, EventKind::EmitPair, 0, 1, 0);
        } else {
            for (std::size_t j = 0; j <= n_rep_; ++j)
                schedule(now, EventKind::EmitPair, static_cast<int>(j),
                         static_cast<int>(j) + 1, 0);
        }
    }

    void complete(double now) {
        AttemptRecord rec;
        rec.attempt_counts = counts_;
        rec.duration_s = now - iter_start_;
        const double t_a = now - nodes_[0].right.since;
        const double t_b = now - nodes_[n_links_].left.since;
        rec.idle_skr_s = round_idle_;
        rec.idle_fidelity_s = round_idle_ + t_a + t_b;
        rec.success = true;
        stats_.add(rec, chain_.tau_coh_s);
        if (on_success_ && *on_success_) (*on_success_)(rec);
        if (stats_.n < target_) start_iteration(now);
    }

    // ----- event dispatch -----------------------------------------------

    void dispatch(const Event& ev) {
        // Aborted parallel rounds leave photons/acks in flight; drop them.
        if (protocol_ == Protocol::parallel && ev.round != round_) return;
        switch (ev.kind) {
            case EventKind::EmitPair: on_emit(ev); break;
            case EventKind::PhotonArrive: on_photon(ev); break;
            case EventKind::AckArrive: on_ack(ev); break;
            case EventKind::SwapDone: on_swap(ev); break;
            case EventKind::OutcomeArrive: on_outcome(ev); break;
            case EventKind::CutoffExpire: on_cutoff_expire(ev); break;
        }
    }

    void on_emit(const Event& ev) {
        const std::size_t l = static_cast<std::size_t>(ev.link);  // 1-based
        ++counts_[l - 1];
        NodeState& emitter = nodes_[ev.node];
        emitter.right.stamp(ev.time);
        // Loss is resolved at emission and revealed on arrival.
        const bool ok = rng_.uniform01() < mc_.p[l - 1];
        if (timers_armed() && ev.node >= 1)
            schedule(ev.time + armed_cutoff(), EventKind::CutoffExpire, ev.node,
                     ev.link, emitter.right.generation);
        schedule(ev.time + mc_.tau[l - 1], EventKind::PhotonArrive, ev.node + 1,
                 ev.link, ok ? 1 : 0);
    }

    void on_photon(const Event& ev) {
        const std::size_t l = static_cast<std::size_t>(ev.link);
        const double tau = mc_.tau[l - 1];
        if (ev.tag == 0) {  // lost photon; herald the failure to the emitter
            schedule(ev.time + classical(tau), EventKind::AckArrive,
                     ev.node - 1, ev.link, 0);
            return;
        }
        NodeState& node = nodes_[ev.node];
        node.left.stamp(ev.time);
        if (timers_armed() && static_cast<std::size_t>(ev.node) <= n_rep_)
            schedule(ev.time + armed_cutoff(), EventKind::CutoffExpire, ev.node,
                     -static_cast<int>(l), node.left.generation);
        schedule(ev.time + classical(tau), EventKind::AckArrive, ev.node - 1,
                 ev.link, 1);
        if (protocol_ == Protocol::sequential) {
            if (static_cast<std::size_t>(ev.node) <= n_rep_)
                schedule(ev.time, EventKind::EmitPair, ev.node, ev.link + 1, 0);
        } else {
            try_swap(ev.node, ev.time);
        }
    }

    void on_ack(const Event& ev) {
        const std::size_t l = static_cast<std::size_t>(ev.link);
        if (ev.tag == 1) {
            if (ev.node == 0) {
                if (n_rep_ == 0) complete(ev.time);
                return;  // sender just holds its qubit
            }
            nodes_[ev.node].right_ack = true;
            if (protocol_ == Protocol::sequential)
                schedule(ev.time, EventKind::SwapDone, ev.node, ev.link, 0);
            else
                try_swap(ev.node, ev.time);
            return;
        }
        // Failure herald back at the emitter. Only sequential links past the
        // first have an attempt window.
        const bool windowed = protocol_ == Protocol::sequential && l >= 2 &&
                              chain_.has_cutoff();
        if (!windowed || counts_[l - 1] < mc_.window[l - 1]) {
            schedule(ev.time, EventKind::EmitPair, ev.node, ev.link, 0);
        } else {
            // Window exhausted: the emitter's held qubit expires when its
            // cutoff timer runs out, then the failure travels to the sender.
            const double expiry =
                std::max(ev.time, nodes_[ev.node].left.since + mc_.cutoff);
            schedule(expiry, EventKind::CutoffExpire, ev.node, ev.link, 0);
        }
    }

    void try_swap(int node, double now) {
        NodeState& state = nodes_[node];
        if (state.left.occupied && state.right_ack)
            schedule(now, EventKind::SwapDone, node, 0, 0);
    }

    void on_swap(const Event& ev) {
        NodeState& state = nodes_[ev.node];
        const double idle_left = ev.time - state.left.since;
        const double idle_right = ev.time - state.right.since;
        if (protocol_ == Protocol::parallel && chain_.has_cutoff() &&
            config_.abort_policy == AbortPolicy::full_duration &&
            (idle_left > mc_.cutoff || idle_right > mc_.cutoff))
            violated_ = true;
        round_idle_ += idle_left + idle_right;
        state.left.clear();
        state.right.clear();
        state.right_ack = false;
        schedule(ev.time + classical(leftward_tau(ev.node)),
                 EventKind::OutcomeArrive, 0, ev.node, 0);
    }

    void on_outcome(const Event& ev) {
        if (ev.tag == 1) {  // sequential window failure reached the sender
            start_round(ev.time);
            return;
        }
        if (++outcomes_ < n_rep_) return;
        if (protocol_ == Protocol::parallel && chain_.has_cutoff() &&
            violated_) {
            start_round(ev.time);  // discarded attempt; try again
            return;
        }
        complete(ev.time);
    }

    void on_cutoff_expire(const Event& ev) {
        if (protocol_ == Protocol::sequential) {
            // Drop the held qubit and notify the sender to start over.
            nodes_[ev.node].left.clear();
            nodes_[ev.node].right.clear();
            schedule(ev.time + classical(leftward_tau(ev.node)),
                     EventKind::OutcomeArrive, 0, ev.node, 1);
            return;
        }
        // Parallel abort policies: valid only if the timer's memory is still
        // waiting. link > 0 tags a right memory, link < 0 a left memory.
        const Memory& mem = ev.link > 0 ? nodes_[ev.node].right
                                        : nodes_[ev.node].left;
        if (!mem.occupied || mem.generation != ev.tag) return;
        const double epoch =
            ev.time + (config_.abort_policy == AbortPolicy::abort_messaged
                           ? classical(mc_.tau_e2e)
                           : 0.0);
        start_round(epoch);
    }

    bool timers_armed() const {
        return protocol_ == Protocol::parallel && chain_.has_cutoff() &&
               config_.abort_policy != AbortPolicy::full_duration;
    }

    // A swap landing exactly at the cutoff passes (idle <= tau_cut), so the
    // timer fires just past it.
    double armed_cutoff() const { return mc_.cutoff * (1.0 + 1e-12); }

    // ----- members --------------------------------------------------------

    const ChainSpec& chain_;
    McChain mc_;
    Protocol protocol_;
    DesConfig config_;
    Rng rng_;
    const std::function<void(const AttemptRecord&)>* on_success_;

    std::size_t n_links_;
    std::size_t n_rep_;
    std::vector<NodeState> nodes_;  // 0 = sender, n_links_ = receiver
    std::vector<std::uint64_t> counts_;

    std::priority_queue<Event, std::vector<Event>, EventCmp> queue_;
    std::uint64_t seq_ = 0;
    std::uint64_t round_ = 0;
    std::uint64_t target_ = 0;
    std::uint64_t rounds_in_iteration_ = 0;
    bool stalled_ = false;

    double iter_start_ = 0.0;
    double round_idle_ = 0.0;
    std::size_t outcomes_ = 0;
    bool violated_ = false;
    Stats stats_;
};

}  // namespace

PerformanceReport run_des(const ChainSpec& chain, Protocol protocol,
                          const DesConfig& config, std::uint64_t n_successes) {
    validate(chain);
    DesEngine engine(chain, protocol, config, nullptr);
    return engine.run(n_successes);
}

PerformanceReport run_des_collect(
    const ChainSpec& chain, Protocol protocol, const DesConfig& config,
    std::uint64_t n_successes,
    const std::function<void(const AttemptRecord&)>& on_success) {
    validate(chain);
    DesEngine engine(chain, protocol, config, &on_success);
    return engine.run(n_successes);
}

}  // namespace qchain
