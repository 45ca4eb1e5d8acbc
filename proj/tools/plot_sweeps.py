#!/usr/bin/env python3
"""Quick-look plots for qchain sweep outputs.

Usage: plot_sweeps.py <basename> [...]   (expects <basename>.csv + .json)

Minimal stub: one figure per output, dispatched on the experiment name in
the JSON metadata. Intended as a starting point, not a figure factory.
"""
import json
import sys

import matplotlib.pyplot as plt
import pandas as pd


def plot(base: str) -> None:
    df = pd.read_csv(base + ".csv")
    with open(base + ".json") as fh:
        meta = json.load(fh)
    experiment = meta["experiment"]
    fig, ax = plt.subplots(figsize=(6, 4))

    if experiment == "one_repeater_sweep":
        for scheme, g in df.groupby("scheme"):
            ax.semilogy(g.position_km, g.ebit_rate_hz, label=f"{scheme} rate")
            ax.semilogy(g.position_km, g.skr_hz, "--", label=f"{scheme} SKR")
        ax.set_xlabel("repeater position [km]")
        ax.set_ylabel("rate [1/s]")
    elif experiment == "cutoff_sweep":
        finite = df[df.cutoff_s != float("inf")]
        for (l, proto), g in finite.groupby(["l_e2e_km", "protocol"]):
            ax.semilogx(g.cutoff_s, g.skr_hz, label=f"{proto} {l:.0f} km")
        for (l, proto), g in df[df.cutoff_s == float("inf")].groupby(
                ["l_e2e_km", "protocol"]):
            ax.axhline(g.skr_hz.iloc[0], linestyle=":", linewidth=0.8)
        ax.set_xlabel("cutoff [s]")
        ax.set_ylabel("SKR [1/s]")
    elif experiment == "opt_skr_heatmap":
        pivot = df.pivot(index="tau_coh_s", columns="L_km", values="skr_hz")
        im = ax.pcolormesh(pivot.columns, pivot.index, pivot.values,
                           shading="nearest")
        ax.set_yscale("log")
        ax.set_xlabel("distance [km]")
        ax.set_ylabel("coherence time [s]")
        fig.colorbar(im, ax=ax, label="optimal SKR [1/s]")
    elif experiment == "feasible_region":
        for (f, mu, p, proto, mode), g in df.groupby(
                ["F", "mu", "p_link", "protocol", "cutoff_mode"]):
            style = "-" if mode == "cutoff" else "--"
            ax.semilogy(g.L_km, g.min_tau_coh_s, style,
                        label=f"({f},{mu},{p}) {mode}")
        ax.set_xlabel("distance [km]")
        ax.set_ylabel("minimal feasible coherence time [s]")
    elif experiment == "cc_delay_compare":
        for (proto, delay), g in df.groupby(["protocol", "classical_delay"]):
            style = "-" if delay == "on" else "--"
            ax.semilogy(g.l_e2e_km, g.skr_hz, style,
                        label=f"{proto} delay {delay}")
        ax.set_xlabel("distance [km]")
        ax.set_ylabel("SKR [1/s]")
    elif experiment == "random_placement":
        for (proto, cut), g in df.groupby(["protocol", "cutoff_s"]):
            tag = "no cutoff" if cut == float("inf") else f"cutoff {cut}"
            ax.hist(g.skr_hz, bins=30, density=True, histtype="step",
                    label=f"{proto}, {tag}")
        ax.set_xlabel("SKR [1/s]")
        ax.set_ylabel("density")
    elif experiment == "topology_study":
        for proto, g in df.groupby("protocol"):
            agg = g.groupby("tau_coh_s").skr_opt_hz.mean()
            ax.loglog(agg.index, agg.values, "o-", label=f"{proto} optimal")
            agg = g.groupby("tau_coh_s").skr_nocut_hz.mean()
            ax.loglog(agg.index, agg.values, "s--", label=f"{proto} no cutoff")
        ax.set_xlabel("coherence time [s]")
        ax.set_ylabel("mean SKR [1/s]")
    else:
        raise SystemExit(f"no plot recipe for {experiment}")

    ax.legend(fontsize=7)
    ax.set_title(experiment)
    fig.tight_layout()
    fig.savefig(base + ".png", dpi=150)
    print(f"{base}.png")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        raise SystemExit(__doc__)
    for name in sys.argv[1:]:
        plot(name.removesuffix(".csv").removesuffix(".json"))
