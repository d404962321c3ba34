#!/usr/bin/env python3
"""Cat-map versus Gaussian-engine order parameter, with the p_c(theta) inset.

Main panel: late-time rho00(p) of the quantized map for each Hilbert-space
dimension N (solid) against the matched Gaussian-sector curve (dashed) at the
kappa and gamma stored in the manifest.  Inset, when the run contains a
variance-peak scan: the estimated p_c(theta) with bootstrap error bars on top
of the analytic curve kappa / (kappa - ln cos(theta)).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from figlib import SchemaError, load_manifest, load_table, run_script


def tail_mean_by(keys_t_rho, key_cols, tail_fraction=0.25):
    """Late-time average of rho00 grouped by the requested key columns."""
    t = keys_t_rho["t"]
    out = {}
    keys = list(zip(*(keys_t_rho[c] for c in key_cols)))
    for key in sorted(set(keys)):
        mask = np.array([k == key for k in keys])
        times = t[mask]
        cut = times.min() + (1.0 - tail_fraction) * (times.max() - times.min())
        sel = mask & (t >= cut)
        out[key] = float(np.mean(keys_t_rho["rho00"][sel]))
    return out


def render(run_dir: Path, output: Path) -> None:
    manifest = load_manifest(run_dir)
    results = manifest["results"]
    kappa = results["kappa"]
    data = load_table(run_dir, "data.csv", ["N", "theta", "p", "t", "rho00_mean"])
    data = {**data, "rho00": data["rho00_mean"]}

    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for N in sorted(set(int(v) for v in data["N"])):
        mask = data["N"] == N
        sub = {k: v[mask] for k, v in data.items()}
        curve = tail_mean_by(sub, ["p"])
        ps = sorted(curve)
        ax.plot([k[0] for k in ps], [curve[k] for k in ps], "o-", ms=3,
                label=f"cat map N={N}")
    try:
        iho = load_table(run_dir, "iho.csv", ["theta", "p", "t", "rho00_mean"])
        iho = {**iho, "rho00": iho["rho00_mean"]}
        curve = tail_mean_by(iho, ["p"])
        ps = sorted(curve)
        ax.plot([k[0] for k in ps], [curve[k] for k in ps], "k--",
                label="Gaussian engine")
    except SchemaError:
        pass
    ax.axvline(results["p_c"], color="0.7", lw=0.8, zorder=0)
    ax.set_xlabel("p")
    ax.set_ylabel(r"$\bar\rho_{00}$ (late time)")
    ax.set_title(
        rf"$\theta={results['theta']}$, $\kappa=2\ln\varphi$, "
        rf"$\gamma={results['gamma']:.3f}$",
        fontsize=9,
    )
    ax.legend(fontsize=7, loc="upper left")

    estimates = results.get("pc_estimates")
    if estimates:
        inset = ax.inset_axes([0.62, 0.12, 0.36, 0.38])
        thetas = np.linspace(0.05, 1.5, 120)
        analytic = kappa / (kappa - np.log(np.cos(thetas)))
        inset.plot(thetas, analytic, "k--", lw=0.8)
        inset.errorbar(
            [e["theta"] for e in estimates],
            [e["p_hat"] for e in estimates],
            yerr=[e["stderr"] for e in estimates],
            fmt="o",
            ms=3,
            capsize=2,
        )
        inset.set_xlabel(r"$\theta$", fontsize=6)
        inset.set_ylabel(r"$p_c$", fontsize=6)
        inset.tick_params(labelsize=5)
        inset.set_ylim(0, 1)

    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


if __name__ == "__main__":
    raise SystemExit(run_script(render, __doc__))
