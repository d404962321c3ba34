#!/usr/bin/env python3
"""Order-parameter transition figure from a fixed-point run directory.

Panel (a): steady-state rho00(p) for each cutoff exponent L, the Monte Carlo
overlay when present, and a scaling-collapse inset using the manifest's
fitted exponents.  Panels (b) and (c): log-log size and time dependence at
the critical rate with the fitted power laws re-derived from the CSV; the
recomputed slopes must agree with the manifest fits to 1e-9.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from figlib import SchemaError, load_manifest, load_table, loglog_slope, run_script


def render(run_dir: Path, output: Path) -> None:
    manifest = load_manifest(run_dir)
    fits = manifest["results"].get("fits")
    if fits is None:
        raise SchemaError("manifest has no fitted exponents; rerun with fit enabled")
    p_c = fits["p_c"]
    data = load_table(run_dir, "data.csv", ["p", "L", "t", "rho00"])
    series = load_table(run_dir, "timeseries.csv", ["p", "L", "t", "rho00"])

    L_values = sorted(set(int(v) for v in data["L"]))
    fig = plt.figure(figsize=(10.5, 3.4))
    ax_a = fig.add_subplot(1, 3, 1)
    ax_b = fig.add_subplot(1, 3, 2)
    ax_c = fig.add_subplot(1, 3, 3)

    for L in L_values:
        m = data["L"] == L
        order = np.argsort(data["p"][m])
        ax_a.plot(data["p"][m][order], data["rho00"][m][order], "o-", ms=3,
                  label=f"L={L}")
    try:
        mc = load_table(run_dir, "mc.csv", ["p", "rho00"])
        order = np.argsort(mc["p"])
        ax_a.plot(mc["p"][order], mc["rho00"][order], "k--", label="trajectories")
    except SchemaError:
        pass
    ax_a.axvline(p_c, color="0.7", lw=0.8, zorder=0)
    ax_a.set_xlabel("p")
    ax_a.set_ylabel(r"$\bar\rho_{00}$")
    ax_a.legend(fontsize=7)

    inset = ax_a.inset_axes([0.55, 0.45, 0.42, 0.5])
    beta, nu = fits["beta"], fits["nu"]
    for L in L_values:
        m = data["L"] == L
        x = (data["p"][m] - p_c) * float(L) ** (1.0 / nu)
        y = data["rho00"][m] * float(L) ** beta
        order = np.argsort(x)
        inset.plot(x[order], y[order], ".-", ms=2, lw=0.6)
    inset.set_xlabel(r"$(p-p_c)L^{1/\nu}$", fontsize=6)
    inset.set_ylabel(r"$\bar\rho_{00}L^{\beta}$", fontsize=6)
    inset.tick_params(labelsize=5)

    # panel (b): size dependence at the critical rate
    at_pc = data["p"] == p_c
    if not np.any(at_pc):
        raise SchemaError(f"data.csv has no rows at p_c={p_c}")
    Ls = data["L"][at_pc]
    rho_L = data["rho00"][at_pc]
    order = np.argsort(Ls)
    Ls, rho_L = Ls[order], rho_L[order]
    slope_b, intercept_b = loglog_slope(Ls, rho_L)
    check_match(-slope_b, fits["beta"], "beta")
    ax_b.loglog(Ls, rho_L, "o")
    ax_b.loglog(Ls, np.exp(intercept_b) * Ls**slope_b, "k--",
                label=rf"$L^{{-{-slope_b:.3f}}}$")
    ax_b.set_xlabel("L")
    ax_b.set_ylabel(r"$\bar\rho_{00}(p_c)$")
    ax_b.legend(fontsize=7)

    # panel (c): time dependence at the critical rate
    lo, hi = fits.get("t_window") or (series["t"].min(), series["t"].max())
    win = (series["t"] >= lo) & (series["t"] <= hi)
    slope_c, intercept_c = loglog_slope(series["t"][win], series["rho00"][win])
    check_match(-1.0 / slope_c, fits["z"], "z")
    ax_c.loglog(series["t"], series["rho00"], "-", lw=0.8)
    ts = series["t"][win]
    ax_c.loglog(ts, np.exp(intercept_c) * ts**slope_c, "k--",
                label=rf"$t^{{{slope_c:.3f}}}$")
    ax_c.set_xlabel("t")
    ax_c.set_ylabel(r"$\bar\rho_{00}(t; p_c)$")
    ax_c.legend(fontsize=7)

    fig.suptitle(
        rf"$\kappa=\gamma={manifest['results']['kappa']:.3f}$: "
        rf"$\beta={fits['beta']:.3f}$, $z={fits['z']:.3f}$, $\nu={fits['nu']:.2f}$",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


def check_match(recomputed: float, manifest_value: float, name: str) -> None:
    if abs(recomputed - manifest_value) > 1e-9:
        raise SchemaError(
            f"recomputed {name}={recomputed!r} disagrees with manifest "
            f"{manifest_value!r}; run and figure are out of sync"
        )


if __name__ == "__main__":
    raise SystemExit(run_script(render, __doc__))
