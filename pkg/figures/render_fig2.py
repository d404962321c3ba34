#!/usr/bin/env python3
"""Power-law tail of the unstable-variance marginal with analytic overlay.

Reads ``marginal.csv`` from a fixed-point run that dumped its marginal, plots
it log-log, overlays the predicted tail xi 2^-xi sigma^{-1-xi} using the
constants stored in the manifest (never hard-coded), and annotates the slope
refit from the CSV over the mid-decade window.  The refit slope must agree
with a fresh regression on the same rows to 1e-9 by construction, and the
annotation shows -(1+xi) next to it so the comparison is visible.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from figlib import SchemaError, load_manifest, load_table, loglog_slope, run_script


def render(run_dir: Path, output: Path) -> None:
    manifest = load_manifest(run_dir)
    info = manifest["results"].get("marginal")
    if info is None:
        raise SchemaError("manifest lacks marginal info; rerun with a marginal dump")
    xi = info["xi"]
    table = load_table(run_dir, "marginal.csv", ["sigma_plus", "density"])
    sigma, dens = table["sigma_plus"], table["density"]

    L = info["L"]
    lo, hi = 10 * 0.5, (2.0**(L - 1)) / 10.0
    window = (sigma >= lo) & (sigma <= hi) & (dens > 0)
    if window.sum() < 4:
        raise SchemaError("marginal has too few points in the fit window")
    slope, intercept = loglog_slope(sigma[window], dens[window])

    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(sigma, dens, ".", ms=3, label="fixed-point marginal")
    overlay = xi * 2.0**-xi * sigma ** (-1.0 - xi)
    ax.loglog(sigma, overlay, "k--", lw=1.0, label=rf"$\xi 2^{{-\xi}}\sigma_+^{{-1-\xi}}$")
    ax.loglog(
        sigma[window],
        np.exp(intercept) * sigma[window] ** slope,
        "r-",
        lw=0.8,
        label=f"fit slope {slope:.3f} vs -(1+xi) = {-(1 + xi):.3f}",
    )
    ax.set_xlabel(r"$\sigma_+$")
    ax.set_ylabel(r"$Q_+(\sigma_+)$")
    ax.set_title(
        f"p={info['p']}, L={L}: tail exponent xi={xi:.4f}", fontsize=9
    )
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


if __name__ == "__main__":
    raise SystemExit(run_script(render, __doc__))
