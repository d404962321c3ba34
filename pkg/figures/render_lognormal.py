#!/usr/bin/env python3
"""Early-time log-variance histograms against the predicted spreading Gaussian.

Reads the final-time histogram of ln(sigma+) for each trajectory set in the
run and overlays the drift-diffusion prediction, a Gaussian centered at
y0 + vbar * t with variance 2 D t, built entirely from manifest constants.
Shown log-log in sigma+ so the log-normal shape is the visible signature.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from figlib import SchemaError, load_manifest, load_table, run_script


def render(run_dir: Path, output: Path) -> None:
    manifest = load_manifest(run_dir)
    sets = manifest["results"].get("sets")
    if not sets:
        raise SchemaError("manifest lists no trajectory sets")
    hist = load_table(run_dir, "hist.csv", ["set", "y_lo", "y_hi", "density"])

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for spec in sets:
        i = spec["set"]
        mask = hist["set"] == i
        if not np.any(mask):
            raise SchemaError(f"hist.csv has no rows for set {i}")
        y = 0.5 * (hist["y_lo"][mask] + hist["y_hi"][mask])
        dens_y = hist["density"][mask]
        sigma = np.exp(y)
        color = colors[i % len(colors)]
        # measured density per unit sigma = density per unit y / sigma
        ax.loglog(sigma, dens_y / sigma, "o", ms=3, color=color,
                  label=f"set {i}: k={spec['kappa']}, g={spec['gamma']}, p={spec['p']}")
        t = spec["t_final"]
        mean = spec["y0"] + spec["vbar"] * t
        var = 2.0 * spec["D"] * t
        ys = np.linspace(mean - 4 * np.sqrt(var), mean + 4 * np.sqrt(var), 300)
        gauss = np.exp(-((ys - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
        ax.loglog(np.exp(ys), gauss / np.exp(ys), "-", lw=1.0, color=color)
    ax.set_xlabel(r"$\sigma_+$")
    ax.set_ylabel(r"$Q_+(\sigma_+, t)$")
    ax.set_title("early-time distribution vs drift-diffusion prediction", fontsize=9)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


if __name__ == "__main__":
    raise SystemExit(run_script(render, __doc__))
