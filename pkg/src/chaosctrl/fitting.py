"""Critical-exponent extraction from order-parameter tables.

The three exponents are fit exactly the way the figure scripts recompute
them, so plotted regressions and tabulated fits agree bit for bit:

* beta: unweighted least squares of ln(rho00) on ln(L) at the critical rate;
* z: the same regression of ln(rho00) on ln(t), slope = -1/z;
* nu: grid search minimizing the pairwise collapse residual of the scaled
  curves rho00 * L^beta against (p - p_c) * L^(1/nu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DynamicRangeError(ValueError):
    """The supplied table spans less than the required dynamic range."""


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Slope and intercept of log y against log x (the shared definition)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def _require_decade(values, what: str) -> None:
    values = np.asarray(values, dtype=float)
    span = values.max() / values.min()
    if span < 10.0:
        raise DynamicRangeError(
            f"{what} spans a factor {span:.2f}; need at least a decade"
        )


@dataclass
class CriticalFit:
    beta: float
    z: float
    nu: float
    fit_windows: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)


def fit_beta(L_values, rho_values) -> tuple[float, dict]:
    """Order-parameter exponent from rho00(L) at the critical rate."""
    _require_decade(L_values, "L")
    slope, intercept = fit_loglog_slope(L_values, rho_values)
    pred = np.exp(intercept) * np.asarray(L_values, float) ** slope
    resid = float(np.sqrt(np.mean((np.log(pred) - np.log(rho_values)) ** 2)))
    return -slope, {"rms_log_residual": resid, "intercept": intercept}


def fit_z(t_values, rho_values, t_window=None) -> tuple[float, dict]:
    """Dynamical exponent from rho00(t) at the critical rate."""
    t = np.asarray(t_values, dtype=float)
    rho = np.asarray(rho_values, dtype=float)
    if t_window is not None:
        m = (t >= t_window[0]) & (t <= t_window[1])
        t, rho = t[m], rho[m]
    _require_decade(t, "t")
    slope, intercept = fit_loglog_slope(t, rho)
    if slope >= 0.0:
        raise ValueError("rho00(t) does not decay over the fit window")
    pred = np.exp(intercept) * t**slope
    resid = float(np.sqrt(np.mean((np.log(pred) - np.log(rho)) ** 2)))
    return -1.0 / slope, {"rms_log_residual": resid, "window": t_window}


def collapse_residual(
    p_values, L_values, rho, p_c: float, beta: float, nu: float, x_max: float | None = None
) -> float:
    """Mean-square mismatch between scaled curves after the collapse.

    ``rho[i, j]`` is the order parameter at p_values[i] for L_values[j].  Each
    pair of sizes is compared on the overlap of their scaled abscissas by
    linear interpolation; ``x_max`` restricts to |x| <= x_max.
    """
    from scipy.interpolate import CubicSpline

    p = np.asarray(p_values, dtype=float)
    Ls = np.asarray(L_values, dtype=float)
    rho = np.asarray(rho, dtype=float)
    curves = []
    for j, L in enumerate(Ls):
        x = (p - p_c) * L ** (1.0 / nu)
        y = rho[:, j] * L**beta
        if x_max is not None:
            m = np.abs(x) <= x_max
            x, y = x[m], y[m]
        order = np.argsort(x)
        curves.append((x[order], y[order]))
    total, count, scale = 0.0, 0, []
    for j in range(len(curves)):
        scale.extend(curves[j][1])
    norm = float(np.var(scale)) or 1.0
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            xi, yi = curves[i]
            xj, yj = curves[j]
            lo = max(xi.min(), xj.min())
            hi = min(xi.max(), xj.max())
            if hi <= lo or xi.size < 4 or xj.size < 4:
                continue
            xs = np.linspace(lo, hi, 64)
            # cubic interpolation keeps coarse curves from biasing the fit
            di = CubicSpline(xi, yi)(xs)
            dj = CubicSpline(xj, yj)(xs)
            total += float(np.mean((di - dj) ** 2))
            count += 1
    if count == 0:
        raise ValueError("no overlapping scaled window between curves")
    return total / count / norm


def fit_nu(
    p_values, L_values, rho, p_c: float, beta: float,
    nu_grid=None, x_max: float | None = None,
) -> tuple[float, dict]:
    """Correlation-length exponent minimizing the collapse residual."""
    nu_grid = np.arange(0.5, 2.01, 0.025) if nu_grid is None else np.asarray(nu_grid)
    resid = np.empty(nu_grid.size)
    for i, nu in enumerate(nu_grid):
        try:
            resid[i] = collapse_residual(p_values, L_values, rho, p_c, beta, nu, x_max)
        except ValueError:
            resid[i] = np.inf  # window shrank below usable overlap at this nu
    if not np.any(np.isfinite(resid)):
        raise ValueError("no nu in the scan leaves overlapping scaled curves")
    best = int(np.argmin(resid))
    return float(nu_grid[best]), {"nu_grid": nu_grid, "residuals": resid}


def fit_exponents(
    size_table: tuple,
    time_table: tuple,
    sweep_table: tuple,
    p_c: float,
    t_window=None,
    x_max: float | None = None,
) -> CriticalFit:
    """Full exponent fit from the three tables.

    ``size_table`` is (L, rho00) at p_c, ``time_table`` is (t, rho00) at p_c,
    and ``sweep_table`` is (p, L, rho00[p, L]).  L and t (after windowing)
    must each span at least a decade.
    """
    beta, beta_info = fit_beta(*size_table)
    z, z_info = fit_z(*time_table, t_window=t_window)
    nu, nu_info = fit_nu(*sweep_table, p_c=p_c, beta=beta, x_max=x_max)
    return CriticalFit(
        beta=beta,
        z=z,
        nu=nu,
        fit_windows={"t_window": t_window, "x_max": x_max},
        residuals={
            "beta_rms_log": beta_info["rms_log_residual"],
            "z_rms_log": z_info["rms_log_residual"],
            "nu_collapse": float(np.min(nu_info["residuals"])),
        },
    )


def crossing_extrapolation(p_values, L_values, rho, exponent: float = 1.0) -> tuple[float, list]:
    """Critical-rate estimate from crossings of L^exponent * rho00 curves.

    Scaled curves for different L intersect at the critical rate up to
    finite-size drift; consecutive-size crossings are extrapolated linearly
    in 1/L.  Returns (estimate, crossing list).
    """
    p = np.asarray(p_values, dtype=float)
    Ls = list(L_values)
    rho = np.asarray(rho, dtype=float)
    crossings = []
    for j in range(len(Ls) - 1):
        ga = rho[:, j] * Ls[j] ** exponent
        gb = rho[:, j + 1] * Ls[j + 1] ** exponent
        diff = ga - gb
        best = None
        for i in range(len(p) - 1):
            if diff[i] == 0.0:
                cand = p[i]
            elif diff[i] * diff[i + 1] < 0.0:
                frac = diff[i] / (diff[i] - diff[i + 1])
                cand = p[i] + frac * (p[i + 1] - p[i])
            else:
                continue
            if best is None or abs(cand - np.median(p)) < abs(best - np.median(p)):
                best = cand
        if best is not None:
            crossings.append((math.sqrt(Ls[j] * Ls[j + 1]), best))
    if not crossings:
        raise ValueError("no crossing found; widen the p window")
    if len(crossings) == 1:
        return crossings[0][1], crossings
    inv_L = np.array([1.0 / L for L, _ in crossings])
    pcs = np.array([pc for _, pc in crossings])
    slope, intercept = np.polyfit(inv_L, pcs, 1)
    return float(intercept), crossings
