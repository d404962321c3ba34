"""Deterministic fixed point of the trajectory distribution on a log grid.

The ensemble of Gaussian trajectories induces a distribution Q(sigma+, sigma-)
that obeys a transfer equation: the new density is the p-weighted mixture of
the push-forwards under the control map and the squeeze.  On a grid that is
uniform in (ln sigma+, ln sigma-) the squeeze is a rigid shift and the control
map is a smooth contraction toward sigma = 1/2, so one iteration is a pair of
sparse 1D transfer operators applied along each axis.

The grid spans 2^{-L-1} < sigma < 2^{L-1} on both axes.  Mass that the squeeze
would push through the sigma+ upper or sigma- lower cutoff is clamped into the
boundary cell (a hard wall) and the clamped amount is reported per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .channel import ChannelParams

LN2 = math.log(2.0)


class MassConservationError(RuntimeError):
    """Raised when one transfer step loses or creates more than 1e-10 mass."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def grid_edges(L: int, bins_per_octave: int) -> np.ndarray:
    """Cell edges in y = ln(sigma), covering 2^{-L-1} .. 2^{L-1}."""
    if L < 1 or bins_per_octave < 1:
        raise ValueError("L and bins_per_octave must be positive")
    n = 2 * L * bins_per_octave
    return (-(L + 1) + 2 * L * np.arange(n + 1) / n) * LN2


@dataclass
class DistributionGrid:
    """Probability masses over (ln sigma+, ln sigma-) cells.

    ``density`` holds cell masses (not densities per unit length); axis 0 is
    the sigma+ direction.  ``clamped_mass`` and ``mass_defect`` describe the
    most recent transfer step that produced this grid.
    """

    L: int
    bins_per_octave: int
    density: np.ndarray
    y_edges: np.ndarray
    clamped_mass: float = 0.0
    mass_defect: float = 0.0

    @property
    def total_mass(self) -> float:
        return float(self.density.sum())

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[:-1] + self.y_edges[1:])

    @property
    def sigma_centers(self) -> np.ndarray:
        return np.exp(self.y_centers)

    def marginal_plus(self) -> np.ndarray:
        return self.density.sum(axis=1)

    def marginal_minus(self) -> np.ndarray:
        return self.density.sum(axis=0)


def _empty_grid(L: int, bins_per_octave: int) -> DistributionGrid:
    edges = grid_edges(L, bins_per_octave)
    n = edges.size - 1
    return DistributionGrid(L, bins_per_octave, np.zeros((n, n)), edges)


def vacuum_grid(L: int, bins_per_octave: int = 32) -> DistributionGrid:
    """Point mass in the cells adjacent to (sigma+, sigma-) = (1/2, 1/2).

    sigma = 1/2 sits on a cell edge, so the mass goes in the cell just above
    on the sigma+ axis and just below on the sigma- axis, matching where the
    dynamics confine the state.
    """
    g = _empty_grid(L, bins_per_octave)
    i_half = L * bins_per_octave  # cell whose lower edge is ln(1/2)
    g.density[i_half, i_half - 1] = 1.0
    return g


def uniform_grid(L: int, bins_per_octave: int = 32) -> DistributionGrid:
    g = _empty_grid(L, bins_per_octave)
    g.density[:, :] = 1.0 / g.density.size
    return g


# ---------------------------------------------------------------------------
# Sparse 1D transfer operators


def _transfer_matrix(y_edges: np.ndarray, pre_edges: np.ndarray) -> sp.csr_matrix:
    """Transfer matrix from preimage intervals, assuming uniform in-cell mass.

    ``pre_edges[j]..pre_edges[j+1]`` is the source interval (in y) whose image
    is destination cell j; the intervals must be non-decreasing and together
    cover the whole grid so that columns sum to one.
    """
    n = y_edges.size - 1
    delta = y_edges[1] - y_edges[0]
    rows, cols, vals = [], [], []
    for j in range(n):
        lo = max(pre_edges[j], y_edges[0])
        hi = min(pre_edges[j + 1], y_edges[-1])
        if hi <= lo:
            continue
        i0 = min(max(int(np.searchsorted(y_edges, lo, side="right")) - 1, 0), n - 1)
        i1 = min(max(int(np.searchsorted(y_edges, hi, side="left")) - 1, 0), n - 1)
        for i in range(i0, i1 + 1):
            ov = min(hi, y_edges[i + 1]) - max(lo, y_edges[i])
            if ov > 0.0:
                rows.append(j)
                cols.append(i)
                vals.append(ov / delta)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    # pin columns to be exactly stochastic; keeps per-step mass drift at eps
    colsum = np.asarray(m.sum(axis=0)).ravel()
    scale = np.where(colsum > 0.0, 1.0 / np.where(colsum > 0.0, colsum, 1.0), 1.0)
    return (m @ sp.diags(scale)).tocsr()


def _boundary_weights(y_edges: np.ndarray, threshold: float, upper: bool) -> np.ndarray:
    """Fraction of each cell beyond the threshold (mass the wall will clamp)."""
    delta = y_edges[1] - y_edges[0]
    lo, hi = y_edges[:-1], y_edges[1:]
    if upper:
        frac = (hi - np.maximum(lo, threshold)) / delta
    else:
        frac = (np.minimum(hi, threshold) - lo) / delta
    return np.clip(frac, 0.0, 1.0)


@dataclass(frozen=True)
class ChannelOps:
    """Per-axis transfer operators for one (kappa, gamma, grid) combination."""

    L: int
    bins_per_octave: int
    kappa: float
    gamma: float
    squeeze_plus: sp.csr_matrix
    squeeze_minus: sp.csr_matrix
    control: sp.csr_matrix
    clamp_plus: np.ndarray
    clamp_minus: np.ndarray
    shift_cells: float

    @property
    def lattice_shift_is_exact(self) -> bool:
        return abs(self.shift_cells - round(self.shift_cells)) < 1e-9


def build_channel_ops(
    kappa: float, gamma: float, L: int, bins_per_octave: int = 32
) -> ChannelOps:
    if not (kappa > 0.0 and gamma > 0.0 and math.isfinite(gamma)):
        raise ValueError("grid transfer needs finite positive kappa and gamma")
    edges = grid_edges(L, bins_per_octave)
    two_k = 2.0 * kappa
    if two_k >= edges[-1] - edges[0]:
        raise ValueError("2*kappa exceeds the grid span; increase L")

    up = edges - two_k
    up = np.append(up[:-1], np.inf)  # top cell absorbs overflow
    dn = edges + two_k
    dn = np.insert(dn[1:], 0, -np.inf)  # bottom cell absorbs overflow

    a = math.exp(-2.0 * gamma)
    b = 0.5 * (1.0 - a)
    s = np.exp(edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        ctrl = np.where(s > b, np.log(np.maximum(s - b, 1e-300) / a), -np.inf)

    delta = edges[1] - edges[0]
    return ChannelOps(
        L=L,
        bins_per_octave=bins_per_octave,
        kappa=kappa,
        gamma=gamma,
        squeeze_plus=_transfer_matrix(edges, up),
        squeeze_minus=_transfer_matrix(edges, dn),
        control=_transfer_matrix(edges, ctrl),
        clamp_plus=_boundary_weights(edges, edges[-1] - two_k, upper=True),
        clamp_minus=_boundary_weights(edges, edges[0] + two_k, upper=False),
        shift_cells=two_k / delta,
    )


def push_forward(
    grid: DistributionGrid,
    params: ChannelParams,
    ops: ChannelOps | None = None,
) -> DistributionGrid:
    """One transfer step: (1-p) * squeeze image + p * control image.

    Aborts if the step fails to conserve mass to 1e-10 (before the final
    renormalization, which only removes float roundoff).  The returned grid
    records the clamped boundary mass of this step.
    """
    if ops is None:
        ops = build_channel_ops(params.kappa, params.gamma, grid.L, grid.bins_per_octave)
    q = grid.density
    total_before = q.sum()

    q_sq = ops.squeeze_plus @ q
    q_sq = (ops.squeeze_minus @ q_sq.T).T
    q_ct = ops.control @ q
    q_ct = (ops.control @ q_ct.T).T
    q_new = (1.0 - params.p) * q_sq + params.p * q_ct

    total_after = q_new.sum()
    defect = abs(total_after - total_before)
    if defect > 1e-10:
        raise MassConservationError(
            f"transfer step changed total mass by {defect:.3e}"
        )
    q_new /= total_after

    clamped = (1.0 - params.p) * (
        float(ops.clamp_plus @ grid.marginal_plus())
        + float(ops.clamp_minus @ grid.marginal_minus())
    )
    return replace(grid, density=q_new, clamped_mass=clamped, mass_defect=defect)


def order_parameter(grid: DistributionGrid) -> float:
    """Vacuum fidelity averaged over the grid distribution."""
    f = 1.0 / np.sqrt(np.exp(grid.y_centers) + 0.5)
    return float(f @ grid.density @ f)


@dataclass
class SteadyStateResult:
    grid: DistributionGrid
    iterations: int
    residual: float
    rho00: float
    clamped_last: float
    clamped_total: float


def steady_state(
    params: ChannelParams,
    L: int,
    tol: float = 1e-9,
    bins_per_octave: int = 32,
    init: DistributionGrid | None = None,
    max_iter: int = 200_000,
    ops: ChannelOps | None = None,
) -> SteadyStateResult:
    """Iterate the transfer map until the L1 change drops below ``tol``."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if ops is None:
        ops = build_channel_ops(params.kappa, params.gamma, L, bins_per_octave)
    grid = init if init is not None else vacuum_grid(L, bins_per_octave)
    if grid.L != L or grid.bins_per_octave != bins_per_octave:
        raise ValueError("init grid does not match the requested lattice")
    clamped_total = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = push_forward(grid, params, ops)
        clamped_total += new.clamped_mass
        residual = float(np.abs(new.density - grid.density).sum())
        grid = new
        if residual < tol:
            return SteadyStateResult(
                grid=grid,
                iterations=it,
                residual=residual,
                rho00=order_parameter(grid),
                clamped_last=grid.clamped_mass,
                clamped_total=clamped_total,
            )
    raise ConvergenceError(
        f"no fixed point after {max_iter} iterations (last L1 change {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def evolve(
    params: ChannelParams,
    L: int,
    n_steps: int,
    bins_per_octave: int = 32,
    init: DistributionGrid | None = None,
    record_every: int = 1,
    ops: ChannelOps | None = None,
) -> tuple[np.ndarray, np.ndarray, DistributionGrid]:
    """Fixed-step evolution; returns (times, rho00(t), final grid)."""
    if ops is None:
        ops = build_channel_ops(params.kappa, params.gamma, L, bins_per_octave)
    grid = init if init is not None else vacuum_grid(L, bins_per_octave)
    times, rho = [], []
    for t in range(1, n_steps + 1):
        grid = push_forward(grid, params, ops)
        if t % record_every == 0:
            times.append(t)
            rho.append(order_parameter(grid))
    return np.asarray(times), np.asarray(rho), grid


def rho00_vs_p(
    kappa: float,
    gamma: float,
    p_values,
    L_values,
    bins_per_octave: int = 32,
    tol: float = 1e-9,
    max_iter: int = 200_000,
    warm_start: bool = True,
) -> list[dict]:
    """Sweep the steady-state order parameter over a (p, L) lattice.

    Returns one row per (p, L) with keys matching the CSV schema:
    p, L, t (iterations to converge), rho00, residual, clamped_mass.
    Within each L the sweep walks p downward and, when ``warm_start`` is on,
    reuses the previous fixed point as the next initial condition.
    """
    p_values = sorted(set(float(p) for p in p_values), reverse=True)
    rows = []
    for L in L_values:
        ops = build_channel_ops(kappa, gamma, L, bins_per_octave)
        grid = None
        for p in p_values:
            params = ChannelParams(p=p, kappa=kappa, gamma=gamma)
            res = steady_state(
                params,
                L,
                tol=tol,
                bins_per_octave=bins_per_octave,
                init=grid if warm_start else None,
                max_iter=max_iter,
                ops=ops,
            )
            grid = res.grid
            rows.append(
                {
                    "p": p,
                    "L": L,
                    "t": res.iterations,
                    "rho00": res.rho00,
                    "residual": res.residual,
                    "clamped_mass": res.clamped_last,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# 1D variant (the sigma+ marginal evolves autonomously under the same maps)


def steady_state_marginal(
    params: ChannelParams,
    L: int,
    tol: float = 1e-9,
    bins_per_octave: int = 32,
    max_iter: int = 200_000,
) -> np.ndarray:
    """Fixed point of the 1D sigma+ transfer map (masses per cell)."""
    ops = build_channel_ops(params.kappa, params.gamma, L, bins_per_octave)
    n = ops.clamp_plus.size
    q = np.zeros(n)
    q[L * bins_per_octave] = 1.0
    for _ in range(max_iter):
        q_new = (1.0 - params.p) * (ops.squeeze_plus @ q) + params.p * (ops.control @ q)
        q_new /= q_new.sum()
        if np.abs(q_new - q).sum() < tol:
            return q_new
        q = q_new
    raise ConvergenceError("1D fixed point did not converge", residual=np.nan, iterations=max_iter)


def marginal_sigma_density(grid: DistributionGrid) -> tuple[np.ndarray, np.ndarray]:
    """sigma+ marginal as a density per unit sigma at the cell centers."""
    delta = grid.y_edges[1] - grid.y_edges[0]
    sigma = grid.sigma_centers
    return sigma, grid.marginal_plus() / (sigma * delta)
