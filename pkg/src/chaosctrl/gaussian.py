"""Exact Gaussian-sector dynamics under the stochastic squeeze/control channel.

States live in the stretching/contracting quadrature basis of the inverted
oscillator.  The chaotic step multiplies the unstable variance by e^{2 kappa}
and the stable one by e^{-2 kappa}; the control step is a pure-loss attenuator
that contracts the whole covariance toward the vacuum value 1/2.  Because both
maps send Gaussians to Gaussians, a trajectory is just (mean, 2x2 covariance)
and can be sampled exactly, with the vacuum fidelity as the order parameter.

Ensembles are evolved internally in (ln sigma+, ln sigma-, sigma12) so the
uncontrolled phase never overflows; fidelities are likewise evaluated in logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams
from .rng import KahanSum, block_uniforms

LN_HALF = math.log(0.5)
#: Heisenberg floor for det(cov); states must satisfy det >= 1/4.
UNCERTAINTY_FLOOR = 0.25
_DET_SLACK = 1e-12
#: sigma beyond e^700 is not representable as a float; ensembles flag it.
OVERFLOW_LOG = 700.0


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance of one Gaussian trajectory.

    ``cov`` is indexed as [[sigma_plus, sigma_12], [sigma_12, sigma_minus]]
    in the (v+, v-) quadrature basis.
    """

    mean: tuple[float, float] = (0.0, 0.0)
    cov: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(2))

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError("cov must be a 2x2 matrix")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * (1.0 + abs(cov[0, 1])):
            raise ValueError("cov must be symmetric")
        if cov[0, 0] <= 0.0 or cov[1, 1] <= 0.0:
            raise ValueError("diagonal covariances must be positive")
        if self.det < UNCERTAINTY_FLOOR - _DET_SLACK:
            raise ValueError(
                f"covariance violates the uncertainty bound: det={self.det}"
            )
        object.__setattr__(self, "cov", cov)

    @property
    def sigma_plus(self) -> float:
        return float(self.cov[0, 0])

    @property
    def sigma_minus(self) -> float:
        return float(self.cov[1, 1])

    @property
    def sigma_12(self) -> float:
        return float(self.cov[0, 1])

    @property
    def det(self) -> float:
        return float(self.cov[0, 0] * self.cov[1, 1] - self.cov[0, 1] ** 2)


def vacuum_state() -> GaussianState:
    """The control target: zero mean, cov = I/2."""
    return GaussianState()


def squeezed_state(log_offset: float) -> GaussianState:
    """Pure squeezed vacuum with ln(sigma+) = ln(1/2) + log_offset."""
    s = 0.5 * math.exp(log_offset)
    return GaussianState(cov=np.diag([s, 0.25 / s]))


def apply_squeeze(state: GaussianState, kappa: float) -> GaussianState:
    """One chaotic step: stretch v+ by e^kappa and compress v- by e^-kappa.

    Leaves sigma_12 and det(cov) unchanged (the map is area preserving).
    """
    if not kappa > 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    e = math.exp(kappa)
    mean = (state.mean[0] * e, state.mean[1] / e)
    cov = state.cov.copy()
    cov[0, 0] *= e * e
    cov[1, 1] /= e * e
    return GaussianState(mean=mean, cov=cov)


def apply_control_gaussian(state: GaussianState, gamma: float) -> GaussianState:
    """One reset step: cov -> e^{-2 gamma} cov + (1 - e^{-2 gamma})/2 * I.

    The additive term carries the vacuum noise of the measurement ancilla and
    keeps det(cov) >= 1/4.  The fixed point is the vacuum.
    """
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    a = math.exp(-2.0 * gamma)
    root_a = math.exp(-gamma)
    mean = (state.mean[0] * root_a, state.mean[1] * root_a)
    cov = a * state.cov + 0.5 * (1.0 - a) * np.eye(2)
    return GaussianState(mean=mean, cov=cov)


def fidelity_rho00(state: GaussianState) -> float:
    """Vacuum fidelity of a zero-mean Gaussian state.

    Returns 1/sqrt((sigma+ + 1/2)(sigma- + 1/2) - sigma_12^2), which reduces
    to the diagonal formula when sigma_12 = 0.  States with nonzero mean are
    rejected; the mean sector is classical and handled separately.
    """
    if state.mean != (0.0, 0.0):
        raise ValueError("vacuum fidelity is defined here only for zero-mean states")
    return float(
        _log_fidelity(
            math.log(state.sigma_plus),
            math.log(state.sigma_minus),
            np.asarray(state.sigma_12),
        )
    )


def _log_fidelity(y_plus, y_minus, sigma_12) -> np.ndarray:
    """rho00 from log-variances; stable for arbitrarily large sigma+."""
    l1 = np.logaddexp(y_plus, LN_HALF)
    l2 = np.logaddexp(y_minus, LN_HALF)
    cross = np.square(sigma_12) * np.exp(-(l1 + l2))
    return np.exp(-0.5 * (l1 + l2 + np.log1p(-cross)))


def step_stochastic(
    state: GaussianState, params: ChannelParams, rng: np.random.Generator
) -> GaussianState:
    """Apply the control map with probability p, otherwise the squeeze.

    Consumes exactly one uniform draw from ``rng``.
    """
    if rng.random() < params.p:
        return apply_control_gaussian(state, params.gamma)
    return apply_squeeze(state, params.kappa)


# ---------------------------------------------------------------------------
# Vectorized ensemble evolution


class _LogEnsemble:
    """Block of trajectories in (ln sigma+, ln sigma-, sigma12) coordinates."""

    def __init__(self, n: int, init: GaussianState):
        self.y_plus = np.full(n, math.log(init.sigma_plus))
        self.y_minus = np.full(n, math.log(init.sigma_minus))
        self.s12 = np.full(n, init.sigma_12)
        self.overflowed = np.zeros(n, dtype=bool)

    def step(self, control_mask: np.ndarray, params: ChannelParams) -> None:
        two_k = 2.0 * params.kappa
        ln_a = -2.0 * params.gamma
        # ln((1 - e^{-2 gamma}) / 2), the vacuum-noise floor of the reset map
        ln_b = math.log(-math.expm1(ln_a)) + LN_HALF
        ctrl = control_mask
        self.y_plus = np.where(
            ctrl, np.logaddexp(self.y_plus + ln_a, ln_b), self.y_plus + two_k
        )
        self.y_minus = np.where(
            ctrl, np.logaddexp(self.y_minus + ln_a, ln_b), self.y_minus - two_k
        )
        self.s12 = np.where(ctrl, self.s12 * math.exp(ln_a), self.s12)
        self.overflowed |= self.y_plus > OVERFLOW_LOG

    def rho00(self) -> np.ndarray:
        return _log_fidelity(self.y_plus, self.y_minus, self.s12)


@dataclass
class TrajectoryStats:
    """Time-resolved ensemble statistics of the stochastic evolution.

    ``log_sigma_plus_hist`` rows are normalized histograms of the log
    observable (ln sigma+ here; the cat-map runner stores ln<n+1/2> and says
    so in ``metadata['log_observable']``).  ``per_traj_log`` is optional and
    holds the raw per-trajectory log observable at each recorded time.
    """

    times: np.ndarray
    rho00_mean: np.ndarray
    var_log: np.ndarray
    hist_edges: np.ndarray
    log_sigma_plus_hist: np.ndarray
    metadata: dict
    per_traj_log: np.ndarray | None = None

    @property
    def tail_mean_rho00(self) -> float:
        return self.metadata["tail_mean_rho00"]


def _tail_slice(n_records: int, tail_fraction: float) -> slice:
    start = min(n_records - 1, int(math.ceil(n_records * (1.0 - tail_fraction))))
    return slice(start, n_records)


def run_ensemble(
    params: ChannelParams,
    n_traj: int,
    n_steps: int,
    init: GaussianState | None = None,
    seed: int = 0,
    record_every: int = 1,
    hist_L: int = 30,
    hist_bins_per_octave: int = 8,
    tail_fraction: float = 0.2,
    block_size: int = 4096,
    keep_traj_log: bool = False,
) -> TrajectoryStats:
    """Sample ``n_traj`` independent trajectories and aggregate statistics.

    Deterministic for a given seed: trajectory i always uses the stream keyed
    by (seed, i), and cross-block aggregation uses compensated sums.  The
    histogram bins are the same log-spaced lattice the fixed-point solver
    uses, so the two back ends can be compared bin by bin.

    Parameters
    ----------
    init:
        Starting state for every trajectory (vacuum by default).  Must have
        zero mean, since the recorded order parameter is the vacuum fidelity.
    record_every:
        Cadence of recorded statistics in steps.
    tail_fraction:
        Fraction of recorded times averaged into the late-time scalar
        reported in ``metadata['tail_mean_rho00']``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not 1 <= record_every <= n_steps:
        raise ValueError("record_every must lie in [1, n_steps]")
    init = init if init is not None else vacuum_state()
    if init.mean != (0.0, 0.0):
        raise ValueError("ensembles track vacuum fidelity and need zero-mean inits")

    from .distribution import grid_edges  # shared bin lattice; avoids a cycle

    edges = grid_edges(hist_L, hist_bins_per_octave)
    record_ts = np.arange(record_every, n_steps + 1, record_every)
    n_rec = record_ts.size

    rho_sum = KahanSum(n_rec)
    y_sum = KahanSum(n_rec)
    y_sqsum = KahanSum(n_rec)
    counts = np.zeros((n_rec, edges.size - 1), dtype=np.int64)
    per_traj = np.empty((n_rec, n_traj)) if keep_traj_log else None
    overflow_count = 0

    for start in range(0, n_traj, block_size):
        idx = np.arange(start, min(start + block_size, n_traj))
        draws = block_uniforms(seed, idx, n_steps)[0]
        ens = _LogEnsemble(idx.size, init)
        rec = 0
        rho_part = np.empty((n_rec, idx.size))
        y_part = np.empty((n_rec, idx.size))
        for t in range(1, n_steps + 1):
            ens.step(draws[:, t - 1] < params.p, params)
            if rec < n_rec and t == record_ts[rec]:
                rho_part[rec] = ens.rho00()
                y_part[rec] = ens.y_plus
                rec += 1
        rho_sum.add(rho_part.sum(axis=1))
        y_sum.add(y_part.sum(axis=1))
        y_sqsum.add(np.square(y_part).sum(axis=1))
        clipped = np.clip(y_part, edges[0], np.nextafter(edges[-1], -np.inf))
        for r in range(n_rec):
            counts[r] += np.histogram(clipped[r], bins=edges)[0]
        if per_traj is not None:
            per_traj[:, idx] = y_part
        overflow_count += int(ens.overflowed.sum())

    rho_mean = rho_sum.total / n_traj
    y_mean = y_sum.total / n_traj
    var_log = np.maximum(y_sqsum.total / n_traj - y_mean**2, 0.0)
    hists = counts / float(n_traj)

    tail = _tail_slice(n_rec, tail_fraction)
    meta = {
        "seed": seed,
        "n_traj": n_traj,
        "n_steps": n_steps,
        "record_every": record_every,
        "p": params.p,
        "kappa": params.kappa,
        "gamma": params.gamma,
        "log_observable": "ln_sigma_plus",
        "tail_fraction": tail_fraction,
        "tail_window_records": (tail.start, n_rec),
        "tail_mean_rho00": float(rho_mean[tail].mean()),
        "overflow_trajectories": overflow_count,
        "hist_L": hist_L,
        "hist_bins_per_octave": hist_bins_per_octave,
    }
    return TrajectoryStats(
        times=record_ts,
        rho00_mean=rho_mean,
        var_log=var_log,
        hist_edges=edges,
        log_sigma_plus_hist=hists,
        metadata=meta,
        per_traj_log=per_traj,
    )


def sample_log_sigma_plus(
    params: ChannelParams,
    n_traj: int,
    n_steps: int,
    seed: int = 0,
    init: GaussianState | None = None,
    block_size: int = 8192,
) -> np.ndarray:
    """Final-time ln(sigma+) samples for distribution-shape comparisons."""
    init = init if init is not None else vacuum_state()
    out = np.empty(n_traj)
    for start in range(0, n_traj, block_size):
        idx = np.arange(start, min(start + block_size, n_traj))
        draws = block_uniforms(seed, idx, n_steps)[0]
        ens = _LogEnsemble(idx.size, init)
        for t in range(n_steps):
            ens.step(draws[:, t] < params.p, params)
        out[idx] = ens.y_plus
    return out


def uncertainty_defect_random(
    n_traj: int,
    n_steps: int,
    seed: int = 0,
    kappa_range: tuple[float, float] = (0.05, 1.5),
    gamma_range: tuple[float, float] = (0.05, 1.5),
) -> float:
    """Worst det(cov) - 1/4 deficit over random channel sequences.

    Draws (p, kappa, gamma) independently per trajectory, starts from a
    generic correlated state, and checks the uncertainty bound after every
    channel application.  Returns the most negative det - 1/4 seen, so any
    value >= -1e-12 means the bound held throughout.
    """
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.0, 1.0, n_traj)
    two_k = 2.0 * rng.uniform(*kappa_range, n_traj)
    gamma = rng.uniform(*gamma_range, n_traj)
    ln_a = -2.0 * gamma
    ln_b = np.log(-np.expm1(ln_a)) + LN_HALF

    y_plus = np.full(n_traj, math.log(0.9))
    y_minus = np.full(n_traj, math.log(0.4))
    s12 = np.full(n_traj, 0.25)  # det = 0.2975, valid but not pure
    worst = 0.0
    for _ in range(n_steps):
        ctrl = rng.random(n_traj) < p
        y_plus = np.where(ctrl, np.logaddexp(y_plus + ln_a, ln_b), y_plus + two_k)
        y_minus = np.where(ctrl, np.logaddexp(y_minus + ln_a, ln_b), y_minus - two_k)
        s12 = np.where(ctrl, s12 * np.exp(ln_a), s12)
        det = np.exp(y_plus + y_minus) - s12**2
        worst = min(worst, float(det.min()) - UNCERTAINTY_FLOOR)
    return worst
