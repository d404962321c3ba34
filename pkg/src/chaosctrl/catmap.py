"""Full Hilbert-space trajectories of the quantized cat map under control.

The torus map [[2,1],[1,1]] is quantized on N states (N even) with an
effective Planck constant 1/(2 pi N); its propagator in the position basis is
a quadratic Gauss-sum kernel, unitary for every even N.  A localized number
basis at the unstable fixed point (0, 0) is the eigenbasis of the lattice
well H = 2 - cos(2 pi x) - cos(2 pi p), sorted by energy; ladder operators
act abstractly on that basis, a|n> = sqrt(n)|n-1>, and the measurement-and-
reset Kraus family is built from them and truncated to the N available
levels.  Trajectories stay pure: each control step samples one Kraus outcome
from its Born weight.

The chaotic stretch rate of this map is fixed at kappa = 2 ln(phi); the
control strength maps to gamma = -ln cos(theta), which is how runs here are
matched against the Gaussian-sector engine.

Position and momentum carry torus values Q/N and P/N; quadratic observables
use the wrapped displacement min(Q, N-Q)/N so that distance is measured to
the fixed point along the shorter way around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .channel import KAPPA_GOLDEN, ChannelParams, critical_rate
from .gaussian import TrajectoryStats, _tail_slice
from .rng import KahanSum, block_uniforms

#: Born-weight shortfall beyond which a trajectory is aborted rather than
#: silently renormalized.
BORN_DEFECT_LIMIT = 1e-6


def classical_map_eigenvalues() -> tuple[float, float]:
    """Stretch factors {phi^2, phi^-2} of the linearized torus map."""
    eigs = np.linalg.eigvals(np.array([[2.0, 1.0], [1.0, 1.0]]))
    return float(np.max(eigs)), float(np.min(eigs))


@dataclass
class CatMapSystem:
    """Propagator, localized number basis, and observables for one N."""

    N: int
    hbar: float
    U: np.ndarray          # propagator, position basis
    U_num: np.ndarray      # propagator, number basis
    basis: np.ndarray      # columns = number states in the position basis
    energies: np.ndarray
    torus_r2_num: np.ndarray  # wrapped x^2 + p^2, number basis
    unitarity_defect: float
    orthonormality_defect: float

    @property
    def kappa(self) -> float:
        return KAPPA_GOLDEN

    @property
    def number_values(self) -> np.ndarray:
        return np.arange(self.N, dtype=float)

    @property
    def ladder_down(self) -> np.ndarray:
        """a with a|n> = sqrt(n)|n-1> on the retained N levels."""
        a = np.zeros((self.N, self.N))
        idx = np.arange(1, self.N)
        a[idx - 1, idx] = np.sqrt(idx)
        return a


def build_system(N: int) -> CatMapSystem:
    """Construct and verify the quantized system for even N >= 4."""
    if N % 2 != 0 or N < 4:
        raise ValueError(f"N must be an even integer >= 4, got {N}")
    Q = np.arange(N)
    sq = Q.astype(np.int64) ** 2
    cross = (Q[None, :] - Q[:, None]).astype(np.int64) ** 2
    U = np.sqrt(1j / N) * np.exp((1j * np.pi / N) * (sq[:, None] + cross))

    unit_defect = float(np.max(np.abs(U.conj().T @ U - np.eye(N))))
    if unit_defect > 1e-10:
        raise RuntimeError(f"propagator failed the unitarity check: {unit_defect:.2e}")

    # momentum-basis transform <P|Q> and the lattice well
    F = np.exp(-2j * np.pi * np.outer(Q, Q) / N) / math.sqrt(N)
    angle = 2.0 * np.pi * Q / N
    Cp = F.conj().T @ (np.cos(angle)[:, None] * F)
    H = 2.0 * np.eye(N) - np.diag(np.cos(angle)) - Cp
    H = 0.5 * (H + H.conj().T)
    energies, basis = np.linalg.eigh(H)

    # deterministic phases: largest component of each state real positive
    pivots = np.argmax(np.abs(basis), axis=0)
    phases = basis[pivots, np.arange(N)]
    basis = basis * (np.abs(phases) / phases)[None, :]

    ortho_defect = float(np.max(np.abs(basis.conj().T @ basis - np.eye(N))))
    if ortho_defect > 1e-10:
        raise RuntimeError(f"number basis not orthonormal: {ortho_defect:.2e}")

    wrapped = np.minimum(Q, N - Q) / N
    r2_pos = np.diag(wrapped**2) + F.conj().T @ (wrapped[:, None] ** 2 * F)
    torus_r2_num = basis.conj().T @ r2_pos @ basis

    return CatMapSystem(
        N=N,
        hbar=1.0 / (2.0 * math.pi * N),
        U=U,
        U_num=basis.conj().T @ U @ basis,
        basis=basis,
        energies=energies,
        torus_r2_num=torus_r2_num,
        unitarity_defect=unit_defect,
        orthonormality_defect=ortho_defect,
    )


@dataclass
class PureState:
    """Normalized state in the number basis of a CatMapSystem."""

    amplitudes: np.ndarray
    truncation_flag: bool = False

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if abs(np.linalg.norm(amp) - 1.0) > 1e-12:
            raise ValueError("state must be normalized to 1e-12")
        self.amplitudes = amp

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def ground_state(system: CatMapSystem) -> PureState:
    amp = np.zeros(system.N, dtype=complex)
    amp[0] = 1.0
    return PureState(amp)


@dataclass
class KrausSet:
    """Measurement-and-reset Kraus family truncated to N levels.

    ``weights[m, n]`` is the Born probability of outcome m from number state
    n, a binomial in sin^2(theta); amplitudes carry the extra phase (-i)^m.
    Individual operators are assembled on demand, since storing all N of the
    N x N matrices is wasteful for large systems.
    """

    theta: float
    N: int
    weights: np.ndarray = field(init=False)
    sqrt_weights: np.ndarray = field(init=False)
    phases: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.theta <= math.pi / 2.0:
            raise ValueError("theta must lie in (0, pi/2]")
        n = np.arange(self.N)
        m = n[:, None]
        k = n[None, :]
        s2 = math.sin(self.theta) ** 2
        c2 = math.cos(self.theta) ** 2
        if c2 == 0.0:
            w = np.eye(self.N)
        else:
            with np.errstate(divide="ignore"):
                logw = (
                    gammaln(k + 1)
                    - gammaln(m + 1)
                    - gammaln(k - m + 1)
                    + m * math.log(s2)
                    + (k - m) * math.log(c2)
                )
            w = np.where(m <= k, np.exp(np.where(m <= k, logw, 0.0)), 0.0)
        self.weights = w
        self.sqrt_weights = np.sqrt(w)
        self.phases = (-1j) ** n

    def operator(self, m: int) -> np.ndarray:
        """K_m as a dense matrix in the number basis."""
        if not 0 <= m < self.N:
            raise ValueError("outcome index out of range")
        K = np.zeros((self.N, self.N), dtype=complex)
        cols = np.arange(m, self.N)
        K[cols - m, cols] = self.phases[m] * self.sqrt_weights[m, cols]
        return K

    def completeness_defect(self) -> float:
        """Max deviation of sum_m K_m^dag K_m from the identity.

        The binomial weights sum to (sin^2 + cos^2)^n = 1 on every retained
        level, so this is a pure roundoff diagnostic for the truncated set.
        """
        col = self.weights.sum(axis=0)
        return float(np.max(np.abs(col - 1.0)))

    def apply(self, amplitudes: np.ndarray, m: int) -> np.ndarray:
        out = np.zeros_like(amplitudes)
        out[: self.N - m] = (
            self.phases[m] * self.sqrt_weights[m, m:] * amplitudes[m:]
        )
        return out


def control_step(
    psi: PureState, kraus: KrausSet, rng: np.random.Generator
) -> tuple[PureState, int]:
    """Sample one measurement outcome by its Born weight and apply it.

    Weights are renormalized against the (tiny) truncation shortfall before
    sampling; a shortfall beyond 1e-6 marks the returned state instead of
    raising, so ensemble runners can drop the trajectory visibly.
    """
    dens = np.abs(psi.amplitudes) ** 2
    probs = kraus.weights @ dens
    total = float(probs.sum())
    flagged = total < 1.0 - BORN_DEFECT_LIMIT
    u = rng.random() * total
    m = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    m = min(m, kraus.N - 1)
    new = kraus.apply(psi.amplitudes, m)
    new /= np.linalg.norm(new)
    return PureState(new, truncation_flag=flagged or psi.truncation_flag), m


def run_catmap_ensemble(
    system: CatMapSystem,
    theta: float,
    p: float,
    n_traj: int,
    n_steps: int,
    seed: int = 0,
    record_every: int = 1,
    observable: str = "n",
    keep_traj_log: bool = False,
    tail_fraction: float = 0.25,
    block_size: int = 512,
) -> TrajectoryStats:
    """Stochastic trajectories: propagate with probability 1-p, else reset.

    Records the mean ground-state fidelity, the across-trajectory variance of
    the log observable (ln<n+1/2> by default, wrapped ln<x^2+p^2> with
    ``observable='xp'``), and per-trajectory values when requested.  Results
    are bit-reproducible for a given seed regardless of block size.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if observable not in ("n", "xp"):
        raise ValueError("observable must be 'n' or 'xp'")
    if not 1 <= record_every <= n_steps:
        raise ValueError("record_every must lie in [1, n_steps]")
    kraus = KrausSet(theta=theta, N=system.N)
    record_ts = np.arange(record_every, n_steps + 1, record_every)
    n_rec = record_ts.size

    rho_sum = KahanSum(n_rec)
    log_sum = KahanSum(n_rec)
    log_sqsum = KahanSum(n_rec)
    per_traj = np.empty((n_rec, n_traj)) if keep_traj_log else None
    n_flagged = 0
    born_min = 1.0
    nvals = system.number_values

    for start in range(0, n_traj, block_size):
        idx = np.arange(start, min(start + block_size, n_traj))
        k = idx.size
        channel_u, outcome_u = block_uniforms(seed, idx, n_steps, n_arrays=2)
        psi = np.zeros((system.N, k), dtype=complex)
        psi[0, :] = 1.0
        alive = np.ones(k, dtype=bool)
        rec = 0
        rho_part = np.empty((n_rec, k))
        log_part = np.empty((n_rec, k))
        for t in range(n_steps):
            ctrl = channel_u[:, t] < p
            if np.any(~ctrl):
                cols = np.flatnonzero(~ctrl)
                psi[:, cols] = system.U_num @ psi[:, cols]
            if np.any(ctrl):
                cols = np.flatnonzero(ctrl)
                dens = np.abs(psi[:, cols]) ** 2
                probs = kraus.weights @ dens
                totals = probs.sum(axis=0)
                born_min = min(born_min, float(totals.min()))
                bad = totals < 1.0 - BORN_DEFECT_LIMIT
                if np.any(bad):
                    n_flagged += int(bad.sum())
                    alive[cols[bad]] = False
                cum = np.cumsum(probs, axis=0)
                targets = outcome_u[cols, t] * totals
                ms = (cum < targets[None, :]).sum(axis=0)
                np.clip(ms, 0, system.N - 1, out=ms)
                for m in np.unique(ms):
                    sub = cols[ms == m]
                    block = np.zeros((system.N, sub.size), dtype=complex)
                    block[: system.N - m, :] = (
                        kraus.phases[m]
                        * kraus.sqrt_weights[m, m:, None]
                        * psi[m:, sub]
                    )
                    psi[:, sub] = block
            norms = np.linalg.norm(psi, axis=0)
            psi /= norms[None, :]
            if rec < n_rec and t + 1 == record_ts[rec]:
                dens_all = np.abs(psi) ** 2
                rho_part[rec] = dens_all[0]
                if observable == "n":
                    obs = nvals @ dens_all + 0.5
                else:
                    obs = np.einsum(
                        "ij,ij->j", psi.conj(), system.torus_r2_num @ psi
                    ).real
                log_part[rec] = np.log(np.maximum(obs, 1e-300))
                rec += 1
        if not np.all(alive):
            rho_part[:, ~alive] = np.nan
            log_part[:, ~alive] = np.nan
        rho_sum.add(np.nansum(rho_part, axis=1))
        log_sum.add(np.nansum(log_part, axis=1))
        log_sqsum.add(np.nansum(np.square(log_part), axis=1))
        if per_traj is not None:
            per_traj[:, idx] = log_part

    n_eff = n_traj - n_flagged
    rho_mean = rho_sum.total / n_eff
    log_mean = log_sum.total / n_eff
    var_log = np.maximum(log_sqsum.total / n_eff - log_mean**2, 0.0)

    hist_L = max(2, math.ceil(math.log2(system.N)) + 1)
    from .distribution import grid_edges

    edges = grid_edges(hist_L, 8)
    hists = np.zeros((n_rec, edges.size - 1))
    if per_traj is not None:
        clipped = np.clip(per_traj, edges[0], np.nextafter(edges[-1], -np.inf))
        for r in range(n_rec):
            hists[r] = np.histogram(clipped[r], bins=edges)[0] / n_traj

    tail = _tail_slice(n_rec, tail_fraction)
    meta = {
        "seed": seed,
        "n_traj": n_traj,
        "n_steps": n_steps,
        "record_every": record_every,
        "N": system.N,
        "hbar": system.hbar,
        "theta": theta,
        "p": p,
        "kappa": system.kappa,
        "gamma": ChannelParams.from_theta(p=p, kappa=system.kappa, theta=theta).gamma,
        "log_observable": "ln_n_plus_half" if observable == "n" else "ln_torus_r2",
        "tail_fraction": tail_fraction,
        "tail_window_records": (tail.start, n_rec),
        "tail_mean_rho00": float(np.mean(rho_mean[tail])),
        "completeness_defect": kraus.completeness_defect(),
        "born_weight_min": born_min,
        "aborted_trajectories": n_flagged,
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


@dataclass
class PcEstimate:
    """Variance-peak estimate of the critical rate for one control angle."""

    p_hat: float
    stderr: float
    p_grid: np.ndarray
    variance: np.ndarray
    interior_max: bool
    observable: str
    theta: float
    analytic: float


def _peak_location(p: np.ndarray, v: np.ndarray) -> tuple[float, bool]:
    i = int(np.argmax(v))
    interior = 0 < i < p.size - 1
    if not interior:
        return float(p[i]), False
    # quadratic refinement through the peak and its neighbors
    x0, x1, x2 = p[i - 1], p[i], p[i + 1]
    y0, y1, y2 = v[i - 1], v[i], v[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0.0:
        return float(x1), True
    vertex = -b / (2.0 * a)
    lo, hi = min(x0, x2), max(x0, x2)
    return float(np.clip(vertex, lo, hi)), True


def estimate_pc(
    system: CatMapSystem,
    theta: float,
    p_grid,
    n_traj: int = 400,
    n_steps: int = 240,
    seed: int = 0,
    record_every: int = 4,
    observable: str = "n",
    n_bootstrap: int = 100,
    tail_fraction: float = 0.25,
) -> PcEstimate:
    """Locate the control rate maximizing the trajectory-to-trajectory spread.

    Runs an ensemble at every grid rate and takes the across-trajectory
    variance of the log observable averaged over the late-time window (each
    trajectory contributes its window mean, so slow trajectory-to-trajectory
    disparities dominate over within-trajectory jitter); the peak is refined
    with a local parabola.  The error bar is the bootstrap spread of the peak
    over trajectory resampling.  A peak pinned to the edge of the grid is
    reported via ``interior_max=False`` rather than raised.
    """
    p_grid = np.sort(np.asarray(p_grid, dtype=float))
    if p_grid.size < 15 or p_grid.min() > 0.05 or p_grid.max() < 0.95:
        raise ValueError("p grid must span [0.05, 0.95] with at least 15 points")

    per_p = []
    variance = np.empty(p_grid.size)
    for i, p in enumerate(p_grid):
        stats = run_catmap_ensemble(
            system,
            theta,
            float(p),
            n_traj,
            n_steps,
            seed=seed + i,
            record_every=record_every,
            observable=observable,
            keep_traj_log=True,
            tail_fraction=tail_fraction,
        )
        tail = _tail_slice(stats.times.size, tail_fraction)
        window_means = stats.per_traj_log[tail].mean(axis=0)
        per_p.append(window_means)
        variance[i] = float(np.var(window_means))

    p_hat, interior = _peak_location(p_grid, variance)

    rng = np.random.default_rng(seed + 10_000)
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        idx = rng.integers(0, n_traj, size=n_traj)
        vb = np.array([float(np.var(d[idx])) for d in per_p])
        boots[b] = _peak_location(p_grid, vb)[0]
    kappa = system.kappa
    gamma = ChannelParams.from_theta(p=0.5, kappa=kappa, theta=theta).gamma
    return PcEstimate(
        p_hat=p_hat,
        stderr=float(np.std(boots)),
        p_grid=p_grid,
        variance=variance,
        interior_max=interior,
        observable=observable,
        theta=theta,
        analytic=critical_rate(kappa, gamma),
    )
