"""Classical noisy-control baseline: OU resets of Gaussian phase-space blobs.

The control step is an Ornstein-Uhlenbeck relaxation applied through its
exact Gaussian kernel (never by SDE time stepping), so means contract by
e^{-gamma t} and variances relax toward D/gamma.  With quantum-limited noise,
D/gamma = 1/2, the per-step variance map and the overlap order parameter
coincide exactly with the quantum Gaussian channel and its vacuum fidelity,
which is what ``equivalence_suite`` demonstrates trajectory by trajectory.

The comparison is phrased in the same stretching/contracting coordinates the
quantum module uses.  The overlap below is the normalized integral of the
trajectory distribution against the controlled steady-state blob (the bare
integral carries a prefactor gamma / (4 pi D) that the normalization absorbs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .rng import block_uniforms


@dataclass(frozen=True)
class ClassicalGaussian:
    """Zero-centered or displaced Gaussian blob in (v+, v-) coordinates."""

    mean: tuple[float, float] = (0.0, 0.0)
    variances: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.variances[0] <= 0.0 or self.variances[1] <= 0.0:
            raise ValueError("variances must be positive")


@dataclass(frozen=True)
class OUParams:
    """Relaxation rate, noise strength, and duration of one control pulse."""

    gamma_ou: float
    D_ou: float
    t_step: float = 1.0

    def __post_init__(self):
        if self.gamma_ou <= 0.0 or self.D_ou <= 0.0 or self.t_step <= 0.0:
            raise ValueError("gamma_ou, D_ou, and t_step must be positive")

    @property
    def noise_floor(self) -> float:
        """Stationary variance D/gamma of the OU process."""
        return self.D_ou / self.gamma_ou

    @property
    def quantum_limited(self) -> bool:
        return abs(self.noise_floor - 0.5) < 1e-12


def ou_control(g: ClassicalGaussian, ou: OUParams) -> ClassicalGaussian:
    """One control pulse via the exact OU kernel.

    mean -> e^{-gamma t} mean and each variance -> e^{-2 gamma t} sigma +
    (D/gamma)(1 - e^{-2 gamma t}); the stationary blob has variance D/gamma.
    """
    decay = math.exp(-ou.gamma_ou * ou.t_step)
    a = decay * decay
    floor = ou.noise_floor
    return ClassicalGaussian(
        mean=(g.mean[0] * decay, g.mean[1] * decay),
        variances=(
            a * g.variances[0] + floor * (1.0 - a),
            a * g.variances[1] + floor * (1.0 - a),
        ),
    )


def ou_control_n(g: ClassicalGaussian, ou: OUParams, n: int) -> ClassicalGaussian:
    """Closed form of n composed control pulses (oracle for drift checks)."""
    decay = math.exp(-ou.gamma_ou * ou.t_step * n)
    a = decay * decay
    floor = ou.noise_floor
    return ClassicalGaussian(
        mean=(g.mean[0] * decay, g.mean[1] * decay),
        variances=(
            a * g.variances[0] + floor * (1.0 - a),
            a * g.variances[1] + floor * (1.0 - a),
        ),
    )


def apply_stretch(g: ClassicalGaussian, kappa: float) -> ClassicalGaussian:
    """The chaotic map on a blob: variances scale by e^{+-2 kappa}."""
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    e2 = math.exp(2.0 * kappa)
    return ClassicalGaussian(
        mean=(g.mean[0] * math.exp(kappa), g.mean[1] * math.exp(-kappa)),
        variances=(g.variances[0] * e2, g.variances[1] / e2),
    )


def overlap_order_parameter(g: ClassicalGaussian, ou: OUParams) -> float:
    """Normalized overlap of a zero-mean blob with the controlled blob.

    Returns (2 D/gamma) / sqrt((D/gamma + sigma+)(D/gamma + sigma-)), which
    equals 1 when the blob sits at the noise floor and matches the quantum
    vacuum fidelity when D/gamma = 1/2.
    """
    if g.mean != (0.0, 0.0):
        raise ValueError("overlap comparison is defined for zero-mean blobs")
    floor = ou.noise_floor
    return (2.0 * floor) / math.sqrt(
        (floor + g.variances[0]) * (floor + g.variances[1])
    )


@dataclass
class EquivalenceReport:
    """Outcome of a matched classical/quantum run with shared randomness."""

    max_deviation: float
    deviation_by_step: np.ndarray
    steps: np.ndarray
    quantum_limited: bool
    tolerance: float
    matched: bool
    overlap_mean: np.ndarray
    rho00_mean: np.ndarray


def equivalence_suite(
    params: ChannelParams,
    ou: OUParams,
    n_traj: int = 64,
    n_steps: int = 300,
    seed: int = 0,
    tolerance: float = 1e-12,
) -> EquivalenceReport:
    """Run matched ensembles and report the worst order-parameter deviation.

    Both sides consume the same Bernoulli choice sequence per trajectory and
    start from the same vacuum-sized blob; the classical side evolves with the
    OU kernel and the quantum side with the reset channel at gamma = gamma_ou
    * t_step.  Starting both at the quantum vacuum matters: the overlap is
    scale invariant, so a detuned noise floor would be invisible if each side
    started at its own stationary blob.  A mismatch beyond ``tolerance`` is
    reported in ``matched``, not raised, since a detuned floor is a legitimate
    thing to measure.
    """
    from . import gaussian  # local import, keeps module load cheap

    gamma_q = ou.gamma_ou * ou.t_step

    worst = 0.0
    dev = np.zeros(n_steps)
    overlap_sum = np.zeros(n_steps)
    rho_sum = np.zeros(n_steps)
    for i in range(n_traj):
        draws = block_uniforms(seed, [i], n_steps)[0][0]
        blob = ClassicalGaussian(variances=(0.5, 0.5))
        state = gaussian.vacuum_state()
        for t in range(n_steps):
            if draws[t] < params.p:
                blob = ou_control(blob, ou)
                state = gaussian.apply_control_gaussian(state, gamma_q)
            else:
                blob = apply_stretch(blob, params.kappa)
                state = gaussian.apply_squeeze(state, params.kappa)
            ov = overlap_order_parameter(blob, ou)
            rho = gaussian.fidelity_rho00(state)
            overlap_sum[t] += ov
            rho_sum[t] += rho
            d = abs(ov - rho)
            dev[t] = max(dev[t], d)
            worst = max(worst, d)
    return EquivalenceReport(
        max_deviation=worst,
        deviation_by_step=dev,
        steps=np.arange(1, n_steps + 1),
        quantum_limited=ou.quantum_limited,
        tolerance=tolerance,
        matched=worst <= tolerance,
        overlap_mean=overlap_sum / n_traj,
        rho00_mean=rho_sum / n_traj,
    )
