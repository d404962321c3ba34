"""Closed-form drift-diffusion predictions for the log-variance random walk.

Away from the reflecting floor at sigma+ = 1/2, the unstable variance evolves
as a random multiplicative process, so y = ln(sigma+) performs a biased walk
with drift vbar = 2 kappa (p_c - p)/p_c and diffusion constant
D = 2 kappa^2 p (1-p)/p_c^2 per step.  This module evaluates the resulting
transient (log-normal) and steady-state (power-law) shapes, the critical
scaling laws, the ladder of moment-control thresholds, and the exact
coefficient functions of the continuum limit derived without the crude
multiplicative approximation.

The nominal step duration is set to 1 throughout, so kappa and gamma are the
only strength knobs; the per-step forms used here coincide exactly with the
rate-based forms 2 Omega - 2 p (Gamma + Omega) and 2 p (1-p)(Gamma + Omega)^2
under kappa = Omega, gamma = Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, critical_rate, p_star

Y_MIN = -math.log(2.0)


@dataclass(frozen=True)
class FPModel:
    """Drift-diffusion constants of the log-variance walk at one (p, kappa, gamma).

    ``xi`` is |vbar|/D, the tail exponent of the steady-state power law when
    p > p_c.  ``degenerate`` flags p in {0, 1}, where the walk has no noise.
    """

    vbar: float
    D: float
    xi: float
    pc: float
    y_min: float = Y_MIN
    degenerate: bool = False


def predict_constants(params: ChannelParams) -> FPModel:
    """Drift, diffusion, and tail exponent for the given channel."""
    pc = params.p_c
    vbar = 2.0 * params.kappa * (pc - params.p) / pc
    D = 2.0 * params.kappa**2 * params.p * (1.0 - params.p) / pc**2
    degenerate = params.p in (0.0, 1.0)
    xi = abs(vbar) / D if D > 0.0 else math.inf
    return FPModel(vbar=vbar, D=D, xi=xi, pc=pc, degenerate=degenerate)


def steady_state_density(model: FPModel, sigma_plus) -> np.ndarray:
    """Steady-state density xi 2^-xi sigma^{-1-xi} on sigma+ >= 1/2.

    Normalized to 1 on [1/2, inf); only exists in the controlled phase, so
    models with vbar >= 0 (p <= p_c) are rejected.
    """
    if model.degenerate or model.vbar >= 0.0:
        raise ValueError("no normalizable steady state at or below the critical rate")
    sigma = np.asarray(sigma_plus, dtype=float)
    if np.any(sigma < 0.5):
        raise ValueError("steady-state density is supported on sigma+ >= 1/2")
    xi = model.xi
    return xi * 2.0**-xi * sigma ** (-1.0 - xi)


def transient_density(model: FPModel, y, t: float) -> np.ndarray:
    """Gaussian spread of y - y(0) after t steps, far from the floor.

    Mean vbar * t and variance 2 D t (the variance of the underlying two-valued
    step distribution).  Valid while vbar t - 3 sqrt(2 D t) stays above the
    floor, i.e. while the walk has not felt the wall.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    var = 2.0 * model.D * t
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - model.vbar * t) ** 2) / (2.0 * var)) / math.sqrt(
        2.0 * math.pi * var
    )


def transient_sigma_density(model: FPModel, sigma_plus, t: float, sigma0: float = 0.5):
    """Log-normal form in sigma+: P(ln sigma - ln sigma0, t) / sigma."""
    sigma = np.asarray(sigma_plus, dtype=float)
    return transient_density(model, np.log(sigma / sigma0), t) / sigma


def critical_laws(model: FPModel, rtol: float = 1e-9) -> dict:
    """The two critical decay laws at p = p_c.

    At the critical rate the walk is unbiased, so the order parameter decays
    as t^{-1/2} in time and as 1/L with the cutoff exponent.  Only valid for a
    model at its critical point; call with |vbar| ~ 0.
    """
    if abs(model.vbar) > rtol * max(model.D, 1.0):
        raise ValueError("critical laws apply only at p = p_c (vbar = 0)")
    return {
        "rho00_time_exponent": 0.5,
        "rho00_L_exponent": 1.0,
        "validity": (
            "diffusive regime: time law before the cutoff is felt "
            "(t << (L ln2)^2 / D), size law at late times"
        ),
    }


@dataclass(frozen=True)
class MomentThresholds:
    """Paired control-rate ladders for moments and operator orders.

    ``p_fp[n-1]`` makes the n-th moment of the sigma+ distribution finite in
    the drift-diffusion picture (tail exponent xi = n); ``p_star[n-1]`` is the
    exact rate at which the order-n channel eigenvalue reaches 1.  The two
    agree to first order in kappa when compared as p_fp[n] vs p_star[2n].
    """

    n: np.ndarray
    p_fp: np.ndarray
    p_star: np.ndarray


def moment_threshold_fp(n: float, kappa: float, gamma: float) -> float:
    """Rate where the drift-diffusion tail exponent equals n (exact inversion).

    Solves xi(p) = (p - p_c) p_c / (kappa p (1 - p)) = n for p > p_c, a
    quadratic with one root in (p_c, 1).  Expands to
    p_c + (1 - p_c) n kappa + O(kappa^2) for weak maps.
    """
    if n <= 0.0:
        raise ValueError("n must be positive")
    pc = critical_rate(kappa, gamma)
    nk = n * kappa
    # nk p^2 + (pc - nk) p - pc^2 = 0
    disc = (pc - nk) ** 2 + 4.0 * nk * pc**2
    return ((nk - pc) + math.sqrt(disc)) / (2.0 * nk)


def moment_thresholds(params: ChannelParams, n_max: int) -> MomentThresholds:
    """Threshold ladders for n = 1 .. n_max; both are strictly increasing."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    ns = np.arange(1, n_max + 1)
    p_fp = np.array([moment_threshold_fp(int(n), params.kappa, params.gamma) for n in ns])
    p_st = np.array([p_star(int(n), params.kappa, params.gamma) for n in ns])
    return MomentThresholds(n=ns, p_fp=p_fp, p_star=p_st)


# ---------------------------------------------------------------------------
# Exact continuum-limit coefficients (no crude floor, smooth control map)


@dataclass(frozen=True)
class RefinedFPModel:
    """Coefficient functions of the exact continuum drift-diffusion equation.

    Uses x with sigma+ = e^x / 2 (x = 0 is the control point) and
    lambda_par = 1 - p_c.  ``h`` interpolates how strongly the floor correction
    acts on each map: h(2 kappa) = 0 (squeeze) and h(-2 gamma) = 1 (control).
    The coordinate z = ln(e^x - lambda_par) turns the equation into constant
    diffusion with drift vbar + 2 gamma p_c e^{-z}.
    """

    kappa: float
    gamma: float
    p: float

    @property
    def lambda_par(self) -> float:
        return 1.0 - critical_rate(self.kappa, self.gamma)

    @property
    def vbar(self) -> float:
        return 2.0 * self.kappa - 2.0 * self.p * (self.kappa + self.gamma)

    def r(self, x):
        return 1.0 - self.lambda_par * np.exp(-np.asarray(x, dtype=float))

    def h(self, v):
        v = np.asarray(v, dtype=float)
        return (self.gamma / v) * (v - 2.0 * self.kappa) / (self.gamma + self.kappa)

    def v(self, x):
        x = np.asarray(x, dtype=float)
        lam = self.lambda_par
        return (self.vbar + 2.0 * self.kappa * lam / (np.exp(x) - lam)) * self.r(x)

    def z(self, x):
        x = np.asarray(x, dtype=float)
        arg = np.exp(x) - self.lambda_par
        if np.any(arg <= 0.0):
            raise ValueError("z map needs e^x > 1 - p_c")
        return np.log(arg)

    def x_from_z(self, z):
        return np.log(np.exp(np.asarray(z, dtype=float)) + self.lambda_par)


def refined_coefficients(params: ChannelParams, x) -> dict:
    """Evaluate the exact coefficient functions at x (sigma+ = e^x / 2)."""
    model = RefinedFPModel(kappa=params.kappa, gamma=params.gamma, p=params.p)
    return {
        "r": model.r(x),
        "v": model.v(x),
        "h_chaos": float(model.h(2.0 * params.kappa)),
        "h_control": float(model.h(-2.0 * params.gamma)),
        "z": model.z(x),
        "lambda_par": model.lambda_par,
    }
