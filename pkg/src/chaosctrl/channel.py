"""Parameters of the stochastic chaos/control channel.

Every back end in this package simulates the same two-map process: with
probability 1-p a squeeze of strength kappa stretches the unstable direction,
and with probability p a measurement-and-reset map of strength gamma pulls the
state back toward the target.  The control strength is tied to the measurement
angle theta by cos(theta) = exp(-gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# One application of the cat map stretches its unstable direction by
# phi^2 = e^kappa, with phi the golden ratio.
GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
KAPPA_GOLDEN = 2.0 * math.log(GOLDEN_RATIO)

# A commonly quoted rounded strength that does not equal 2*ln(phi); kept as a
# named constant so experiments can run both values (see README).
KAPPA_CAPTION = 0.42


def critical_rate(kappa: float, gamma: float) -> float:
    """Critical control rate kappa / (kappa + gamma) of the two-map process."""
    if kappa <= 0.0 or gamma <= 0.0:
        raise ValueError("kappa and gamma must be positive")
    if math.isinf(gamma):
        return 0.0
    return kappa / (kappa + gamma)


def p_star(n: float, kappa: float, gamma: float) -> float:
    """Control rate above which the order-n channel eigenvalue drops below 1.

    Evaluates (e^{n kappa} - 1) / (e^{n kappa} - e^{-n gamma}).  The n -> 0
    limit is the critical rate.  ``n`` may be fractional, which is convenient
    for limit checks.
    """
    if n <= 0.0:
        raise ValueError("n must be positive")
    if kappa <= 0.0 or gamma <= 0.0:
        raise ValueError("kappa and gamma must be positive")
    # expm1 keeps the small-argument limit accurate.
    num = math.expm1(n * kappa)
    den = num - math.expm1(-n * gamma)
    return num / den


@dataclass(frozen=True)
class ChannelParams:
    """Control rate and per-step strengths of the stochastic channel.

    Attributes
    ----------
    p : float
        Probability of applying the control map at each step, in [0, 1].
    kappa : float
        Squeeze strength per chaotic step (stretch factor e^kappa).
    gamma : float
        Control strength per reset step (contraction factor e^-gamma).
        ``math.inf`` is allowed and corresponds to theta = pi/2.
    """

    p: float
    kappa: float
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def from_theta(cls, p: float, kappa: float, theta: float) -> "ChannelParams":
        """Build params from the measurement angle, gamma = -ln(cos(theta))."""
        if not 0.0 < theta <= math.pi / 2.0:
            raise ValueError(f"theta must lie in (0, pi/2], got {theta}")
        c = math.cos(theta)
        gamma = math.inf if c <= 0.0 else -math.log(c)
        return cls(p=p, kappa=kappa, gamma=gamma)

    @property
    def theta(self) -> float:
        """Measurement angle in (0, pi/2]; satisfies cos(theta) = e^-gamma."""
        return math.acos(math.exp(-self.gamma))

    @property
    def p_c(self) -> float:
        return critical_rate(self.kappa, self.gamma)

    def with_p(self, p: float) -> "ChannelParams":
        return ChannelParams(p=p, kappa=self.kappa, gamma=self.gamma)
