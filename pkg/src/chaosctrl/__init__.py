"""Stochastic control of chaos near an unstable fixed point, at desk scale.

Subpackage map:

* ``channel``      shared channel parameters (p, kappa, gamma, theta)
* ``gaussian``     exact Gaussian-sector trajectories and ensembles
* ``distribution`` fixed point of the trajectory distribution on a log grid
* ``fitting``      critical-exponent fits and curve collapse
* ``fokker_planck`` closed-form drift-diffusion predictions
* ``operators``    polynomial eigenoperators of the mixed channel
* ``catmap``       quantized cat map trajectories with Kraus control
* ``classical``    Ornstein-Uhlenbeck noisy-control baseline
* ``config``/``runner``/``cli``  reproducible experiment harness
"""

__version__ = "0.1.0"

from .channel import ChannelParams, critical_rate, p_star  # noqa: F401
