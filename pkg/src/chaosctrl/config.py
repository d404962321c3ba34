"""Experiment configuration: strict schema, canonical JSON, content hashing.

A run is described by one JSON object with an ``experiment`` kind plus the
keys that kind understands.  Unknown keys are rejected so that a typo cannot
silently change a run, and serialization is canonical (sorted keys) so that
parse(serialize(config)) round-trips and the content hash is stable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

EXPERIMENT_KINDS = (
    "trajectories",
    "fixed-point",
    "fp-predict",
    "eigenops",
    "catmap",
    "classical-ou",
    "equivalence",
)

_COMMON_KEYS = {"experiment", "seed", "out_dir", "record_every"}
_KIND_KEYS = {
    "trajectories": {
        "sets", "kappa", "gamma", "p", "n_traj", "n_steps",
        "init_log_offset", "hist_L", "hist_bins_per_octave", "tail_fraction",
    },
    "fixed-point": {
        "kappa", "gamma", "p_values", "L_values", "bins_per_octave", "tol",
        "max_iter", "time_series", "dump_marginal_at", "fit", "mc_overlay",
    },
    "fp-predict": {"kappa", "gamma", "p", "sigma_max", "n_points", "n_max"},
    "eigenops": {"kappa", "gamma", "p", "n_max"},
    "catmap": {
        "N_values", "theta", "p_values", "n_traj", "n_steps", "observable",
        "iho_overlay", "pc_scan",
    },
    "classical-ou": {"gamma_ou", "D_ou", "t_step", "kappa", "p", "n_traj", "n_steps"},
    "equivalence": {
        "kappa", "gamma_ou", "D_ou", "t_step", "p", "n_traj", "n_steps", "tolerance",
    },
}


_REQUIRED_KEYS = {
    "trajectories": (),  # either 'sets' or flat keys; checked in validate
    "fixed-point": ("kappa", "gamma", "p_values", "L_values"),
    "fp-predict": ("kappa", "gamma", "p"),
    "eigenops": ("kappa", "gamma", "p"),
    "catmap": ("N_values", "theta", "p_values"),
    "classical-ou": ("gamma_ou", "D_ou", "kappa", "p"),
    "equivalence": ("kappa", "gamma_ou", "D_ou", "p"),
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; ``data`` holds the full key set."""

    experiment: str
    seed: int
    data: dict

    @property
    def out_dir(self) -> str:
        return self.data.get("out_dir", "out")

    def get(self, key, default=None):
        return self.data.get(key, default)

    def serialize(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def content_hash(self) -> str:
        src = {k: v for k, v in self.data.items() if k != "out_dir"}
        digest = hashlib.sha256(
            json.dumps(src, sort_keys=True).encode()
        ).hexdigest()
        return digest[:12]


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig.

    Raises ConfigError for unknown kinds, unknown keys, or a broken shape;
    softer consistency issues are left to ``validate``.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    kind = data.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"unknown experiment {kind!r}; expected one of {EXPERIMENT_KINDS}"
        )
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {sorted(unknown)}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    diagnostics = validate(data)
    errors = [msg for level, msg in diagnostics if level == "error"]
    if errors:
        raise ConfigError("; ".join(errors))
    return ExperimentConfig(experiment=kind, seed=seed, data=dict(data))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


def validate(data: dict) -> list[tuple[str, str]]:
    """Static diagnostics: list of (level, message), never raises.

    Errors make a config unusable; warnings flag numerically awkward but
    legal choices, like a squeeze shift that is not a whole number of bins.
    """
    out: list[tuple[str, str]] = []
    kind = data.get("experiment")
    for key in _REQUIRED_KEYS.get(kind, ()):
        if data.get(key) is None:
            out.append(("error", f"{kind} requires {key}"))

    def _as_list(key):
        v = data.get(key)
        if v is None:
            return []
        return v if isinstance(v, list) else [v]

    for key in ("p", "p_values"):
        for p in _as_list(key):
            if not 0.0 <= float(p) <= 1.0:
                out.append(("error", f"{key} entry {p} outside [0, 1]"))
    for key in ("kappa", "gamma", "gamma_ou", "D_ou", "t_step", "tol"):
        v = data.get(key)
        if v is not None and not float(v) > 0.0:
            out.append(("error", f"{key} must be positive, got {v}"))
    if kind == "catmap":
        for n in _as_list("N_values"):
            if int(n) % 2 != 0 or int(n) < 4:
                out.append(("error", f"N must be even and >= 4, got {n}"))
        theta = data.get("theta")
        if theta is not None and not 0.0 < float(theta) <= math.pi / 2.0:
            out.append(("error", f"theta must lie in (0, pi/2], got {theta}"))
        if not _as_list("p_values"):
            out.append(("error", "catmap sweep needs a non-empty p_values"))
    if kind == "fixed-point":
        if not _as_list("p_values"):
            out.append(("error", "fixed-point sweep needs a non-empty p_values"))
        if not _as_list("L_values"):
            out.append(("error", "fixed-point sweep needs a non-empty L_values"))
        if data.get("fit") and not data.get("time_series"):
            out.append(("error", "fit requires a time_series section for the z fit"))
        kappa = data.get("kappa")
        bpo = data.get("bins_per_octave", 32)
        if kappa is not None and bpo:
            shift = 2.0 * float(kappa) / (math.log(2.0) / int(bpo))
            if abs(shift - round(shift)) > 1e-9:
                out.append(
                    (
                        "warning",
                        f"2*kappa is {shift:.3f} bins; the squeeze shift is "
                        "off-lattice and will be linearly interpolated",
                    )
                )
    if kind == "trajectories" and not data.get("sets"):
        if any(data.get(k) is None for k in ("kappa", "gamma", "p")):
            out.append(("error", "trajectories needs either 'sets' or kappa/gamma/p"))
    return out


def preset_names() -> list[str]:
    root = resources.files("chaosctrl").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    root = resources.files("chaosctrl").joinpath("presets")
    path = root.joinpath(f"{name}.json")
    if not path.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return parse_config(json.loads(path.read_text()))
