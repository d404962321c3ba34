"""Command-line entry point.

One subcommand per experiment kind plus ``validate``.  A run can start from a
checked-in preset (``--preset fig1``), a config file (``--config run.json``),
or bare flags; flags mirror config keys and override whatever they follow.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    load_preset,
    parse_config,
    preset_names,
    validate,
)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file to start from")
    sub.add_argument("--preset", help="named preset to start from")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--out", dest="out_dir", help="output root (default ./out)")
    sub.add_argument("--record-every", type=int, dest="record_every")


_FLAG_MAP = {
    "kappa": ("--kappa", float),
    "gamma": ("--gamma", float),
    "p": ("--p", float),
    "p_values": ("--p-values", _float_list),
    "L_values": ("--L", _int_list),
    "N_values": ("--n", _int_list),
    "theta": ("--theta", float),
    "n_traj": ("--traj", int),
    "n_steps": ("--steps", int),
    "bins_per_octave": ("--bins-per-octave", int),
    "tol": ("--tol", float),
    "n_max": ("--n-max", int),
    "observable": ("--observable", str),
    "init_log_offset": ("--init-log-offset", float),
    "gamma_ou": ("--gamma-ou", float),
    "D_ou": ("--d-ou", float),
    "t_step": ("--t-step", float),
    "tolerance": ("--tolerance", float),
}

_KIND_FLAGS = {
    "trajectories": ["kappa", "gamma", "p", "n_traj", "n_steps", "init_log_offset"],
    "fixed-point": ["kappa", "gamma", "p_values", "L_values", "bins_per_octave", "tol"],
    "fp-predict": ["kappa", "gamma", "p", "n_max"],
    "eigenops": ["kappa", "gamma", "p", "n_max"],
    "catmap": ["N_values", "theta", "p_values", "n_traj", "n_steps", "observable"],
    "classical-ou": ["gamma_ou", "D_ou", "t_step", "kappa", "p", "n_traj", "n_steps"],
    "equivalence": ["kappa", "gamma_ou", "D_ou", "t_step", "p", "n_traj", "n_steps"],
}

# catmap is commonly invoked with a single rate, so --p works alongside --p-values
_ALIASES = {
    "catmap": {"--p": ("p_values", lambda s: [float(s)])},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosctrl",
        description="Reproducible experiments for stochastic control of chaos",
    )
    parser.add_argument("--list-presets", action="store_true", help="list presets and exit")
    subs = parser.add_subparsers(dest="command")
    for kind, keys in _KIND_FLAGS.items():
        sub = subs.add_parser(kind, help=f"run a {kind} experiment")
        _add_common(sub)
        for key in keys:
            flag, conv = _FLAG_MAP[key]
            sub.add_argument(flag, dest=key, type=conv)
        for flag, (key, conv) in _ALIASES.get(kind, {}).items():
            if not any(flag == a.option_strings[0] for a in sub._actions):
                sub.add_argument(flag, dest=key, type=conv)
    val = subs.add_parser("validate", help="check a config and print diagnostics")
    _add_common(val)
    return parser


def _assemble_config(args, kind: str | None) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data = dict(load_config(args.config).data)
    elif getattr(args, "preset", None):
        data = dict(load_preset(args.preset).data)
    if kind is not None:
        if data and data.get("experiment") not in (None, kind):
            raise ConfigError(
                f"config is for {data.get('experiment')!r} but the "
                f"subcommand is {kind!r}"
            )
        data["experiment"] = kind
    for key in ("seed", "out_dir", "record_every", *_FLAG_MAP):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return parse_config(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name in preset_names():
            print(name)
        return 0
    if args.command is None:
        parser.print_help()
        return 2

    try:
        if args.command == "validate":
            if not (args.config or args.preset):
                raise ConfigError("validate needs --config or --preset")
            raw = (
                json.load(open(args.config))
                if args.config
                else dict(load_preset(args.preset).data)
            )
            diags = validate(raw)
            for level, msg in diags:
                print(f"{level}: {msg}")
            if not diags:
                print("ok")
            return 2 if any(level == "error" for level, _ in diags) else 0
        config = _assemble_config(args, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    from . import runner
    from .distribution import ConvergenceError, MassConservationError
    from .operators import DegenerateSpectrumError

    try:
        result = runner.run(config)
    except (ConvergenceError, MassConservationError, DegenerateSpectrumError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(result.run_dir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
