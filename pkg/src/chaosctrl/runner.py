"""Experiment orchestration: run a config, emit CSV tables and a manifest.

Every run lands in ``out/<experiment>/<config-hash>/`` and always contains
``data.csv`` and ``manifest.json``; some experiments add supplementary tables
(``timeseries.csv``, ``marginal.csv``, ``hist.csv``, ``iho.csv``, ``pc.csv``,
``mc.csv``, ``coeffs.json``).  CSV bodies are byte-stable for a fixed config
and seed; the only timestamp lives in the manifest.  Output directories are
built in a temporary sibling and swapped in atomically, so a failed run never
leaves a half-written run directory behind.
"""

from __future__ import annotations

import csv
import json
import math
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelParams, critical_rate, p_star
from .config import ExperimentConfig

SCHEMA_VERSION = 1

#: Documented columns per table; consumers must not rely on anything else.
CSV_SCHEMAS = {
    "trajectories/data.csv": ["set", "t", "rho00_mean", "var_log"],
    "trajectories/hist.csv": ["set", "y_lo", "y_hi", "density"],
    "fixed-point/data.csv": ["p", "L", "t", "rho00", "residual", "clamped_mass"],
    "fixed-point/timeseries.csv": ["p", "L", "t", "rho00"],
    "fixed-point/marginal.csv": ["sigma_plus", "density"],
    "fixed-point/mc.csv": ["p", "rho00"],
    "fp-predict/data.csv": ["sigma_plus", "q_plus"],
    "eigenops/data.csv": ["n", "p_star", "lambda_n"],
    "catmap/data.csv": ["N", "theta", "p", "t", "rho00_mean", "var_log_n"],
    "catmap/iho.csv": ["theta", "p", "t", "rho00_mean"],
    "catmap/pc.csv": ["theta", "p", "variance"],
    "classical-ou/data.csv": ["t", "overlap_mean"],
    "equivalence/data.csv": ["t", "rho00_quantum", "overlap_classical", "max_deviation"],
}


@dataclass
class RunResult:
    run_dir: Path
    manifest: dict


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run(config: ExperimentConfig) -> RunResult:
    """Execute one experiment and write its artifact bundle."""
    t_start = time.time()
    out_root = Path(config.out_dir) / config.experiment
    out_root.mkdir(parents=True, exist_ok=True)
    final_dir = out_root / config.content_hash()

    tmp_dir = Path(tempfile.mkdtemp(prefix=".tmp-", dir=out_root))
    try:
        results = _DISPATCH[config.experiment](config, tmp_dir)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "experiment": config.experiment,
            "seed": config.seed,
            "config": config.data,
            "code_version": __version__,
            "csv_schemas": {
                k.split("/", 1)[1]: v
                for k, v in CSV_SCHEMAS.items()
                if k.startswith(config.experiment + "/")
            },
            "results": results,
            "wall_time_s": round(time.time() - t_start, 3),
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with open(tmp_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise

    if final_dir.exists():
        stale = out_root / f".old-{os.getpid()}-{final_dir.name}"
        os.rename(final_dir, stale)
        os.rename(tmp_dir, final_dir)
        shutil.rmtree(stale, ignore_errors=True)
    else:
        os.rename(tmp_dir, final_dir)
    return RunResult(run_dir=final_dir, manifest=manifest)


# ---------------------------------------------------------------------------
# per-experiment drivers


def _run_trajectories(config: ExperimentConfig, out: Path) -> dict:
    from . import fokker_planck, gaussian

    sets = config.get("sets")
    if not sets:
        sets = [
            {
                "kappa": config.get("kappa"),
                "gamma": config.get("gamma"),
                "p": config.get("p"),
            }
        ]
    rows, hist_rows, set_meta = [], [], []
    for i, spec in enumerate(sets):
        params = ChannelParams(
            p=float(spec["p"]), kappa=float(spec["kappa"]), gamma=float(spec["gamma"])
        )
        offset = float(spec.get("init_log_offset", config.get("init_log_offset", 0.0)))
        init = gaussian.squeezed_state(offset) if offset else gaussian.vacuum_state()
        stats = gaussian.run_ensemble(
            params,
            n_traj=int(spec.get("n_traj", config.get("n_traj", 1000))),
            n_steps=int(spec.get("n_steps", config.get("n_steps", 200))),
            init=init,
            seed=config.seed + i,
            record_every=int(config.get("record_every", 1)),
            hist_L=int(config.get("hist_L", 30)),
            hist_bins_per_octave=int(config.get("hist_bins_per_octave", 8)),
            tail_fraction=float(config.get("tail_fraction", 0.2)),
        )
        for t, r, v in zip(stats.times, stats.rho00_mean, stats.var_log):
            rows.append([i, int(t), r, v])
        delta = stats.hist_edges[1] - stats.hist_edges[0]
        final = stats.log_sigma_plus_hist[-1]
        for b in np.flatnonzero(final > 0.0):
            hist_rows.append(
                [i, stats.hist_edges[b], stats.hist_edges[b + 1], final[b] / delta]
            )
        model = fokker_planck.predict_constants(params)
        set_meta.append(
            {
                "set": i,
                "kappa": params.kappa,
                "gamma": params.gamma,
                "p": params.p,
                "p_c": params.p_c,
                "vbar": model.vbar,
                "D": model.D,
                "init_log_offset": offset,
                "y0": math.log(0.5) + offset,
                "t_final": int(stats.times[-1]),
                "tail_mean_rho00": stats.metadata["tail_mean_rho00"],
                "overflow_trajectories": stats.metadata["overflow_trajectories"],
            }
        )
    _write_csv(out / "data.csv", CSV_SCHEMAS["trajectories/data.csv"], rows)
    _write_csv(out / "hist.csv", CSV_SCHEMAS["trajectories/hist.csv"], hist_rows)
    return {"sets": set_meta}


def _run_fixed_point(config: ExperimentConfig, out: Path) -> dict:
    from . import distribution, fitting

    kappa = float(config.get("kappa"))
    gamma = float(config.get("gamma"))
    p_values = [float(p) for p in config.get("p_values")]
    L_values = [int(L) for L in config.get("L_values")]
    bpo = int(config.get("bins_per_octave", 32))
    tol = float(config.get("tol", 1e-9))
    max_iter = int(config.get("max_iter", 200_000))
    p_c = critical_rate(kappa, gamma)

    rows = distribution.rho00_vs_p(
        kappa, gamma, p_values, L_values, bins_per_octave=bpo, tol=tol, max_iter=max_iter
    )
    _write_csv(
        out / "data.csv",
        CSV_SCHEMAS["fixed-point/data.csv"],
        [[r["p"], r["L"], r["t"], r["rho00"], r["residual"], r["clamped_mass"]] for r in rows],
    )
    results: dict = {
        "p_c": p_c,
        "kappa": kappa,
        "gamma": gamma,
        "bins_per_octave": bpo,
        "tol": tol,
        "L_values": L_values,
    }

    ts_spec = config.get("time_series")
    if ts_spec:
        L_ts = int(ts_spec["L"])
        n_steps = int(ts_spec["n_steps"])
        params = ChannelParams(p=ts_spec.get("p", p_c), kappa=kappa, gamma=gamma)
        times, rho_t, _ = distribution.evolve(
            params, L_ts, n_steps, bins_per_octave=bpo,
            record_every=int(ts_spec.get("record_every", 1)),
        )
        _write_csv(
            out / "timeseries.csv",
            CSV_SCHEMAS["fixed-point/timeseries.csv"],
            [[params.p, L_ts, int(t), r] for t, r in zip(times, rho_t)],
        )
        results["time_series"] = {"L": L_ts, "n_steps": n_steps, "p": params.p}

    dump = config.get("dump_marginal_at")
    if dump:
        params = ChannelParams(p=float(dump["p"]), kappa=kappa, gamma=gamma)
        L_dump = int(dump["L"])
        res = distribution.steady_state(
            params, L_dump, tol=tol, bins_per_octave=bpo, max_iter=max_iter
        )
        sigma, dens = distribution.marginal_sigma_density(res.grid)
        keep = dens > 0.0
        _write_csv(
            out / "marginal.csv",
            CSV_SCHEMAS["fixed-point/marginal.csv"],
            list(zip(sigma[keep], dens[keep])),
        )
        from . import fokker_planck

        model = fokker_planck.predict_constants(params)
        results["marginal"] = {
            "p": params.p,
            "L": L_dump,
            "xi": model.xi,
            "vbar": model.vbar,
            "D": model.D,
            "rho00": res.rho00,
        }

    mc = config.get("mc_overlay")
    if mc:
        from . import gaussian

        mc_rows = []
        for p in p_values:
            stats = gaussian.run_ensemble(
                ChannelParams(p=p, kappa=kappa, gamma=gamma),
                n_traj=int(mc["n_traj"]),
                n_steps=int(mc["n_steps"]),
                seed=config.seed,
                record_every=max(1, int(mc["n_steps"]) // 100),
            )
            mc_rows.append([p, stats.metadata["tail_mean_rho00"]])
        _write_csv(out / "mc.csv", CSV_SCHEMAS["fixed-point/mc.csv"], mc_rows)
        results["mc_overlay"] = dict(mc)

    fit_spec = config.get("fit")
    if fit_spec:
        by_L = {L: {} for L in L_values}
        for r in rows:
            by_L[r["L"]][r["p"]] = r["rho00"]
        if p_c not in {r["p"] for r in rows}:
            raise ValueError("fit requested but the sweep does not include p_c")
        Ls = sorted(L_values)
        beta, _ = fitting.fit_beta(Ls, [by_L[L][p_c] for L in Ls])
        t_window = fit_spec.get("t_window")
        z, _ = fitting.fit_z(times, rho_t, t_window=tuple(t_window) if t_window else None)
        grid = np.array([[by_L[L][p] for L in Ls] for p in sorted(p_values)])
        nu, _ = fitting.fit_nu(
            sorted(p_values), Ls, grid, p_c=p_c, beta=beta,
            x_max=fit_spec.get("x_max"),
        )
        results["fits"] = {
            "beta": beta,
            "z": z,
            "nu": nu,
            "p_c": p_c,
            "t_window": t_window,
            "x_max": fit_spec.get("x_max"),
        }
    return results


def _run_fp_predict(config: ExperimentConfig, out: Path) -> dict:
    from . import fokker_planck

    params = ChannelParams(
        p=float(config.get("p")),
        kappa=float(config.get("kappa")),
        gamma=float(config.get("gamma")),
    )
    model = fokker_planck.predict_constants(params)
    sigma_max = float(config.get("sigma_max", 1e12))
    n_points = int(config.get("n_points", 400))
    sigma = np.exp(np.linspace(math.log(0.5), math.log(sigma_max), n_points))
    dens = fokker_planck.steady_state_density(model, sigma)
    _write_csv(out / "data.csv", CSV_SCHEMAS["fp-predict/data.csv"], zip(sigma, dens))
    thresholds = fokker_planck.moment_thresholds(params, int(config.get("n_max", 5)))
    return {
        "p": params.p,
        "kappa": params.kappa,
        "gamma": params.gamma,
        "p_c": model.pc,
        "vbar": model.vbar,
        "D": model.D,
        "xi": model.xi,
        "p_fp": list(thresholds.p_fp),
        "p_star": list(thresholds.p_star),
    }


def _run_eigenops(config: ExperimentConfig, out: Path) -> dict:
    from . import operators

    params = ChannelParams(
        p=float(config.get("p")),
        kappa=float(config.get("kappa")),
        gamma=float(config.get("gamma")),
    )
    n_max = int(config.get("n_max", 10))
    rows, coeffs = [], {}
    for n in range(1, n_max + 1):
        rows.append(
            [n, p_star(n, params.kappa, params.gamma), operators.eigenvalue(n, params)]
        )
        coeffs[str(n)] = list(operators.build_Z(n, params).coeffs)
    _write_csv(out / "data.csv", CSV_SCHEMAS["eigenops/data.csv"], rows)
    with open(out / "coeffs.json", "w") as fh:
        json.dump(coeffs, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"n_max": n_max, "p": params.p, "kappa": params.kappa, "gamma": params.gamma}


def _run_catmap(config: ExperimentConfig, out: Path) -> dict:
    from . import catmap, gaussian

    theta = float(config.get("theta"))
    N_values = [int(n) for n in config.get("N_values")]
    p_values = [float(p) for p in config.get("p_values")]
    n_traj = int(config.get("n_traj", 400))
    n_steps = int(config.get("n_steps", 240))
    observable = config.get("observable", "n")
    record_every = int(config.get("record_every", 1))
    gamma = ChannelParams.from_theta(p=0.5, kappa=1.0, theta=theta).gamma

    rows, defects = [], {}
    for N in N_values:
        system = catmap.build_system(N)
        defects[str(N)] = {
            "hbar": system.hbar,
            "unitarity": system.unitarity_defect,
            "orthonormality": system.orthonormality_defect,
        }
        for j, p in enumerate(p_values):
            stats = catmap.run_catmap_ensemble(
                system, theta, p, n_traj, n_steps,
                seed=config.seed + j,
                record_every=record_every,
                observable=observable,
            )
            defects[str(N)]["completeness"] = stats.metadata["completeness_defect"]
            for t, r, v in zip(stats.times, stats.rho00_mean, stats.var_log):
                rows.append([N, theta, p, int(t), r, v])
    _write_csv(out / "data.csv", CSV_SCHEMAS["catmap/data.csv"], rows)
    results: dict = {
        "theta": theta,
        "gamma": gamma,
        "kappa": catmap.KAPPA_GOLDEN,
        "p_c": critical_rate(catmap.KAPPA_GOLDEN, gamma),
        "N_values": N_values,
        "defects": defects,
        "observable": observable,
    }

    overlay = config.get("iho_overlay")
    if overlay:
        iho_rows = []
        for j, p in enumerate(p_values):
            stats = gaussian.run_ensemble(
                ChannelParams(p=p, kappa=catmap.KAPPA_GOLDEN, gamma=gamma),
                n_traj=int(overlay.get("n_traj", 4000)),
                n_steps=n_steps,
                seed=config.seed + 500 + j,
                record_every=record_every,
                tail_fraction=0.25,
            )
            for t, r in zip(stats.times, stats.rho00_mean):
                iho_rows.append([theta, p, int(t), r])
        _write_csv(out / "iho.csv", CSV_SCHEMAS["catmap/iho.csv"], iho_rows)

    scan = config.get("pc_scan")
    if scan:
        system = catmap.build_system(int(scan.get("N", min(N_values))))
        grid = np.linspace(0.05, 0.95, int(scan.get("p_points", 19)))
        pc_rows, estimates = [], []
        for k, th in enumerate([float(t) for t in scan["thetas"]]):
            est = catmap.estimate_pc(
                system, th, grid,
                n_traj=int(scan.get("n_traj", n_traj)),
                n_steps=int(scan.get("n_steps", n_steps)),
                seed=config.seed + 1000 * (k + 1),
                record_every=int(scan.get("record_every", 8)),
                observable=scan.get("observable", observable),
            )
            for p, v in zip(est.p_grid, est.variance):
                pc_rows.append([th, p, v])
            estimates.append(
                {
                    "theta": th,
                    "p_hat": est.p_hat,
                    "stderr": est.stderr,
                    "analytic": est.analytic,
                    "interior_max": est.interior_max,
                }
            )
        _write_csv(out / "pc.csv", CSV_SCHEMAS["catmap/pc.csv"], pc_rows)
        results["pc_estimates"] = estimates
    return results


def _run_classical_ou(config: ExperimentConfig, out: Path) -> dict:
    from . import classical
    from .rng import block_uniforms

    ou = classical.OUParams(
        gamma_ou=float(config.get("gamma_ou")),
        D_ou=float(config.get("D_ou")),
        t_step=float(config.get("t_step", 1.0)),
    )
    kappa = float(config.get("kappa"))
    p = float(config.get("p"))
    n_traj = int(config.get("n_traj", 200))
    n_steps = int(config.get("n_steps", 200))
    floor = ou.noise_floor
    overlap_sum = np.zeros(n_steps)
    for i in range(n_traj):
        draws = block_uniforms(config.seed, [i], n_steps)[0][0]
        blob = classical.ClassicalGaussian(variances=(floor, floor))
        for t in range(n_steps):
            if draws[t] < p:
                blob = classical.ou_control(blob, ou)
            else:
                blob = classical.apply_stretch(blob, kappa)
            overlap_sum[t] += classical.overlap_order_parameter(blob, ou)
    overlap = overlap_sum / n_traj
    _write_csv(
        out / "data.csv",
        CSV_SCHEMAS["classical-ou/data.csv"],
        [[t + 1, o] for t, o in enumerate(overlap)],
    )
    return {
        "gamma_ou": ou.gamma_ou,
        "D_ou": ou.D_ou,
        "t_step": ou.t_step,
        "noise_floor": floor,
        "quantum_limited": ou.quantum_limited,
        "kappa": kappa,
        "p": p,
        "late_overlap": float(overlap[-max(1, n_steps // 5):].mean()),
    }


def _run_equivalence(config: ExperimentConfig, out: Path) -> dict:
    from . import classical

    ou = classical.OUParams(
        gamma_ou=float(config.get("gamma_ou")),
        D_ou=float(config.get("D_ou")),
        t_step=float(config.get("t_step", 1.0)),
    )
    params = ChannelParams(
        p=float(config.get("p")),
        kappa=float(config.get("kappa")),
        gamma=ou.gamma_ou * ou.t_step,
    )
    report = classical.equivalence_suite(
        params,
        ou,
        n_traj=int(config.get("n_traj", 64)),
        n_steps=int(config.get("n_steps", 300)),
        seed=config.seed,
        tolerance=float(config.get("tolerance", 1e-12)),
    )
    _write_csv(
        out / "data.csv",
        CSV_SCHEMAS["equivalence/data.csv"],
        [
            [int(t), rq, oc, d]
            for t, rq, oc, d in zip(
                report.steps, report.rho00_mean, report.overlap_mean,
                report.deviation_by_step,
            )
        ],
    )
    return {
        "max_deviation": report.max_deviation,
        "matched": report.matched,
        "quantum_limited": report.quantum_limited,
        "tolerance": report.tolerance,
        "noise_floor": ou.noise_floor,
    }


_DISPATCH = {
    "trajectories": _run_trajectories,
    "fixed-point": _run_fixed_point,
    "fp-predict": _run_fp_predict,
    "eigenops": _run_eigenops,
    "catmap": _run_catmap,
    "classical-ou": _run_classical_ou,
    "equivalence": _run_equivalence,
}
