"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 condition not satisfied, 3 divergence.
Node and graph ids in all files are 1-based.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import theorem1_check
from .graphs import graph_from_json, has_directed_spanning_tree, reach_decomposition
from .linalg import eigenstructure, kernel_basis_by_reaches
from .scenarios import PRESETS, Scenario, preset, scenario_from_json, scenario_to_json
from .simulate import (
    DivergenceError,
    LinearNetworkSystem,
    convergence_rate,
    log_slope,
    integrate,
    integrate_sync_error,
    pairwise_from_error,
    pairwise_deviation,
    write_trajectory_csv,
)
from .svg import line_chart

EXIT_OK, EXIT_INPUT, EXIT_UNSATISFIED, EXIT_DIVERGED = 0, 1, 2, 3
SYNC_THRESHOLD = 1e-3
# slower but clearly exponential decay also counts as synchronizing
DECAY_RATE = -1e-2
DECAY_FACTOR = 1e-2


class InputError(Exception):
    pass


def _load_json(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: file not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SYNCNET_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"SYNCNET_SEED must be an integer, got {env!r}") from None
    return None


def _scenario_dict(args) -> dict:
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise InputError(f"unknown preset {args.preset!r}; valid names: {', '.join(PRESETS)}")
        return scenario_to_json(preset(args.preset))
    if not args.config:
        raise InputError("either --config or a preset name is required")
    return _load_json(args.config)


def _apply_overrides(data: dict, args) -> Scenario:
    data = json.loads(json.dumps(data))
    if getattr(args, "phi", None) is not None:
        if args.phi <= 0:
            raise InputError("--phi must be positive")
        data.setdefault("system", {})["phi"] = args.phi
    try:
        sc = scenario_from_json(data)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{getattr(args, 'config', None) or 'scenario'}: {exc}") from None
    if getattr(args, "horizon", None) is not None:
        if args.horizon <= 0:
            raise InputError("--horizon must be positive")
        sig = sc.sig.with_horizon(args.horizon)
        sc.system.sig = sig
    return sc


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


# -- analyze-graph ---------------------------------------------------------

def cmd_analyze_graph(args) -> int:
    data = _load_json(args.config)
    items = data if isinstance(data, list) else data.get("graphs", [data])
    reports = []
    for k, gd in enumerate(items):
        try:
            g = graph_from_json(gd)
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{args.config}: graph {k + 1}: {exc}") from None
        rd = reach_decomposition(g)
        kb = kernel_basis_by_reaches(g.laplacian, rd)
        es = eigenstructure(g.laplacian)
        one = lambda s: sorted(v + 1 for v in s)  # noqa: E731
        eig = sorted(es.eigenvalues, key=lambda z: (round(z.real, 12), round(z.imag, 12)))
        reports.append({
            "graph": k + 1,
            "n": g.n_nodes,
            "spanning_tree": has_directed_spanning_tree(g),
            "chi": rd.chi,
            "reaches": [one(r) for r in rd.reaches],
            "exclusive": [one(h) for h in rd.exclusive],
            "common": [one(c) for c in rd.common],
            "scc_order": [v + 1 for v in rd.scc_order],
            "block_sizes": list(rd.block_sizes),
            "kernel_basis": [v.tolist() for v in kb.vectors],
            "eigenvalues": [[float(z.real), float(z.imag)] for z in eig],
            "zero_alg_mult": es.zero_alg_mult,
            "zero_geo_mult": es.zero_geo_mult,
        })
    for r in reports:
        print(f"graph {r['graph']}: N={r['n']} spanning tree={r['spanning_tree']} reaches={r['chi']}")
        for i, (R, H, C) in enumerate(zip(r["reaches"], r["exclusive"], r["common"])):
            print(f"  reach {i + 1}: nodes={R} exclusive={H} common={C}")
            print(f"    kernel vector: {np.round(r['kernel_basis'][i], 6).tolist()}")
        print(f"  zero eigenvalue: algebraic={r['zero_alg_mult']} geometric={r['zero_geo_mult']}")
    if args.out:
        _write(_out_dir(args) / "analysis.json", json.dumps(reports, indent=2) + "\n")
    return EXIT_OK


# -- check-condition -------------------------------------------------------

def cmd_check_condition(args) -> int:
    sc = _apply_overrides(_scenario_dict(args), args)
    sys_ = sc.system
    if not isinstance(sys_, LinearNetworkSystem):
        raise InputError("check-condition applies to linear systems only")
    if args.gamma is not None and not 0 < args.gamma < 1:
        raise InputError("--gamma must lie in (0, 1)")
    report = theorem1_check(sys_.A, sys_.B, sys_.K, sys_.phi, sys_.sig, sys_.graphs,
                            gamma=args.gamma)
    print(report.table())
    if args.out:
        _write(_out_dir(args) / "condition.json", report.to_json() + "\n")
    return EXIT_OK if report.satisfied else EXIT_UNSATISFIED


# -- simulate / reproduce --------------------------------------------------

def _run(sc: Scenario, args, out: Path, verdict: bool) -> int:
    seed = _seed(args)
    x0 = sc.initial_state(seed)
    dt = args.dt if args.dt is not None else sc.dt
    summary = {"scenario": sc.name, "phi": sc.system.phi,
               "seed": seed if seed is not None else sc.x0.seed,
               "horizon": sc.sig.horizon, "dt": dt if dt is not None else sc.sig.t_min / 50}
    code = EXIT_OK
    try:
        traj = integrate(sc.system, x0, dt=dt, max_norm=sc.max_norm,
                         record_every=max(1, int(round(sc.sig.t_min / (dt or sc.sig.t_min / 50) / 50))))
    except DivergenceError as exc:
        traj = exc.trajectory
        summary["diverged"] = str(exc)
        code = EXIT_DIVERGED
    except ValueError as exc:
        raise InputError(str(exc)) from None
    write_trajectory_csv(traj, out / "trajectory.csv", sc.graphs)
    e = traj.error_norms()
    pw = traj.pairwise()
    switches = [t for t, _ in traj.switch_events]
    _write(out / "error.svg", line_chart(traj.times, {"e_norm": e, "pairwise_dev": pw},
                                         switches, title=sc.name, y_label="norm"))
    final_dev = float(pw[-1])
    rate_source = (traj.times, e)
    if isinstance(sc.system, LinearNetworkSystem) and code == EXIT_OK:
        # differences of large agent states lose precision; use error coordinates
        t, E = integrate_sync_error(sc.system, x0, dt=dt)
        final_dev = pairwise_from_error(E[-1], sc.system.n)
        rate_source = (t, np.linalg.norm(E, axis=1))
    summary["final_pairwise_deviation"] = final_dev
    summary["final_time"] = float(traj.times[-1])
    if code == EXIT_OK:
        try:
            summary["convergence_rate"] = log_slope(*rate_source)
        except ValueError:
            summary["convergence_rate"] = None
    if verdict:
        rate = summary.get("convergence_rate")
        decaying = (rate is not None and rate < DECAY_RATE
                    and final_dev < DECAY_FACTOR * float(pw[0]))
        observed = "sync" if final_dev < SYNC_THRESHOLD or decaying else "no-sync"
        if code == EXIT_DIVERGED:
            observed = "no-sync"
        summary["verdict"] = observed
        summary["expected"] = sc.expected
        summary["matches_expected"] = observed == sc.expected
    _write(out / "summary.json", json.dumps(summary, indent=2, default=_num) + "\n")
    for k, v in summary.items():
        print(f"{k}: {v}")
    return code


def _num(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_simulate(args) -> int:
    sc = _apply_overrides(_scenario_dict(args), args)
    return _run(sc, args, _out_dir(args), verdict=False)


def cmd_reproduce(args) -> int:
    args.config = None
    sc = _apply_overrides(_scenario_dict(args), args)
    out = _out_dir(args)
    _write(out / "scenario.json", sc.to_json() + "\n")
    return _run(sc, args, out, verdict=True)


# -- sweep -----------------------------------------------------------------

def _sweep_job(job):
    data, phi, seed, dt = job
    data = json.loads(json.dumps(data))
    data["system"]["phi"] = phi
    sc = scenario_from_json(data)
    x0 = sc.initial_state(seed)
    try:
        traj = integrate(sc.system, x0, dt=dt if dt is not None else sc.dt, max_norm=sc.max_norm)
    except DivergenceError as exc:
        return phi, math.nan, float(pairwise_deviation(exc.trajectory.final_state, sc.system.n)), True
    if isinstance(sc.system, LinearNetworkSystem):
        t, E = integrate_sync_error(sc.system, x0, dt=dt if dt is not None else sc.dt)
        return phi, log_slope(t, np.linalg.norm(E, axis=1)), pairwise_from_error(E[-1], sc.system.n), False
    return phi, convergence_rate(traj), float(pairwise_deviation(traj.final_state, sc.system.n)), False


def cmd_sweep(args) -> int:
    base = _apply_overrides(_scenario_dict(args), args)
    data = scenario_to_json(base)
    try:
        phis = [float(v) for v in args.phi_values.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--phi-values must be comma-separated numbers, got {args.phi_values!r}") from None
    if not phis or any(p <= 0 for p in phis):
        raise InputError("--phi-values must list positive numbers")
    seed = _seed(args)
    jobs = [(data, p, seed, args.dt) for p in phis]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    out = _out_dir(args)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "rate", "final_pairwise_dev", "diverged"])
        for phi, rate, dev, div in results:
            w.writerow([repr(phi), repr(float(rate)), repr(dev), int(div)])
    for phi, rate, dev, div in results:
        print(f"phi={phi:g} rate={rate:.6g} final_dev={dev:.3g}{' diverged' if div else ''}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="syncnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        sp.add_argument("--config", help="input JSON file")
        sp.add_argument("--out", help="output directory")
        if scenario:
            sp.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in scenario")
            sp.add_argument("--dt", type=float, help="integration step")
            sp.add_argument("--horizon", type=float, help="simulation end time")
            sp.add_argument("--phi", type=float, help="coupling strength")
            sp.add_argument("--seed", type=int, help="initial-state seed (env SYNCNET_SEED)")

    sp = sub.add_parser("analyze-graph", help="reach, kernel and spectral report")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_analyze_graph)

    sp = sub.add_parser("check-condition", help="windowed subspace convergence condition")
    common(sp)
    sp.add_argument("--gamma", type=float, help="contraction target in (0, 1)")
    sp.set_defaults(func=cmd_check_condition)

    sp = sub.add_parser("simulate", help="simulate a scenario file")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reproduce", help="simulate a preset and report the verdict")
    common(sp)
    sp.add_argument("name", choices=sorted(PRESETS), help="preset name")
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("sweep", help="convergence rate against coupling strength")
    common(sp)
    sp.add_argument("--phi-values", default="0.5,1,2,5", help="comma-separated coupling values")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "reproduce":
        args.preset = args.name
    if args.command == "analyze-graph" and not args.config:
        print("error: analyze-graph needs --config", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
