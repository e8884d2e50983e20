"""Command line front end.

Every subcommand reads a flat JSON config (defaults overridable via
``--config``), writes its tables into ``--out`` and drops a manifest
recording the resolved configuration.  Runs are deterministic: the same
config produces byte-identical files.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure,
4 validation failure (a precondition of the mathematics was violated).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import attractor, continuation, oscillator, output, reduced, relay
from .errors import NumericalError, RelayDynError, ValidationError
from .history import HybridState, SampledHistory


class ConfigError(Exception):
    """Bad configuration file or option values."""


DEFAULTS: dict[str, dict] = {
    "simulate": {
        "zeta": -0.1, "tau": 4.2, "alpha": -0.5, "epsilon": 0.1,
        "u0": 1, "horizon": 20.0, "history": "constant",
        "y0": [0.5, 0.0], "amplitude": 0.3, "scan_dt": 0.02,
    },
    "surface": {
        "zeta": -0.1, "tau_range": [math.pi + 1e-3, 2.0 * math.pi],
        "n_tau": 50, "alpha_range": [-1.2, 1.2], "n_alpha": 50,
    },
    "bifmap": {
        "zeta": -0.1, "tau_range": [math.pi + 1e-3, 2.0 * math.pi],
        "n_tau": 50, "alpha_range": [-1.2, 1.2], "n_alpha": 50,
        "residual_tol": 1e-8,
    },
    "unfold": {
        "zeta": -0.1, "epsilon": 0.1, "tau_max": 5.0, "n_collision": 80,
    },
    "family": {
        "zeta": -0.1, "epsilon": 0.1, "n_modes": 32, "tau_stop": None,
        "ds": 2e-3, "max_points": 400, "snapshot_every": 5,
        "breakup_tol": 1e-2,
    },
    "sweep": {
        "zeta": -0.1, "tau": 4.2, "epsilon": 0.1,
        "alpha_range": [-0.5, -0.38], "n_alpha": 121, "warm_start": True,
        "n_transient": 40, "n_total": 400,
    },
    "polygon": {
        "zeta": -0.1, "tau": 4.25, "alpha": -0.44, "epsilon": 0.1,
        "n_transient": 40, "n_total": 400,
    },
}


def load_config(command: str, path: str | None) -> dict:
    config = dict(DEFAULTS[command])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(config)
        if unknown:
            raise ConfigError(
                f"unknown keys for '{command}': {', '.join(sorted(unknown))}")
        config.update(user)
    return config


def _prepare_out(out: str) -> Path:
    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    return out_dir


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(config: dict, out_dir: Path, seed: int) -> list[str]:
    system = relay.oscillator_system(config["zeta"], config["alpha"],
                                     config["tau"], config["epsilon"])
    tau = float(config["tau"])
    kind = config["history"]
    if kind == "constant":
        hist = SampledHistory.constant(np.asarray(config["y0"], float), tau)
    elif kind == "random":
        rng = np.random.default_rng(seed)
        base = np.asarray(config["y0"], float)
        amp = float(config["amplitude"])
        coef = rng.normal(size=(3, 2)) * amp
        freq = rng.uniform(0.5, 2.0, size=3)

        def fn(s):
            return base + (coef * np.sin(np.outer(freq, [s, s]))[:, :1]).sum(axis=0)

        hist = SampledHistory.from_function(fn, tau)
    elif kind == "collision":
        orbit = oscillator.collision_orbit(config["zeta"], tau, config["alpha"])
        ctx = oscillator.collision_context(orbit)
        state = reduced.reconstruct_history(ctx, orbit.y_star + np.array([1e-3, 0.0]))
        hist, u0 = state.history, state.u
        system = relay.oscillator_system(config["zeta"], config["alpha"],
                                         tau, orbit.params.epsilon)
        config = dict(config, epsilon=orbit.params.epsilon, u0=u0)
    else:
        raise ConfigError(f"unknown history kind '{kind}'")
    if kind != "collision":
        u0 = int(config["u0"])
    state = HybridState(hist, u0)
    _, traj = relay.evolve(system, state, float(config["horizon"]),
                           scan_dt=float(config["scan_dt"]))
    files = [
        output.write_trajectory_csv(out_dir / "trajectory.csv", traj),
        output.write_json(out_dir / "events.json", {
            "crossings": [{"time": c.time, "direction": c.direction,
                           "slope": c.slope, "switch_time": c.switch_time}
                          for c in traj.crossings],
            "switches": [{"time": s.time, "new_u": s.new_u,
                          "crossing_time": s.crossing_time}
                         for s in traj.switches],
        }),
    ]
    return [f.name for f in files]


def cmd_surface(config: dict, out_dir: Path, seed: int) -> list[str]:
    taus = np.linspace(*config["tau_range"], int(config["n_tau"]))
    alphas = np.linspace(*config["alpha_range"], int(config["n_alpha"]))
    flow = None
    rows = []
    for tau in taus:
        try:
            y = oscillator.collision_point(config["zeta"], float(tau))
        except RelayDynError:
            continue
        if flow is None:
            from .flows import AffineOscillatorFlow
            flow = AffineOscillatorFlow(config["zeta"])
        resid = float(np.max(np.abs(y + flow.apply(y, 1, float(tau)))))
        for alpha in alphas:
            try:
                orbit = oscillator.collision_orbit(config["zeta"], float(tau), float(alpha))
                stab = oscillator.stability_at_collision(orbit)
            except (RelayDynError, ValueError):
                continue
            rows.append((float(tau), float(alpha), orbit.params.epsilon,
                         orbit.q, stab.lambda_plus, resid))
    f = output.write_csv(out_dir / "surface.csv",
                         ["tau", "alpha", "epsilon", "q", "lambda_plus", "residual"],
                         rows)
    return [f.name]


def cmd_bifmap(config: dict, out_dir: Path, seed: int) -> list[str]:
    bmap = oscillator.bifurcation_map(
        config["zeta"], tau_range=tuple(config["tau_range"]),
        alpha_range=tuple(config["alpha_range"]), n_tau=int(config["n_tau"]),
        n_alpha=int(config["n_alpha"]), residual_tol=float(config["residual_tol"]))
    files = [
        output.write_curve_points_csv(out_dir / "points.csv", bmap.all_points()),
        output.write_json(out_dir / "polylines.json", {
            label: [seg.tolist() for seg in segs]
            for label, segs in bmap.polylines.items()
        }),
    ]
    return [f.name for f in files]


def cmd_unfold(config: dict, out_dir: Path, seed: int) -> list[str]:
    zeta, eps = config["zeta"], config["epsilon"]
    tau_ns, alpha_ns = oscillator.find_nsc(zeta, eps)
    orbit = oscillator.collision_orbit(zeta, tau_ns, alpha_ns)
    stab = oscillator.stability_at_collision(orbit)
    angle = abs(float(np.angle(stab.eigs_minus[0])))
    branch = continuation.continue_ns_curve(
        zeta, eps, tau_span=(math.pi + 0.2, float(config["tau_max"])))
    ns_rows = [(p.data["tau"], p.data["alpha"], p.data["t0"], p.data["trace"])
               for p in branch.points]
    taus = np.linspace(math.pi + 0.05, float(config["tau_max"]),
                       int(config["n_collision"]))
    coll_rows = []
    hint = None
    for tau in taus:
        try:
            roots = oscillator.surface_alpha(zeta, float(tau), eps)
        except RelayDynError:
            continue
        if not roots:
            continue
        alpha = roots[0] if hint is None else min(roots, key=lambda a: abs(a - hint))
        hint = alpha
        coll_rows.append((float(tau), alpha, eps))
    files = [
        output.write_json(out_dir / "nsc.json", {
            "tau": tau_ns, "alpha": alpha_ns, "epsilon": eps,
            "lambda_plus": stab.lambda_plus, "rotation_angle": angle,
            "ns_points": len(branch.points), "ns_termination": branch.termination,
        }),
        output.write_csv(out_dir / "ns_curve.csv",
                         ["tau", "alpha", "t0", "trace"], ns_rows),
        output.write_csv(out_dir / "collision_curve.csv",
                         ["tau", "alpha", "epsilon"], coll_rows),
    ]
    return [f.name for f in files]


def cmd_family(config: dict, out_dir: Path, seed: int) -> list[str]:
    n_modes = int(config["n_modes"])
    branch = continuation.continue_colliding_family(
        config["zeta"], config["epsilon"], n_modes=n_modes,
        tau_stop=config["tau_stop"], ds=float(config["ds"]),
        max_points=int(config["max_points"]),
        breakup_tol=float(config["breakup_tol"]))
    files = [
        output.write_json_lines(out_dir / "family.jsonl",
                                output.family_records(branch, n_modes)),
        output.write_json(out_dir / "summary.json", {
            "n_points": len(branch.points),
            "termination": branch.termination,
            "message": branch.message,
            "tau_first": branch.points[0].data["tau"] if branch.points else None,
            "tau_last": branch.points[-1].data["tau"] if branch.points else None,
        }),
    ]
    every = int(config["snapshot_every"])
    for i in range(0, len(branch.points), max(every, 1)):
        name = out_dir / f"curve_{i:04d}.csv"
        files.append(output.write_curve_snapshot_csv(name, branch.points[i].data["curve"]))
    return [f.name for f in files]


def cmd_sweep(config: dict, out_dir: Path, seed: int) -> list[str]:
    alphas = np.linspace(*config["alpha_range"], int(config["n_alpha"]))
    records = attractor.sweep(
        config["zeta"], config["tau"], config["epsilon"], alphas,
        warm_start=bool(config["warm_start"]),
        n_transient=int(config["n_transient"]), n_total=int(config["n_total"]))
    window = attractor.visit_window(records)
    try:
        spc = oscillator.surface_alpha(config["zeta"], config["tau"], config["epsilon"])
    except RelayDynError:
        spc = []
    files = [
        output.write_sweep_csv(out_dir / "sweep.csv", records),
        output.write_json(out_dir / "marks.json", {
            "surface_alpha": spc,
            "visit_window": list(window) if window else None,
        }),
    ]
    return [f.name for f in files]


def cmd_polygon(config: dict, out_dir: Path, seed: int) -> list[str]:
    zeta, tau = config["zeta"], config["tau"]
    y_ref = oscillator.collision_point(zeta, tau)
    ctx = reduced.oscillator_context(zeta, config["alpha"], tau,
                                     config["epsilon"], y_ref)
    run = attractor.iterate_attractor(ctx, y_ref + np.array([1e-3, 0.0]),
                                      n_transient=int(config["n_transient"]),
                                      n_total=int(config["n_total"]))
    desc = attractor.polygon_arcs(run.points, ctx)
    files = [
        output.write_polygon_csv(out_dir / "polygon.csv", desc),
        output.write_circle_map_csv(out_dir / "circle_map.csv", desc),
        output.write_json(out_dir / "summary.json", {
            "arc_count": desc.arc_count,
            "corner_count": len(desc.corner_indices),
            "monotone": desc.monotone,
            "locking_period": desc.locking_period,
            "centroid": list(desc.centroid),
            "visited_plus": run.visited_plus,
            "visited_minus": run.visited_minus,
        }),
    ]
    return [f.name for f in files]


COMMANDS = {
    "simulate": cmd_simulate,
    "surface": cmd_surface,
    "bifmap": cmd_bifmap,
    "unfold": cmd_unfold,
    "family": cmd_family,
    "sweep": cmd_sweep,
    "polygon": cmd_polygon,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaydyn",
        description="Delayed-relay oscillator toolbox: simulation, collision "
                    "surface, bifurcation curves, invariant-curve continuation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (current implementation is sequential)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized inputs")
    p = sub.add_parser("print-config")
    p.add_argument("name", nargs="?", default=None,
                   help="command whose defaults to print (all if omitted)")
    p.add_argument("--config", default=None, help="JSON config file to merge")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "print-config":
        if args.name is None:
            print(json.dumps(DEFAULTS, sort_keys=True, indent=2))
        else:
            if args.name not in DEFAULTS:
                raise ConfigError(f"unknown command '{args.name}'")
            print(json.dumps(load_config(args.name, args.config),
                             sort_keys=True, indent=2))
        return 0
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    config = load_config(args.command, args.config)
    out_dir = _prepare_out(args.out)
    names = COMMANDS[args.command](config, out_dir, int(args.seed))
    manifest_config = dict(config, seed=int(args.seed))
    output.write_manifest(out_dir, args.command, manifest_config,
                          names + ["manifest.json"])
    print(f"{args.command}: wrote {len(names) + 1} files to {out_dir}")
    return 0


def main(argv=None) -> int:
    try:
        code = run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = 2
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        code = 4
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        code = 3
    except RelayDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 3
    return code


if __name__ == "__main__":
    sys.exit(main())
