"""Command-line front end: run the built-in experiments, emit CSV/JSON.

Presets encode the worked parameter sets (sinusoidal delay, tau0 = 3,
omega = 5) so the standard runs are one command each.  Outputs are
deterministic: fixed grids, no randomness, floats printed with 17
significant digits; CSV headers and column orders are a stable interface.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .abel import exact_transform
from .dde_sim import DdeSystem, stability_probe, verify_equivalence
from .errors import DelayWarpError
from .periodic_delay import delay_from_config, load_delay
from .perturbation import perturbative_transform, seed_compatibility_error
from .robust_decomp import assemble_pie, compute_hdot_bounds, export_pie_json

GU_A0 = [[-2.0, 0.0], [0.0, -0.9]]
GU_A1 = [[-1.0, 0.0], [-1.0, -1.0]]

PRESETS = {
    "fig1": {
        "tau0": 3.0, "omega": 5.0, "eps": 0.01, "kind": "sin",
        "tau_star": 3.0, "window": [0.0, 3.0],
    },
    "fig2": {
        "tau0": 3.0, "omega": 5.0, "eps": 0.1, "kind": "sin",
        "tau_star": 3.0, "window": [0.0, 3.0],
    },
    "fig3": {
        "tau0": 3.0, "omega": 5.0, "eps": 0.05, "kind": "sin",
        "tau_star": 3.0,
        "eps_grid": [0.0125, 0.025, 0.05, 0.1, 0.2],
    },
    "gu-example": {
        "tau0": 3.0, "omega": 5.0, "eps": 0.01, "kind": "sin",
        "tau_star": 3.0, "A0": GU_A0, "A1": GU_A1,
    },
}

_CONFIG_KEYS = (
    "tau0", "eps", "omega", "kind", "coeffs", "delay_file", "tau_star",
    "order", "window", "horizon", "step", "n_points", "samples_per_interval",
    "root_tol", "eps_grid", "A0", "A1", "out", "t_end",
)


@dataclass
class RunConfig:
    """Resolved run parameters: preset < config file < command-line flags."""

    tau0: float = 3.0
    eps: float = 0.01
    omega: float = 5.0
    kind: str = "sin"
    coeffs: list = None
    delay_file: str = None
    tau_star: float = None
    order: str = "exact"
    window: list = field(default_factory=lambda: [0.0, 3.0])
    horizon: float = None
    step: float = None
    n_points: int = 601
    samples_per_interval: int = 400
    root_tol: float = 1e-12
    eps_grid: list = None
    A0: list = None
    A1: list = None
    out: str = "."
    t_end: float = None

    def delay(self):
        if self.delay_file:
            return load_delay(self.delay_file)
        cfg = {"tau0": self.tau0, "eps": self.eps, "omega": self.omega}
        if self.coeffs:
            cfg["coeffs"] = self.coeffs
        else:
            cfg["kind"] = self.kind
        return delay_from_config(cfg)

    def resolved_tau_star(self):
        return self.tau_star if self.tau_star is not None else self.tau0

    def system(self):
        if self.A0 is None or self.A1 is None:
            raise ValueError(
                "this command needs system matrices: use --preset gu-example "
                "or provide A0/A1 in the config file"
            )
        dim = len(self.A0)
        return DdeSystem(
            A0=np.asarray(self.A0),
            A1=np.asarray(self.A1),
            history=lambda t: np.ones(dim),
        )

    def out_path(self, name):
        os.makedirs(self.out, exist_ok=True)
        return os.path.join(self.out, name)

    def metadata(self, command, preset):
        return {
            "command": command,
            "preset": preset,
            "version": __version__,
            "tau0": self.tau0,
            "eps": self.eps,
            "omega": self.omega,
            "tau_star": self.resolved_tau_star(),
            "deterministic": True,
        }


def _load_config_file(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw.decode())


def _resolve_config(args):
    merged = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ValueError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[args.preset])
    if args.config:
        file_cfg = _load_config_file(args.config)
        unknown = set(file_cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for flag, key in (
        ("eps", "eps"), ("tau0", "tau0"), ("omega", "omega"),
        ("tau_star", "tau_star"), ("order", "order"), ("out", "out"),
        ("horizon", "horizon"), ("step", "step"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            merged[key] = value
    cfg = RunConfig()
    for key, value in merged.items():
        setattr(cfg, key, value)
    for key in ("tau0", "omega", "horizon", "step", "root_tol", "t_end"):
        value = getattr(cfg, key)
        if value is not None and not float(value) > 0.0:
            raise ValueError(f"config field {key} must be positive, got {value}")
    if not float(cfg.eps) >= 0.0:
        raise ValueError(f"config field eps must be >= 0, got {cfg.eps}")
    if cfg.delay_file and not os.path.exists(cfg.delay_file):
        raise ValueError(f"delay file not found: {cfg.delay_file}")
    return cfg


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _sweep_threads():
    raw = os.environ.get("DELAYWARP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_maybe_parallel(fn, items):
    threads = _sweep_threads()
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _build_transform(cfg, delay, tau_star, horizon):
    order = str(cfg.order)
    if order in ("1", "2"):
        return perturbative_transform(delay, tau_star, order=int(order))
    if order == "exact":
        return exact_transform(
            delay,
            tau_star,
            horizon,
            samples_per_interval=cfg.samples_per_interval,
            root_tol=cfg.root_tol,
        )
    raise ValueError(f"order must be 1, 2 or exact, got {cfg.order!r}")


def cmd_approx(cfg, preset=None):
    """Write h_dot curves for order 1, order 2 and the exact transform."""
    delay = cfg.delay()
    tau_star = cfg.resolved_tau_star()
    window = [float(v) for v in cfg.window]
    tt1 = perturbative_transform(delay, tau_star, order=1)
    tt2 = perturbative_transform(delay, tau_star, order=2)
    tte = exact_transform(
        delay, tau_star, horizon=window[1] + tau_star,
        samples_per_interval=cfg.samples_per_interval, root_tol=cfg.root_tol,
    )
    grid = np.linspace(window[0], window[1], cfg.n_points)
    d1 = np.asarray(tt1.h_dot(grid))
    d2 = np.asarray(tt2.h_dot(grid))
    de = np.asarray(tte.h_dot(grid))
    csv_path = cfg.out_path("hdot_curves.csv")
    _write_csv(
        csv_path,
        ["lambda", "hdot_order1", "hdot_order2", "hdot_exact"],
        zip(grid, d1, d2, de),
    )
    spreads = {
        "order1_order2": float(np.max(np.abs(d1 - d2))),
        "order1_exact": float(np.max(np.abs(d1 - de))),
        "order2_exact": float(np.max(np.abs(d2 - de))),
    }
    spreads["max_pairwise"] = max(spreads.values())
    summary = cfg.metadata("approx", preset)
    summary.update({"window": window, "n_points": cfg.n_points, "spreads": spreads})
    _write_json(cfg.out_path("approx_summary.json"), summary)
    return {"csv": csv_path, "summary": summary}


def cmd_error_sweep(cfg, preset=None):
    """Sweep eps, compute the seed-compatibility error for both orders."""
    eps_grid = cfg.eps_grid or PRESETS["fig3"]["eps_grid"]
    eps_grid = sorted(float(e) for e in eps_grid)
    tau_star = cfg.resolved_tau_star()

    def one(eps):
        local = RunConfig(**{**cfg.__dict__, "eps": eps})
        delay = local.delay()
        e1 = seed_compatibility_error(
            perturbative_transform(delay, tau_star, order=1), delay
        )
        e2 = seed_compatibility_error(
            perturbative_transform(delay, tau_star, order=2), delay
        )
        return e1, e2

    results = _map_maybe_parallel(one, eps_grid)
    e1s = np.array([r[0] for r in results])
    e2s = np.array([r[1] for r in results])
    csv_path = cfg.out_path("error_sweep.csv")
    _write_csv(csv_path, ["eps", "e_order1", "e_order2"], zip(eps_grid, e1s, e2s))
    log_eps = np.log(np.asarray(eps_grid))
    slope1 = float(np.polyfit(log_eps, np.log(e1s), 1)[0])
    slope2 = float(np.polyfit(log_eps, np.log(e2s), 1)[0])
    summary = cfg.metadata("error-sweep", preset)
    summary.update(
        {
            "eps_grid": eps_grid,
            "slope_order1": slope1,
            "slope_order2": slope2,
            "threads": _sweep_threads(),
        }
    )
    _write_json(cfg.out_path("error_sweep_summary.json"), summary)
    return {"csv": csv_path, "summary": summary}


def cmd_equivalence(cfg, preset=None):
    """Dual simulation: original vs transformed, sampled sup/RMS difference."""
    delay = cfg.delay()
    tau_star = cfg.resolved_tau_star()
    sys_ = cfg.system()
    t_end = float(cfg.t_end if cfg.t_end is not None else (cfg.horizon or 30.0))
    tt = _build_transform(cfg, delay, tau_star, horizon=t_end)
    report = verify_equivalence(sys_, delay, tt, t_end, step=cfg.step)
    csv_path = cfg.out_path("equivalence.csv")
    _write_csv(
        csv_path, ["lambda", "abs_diff"], zip(report.lambda_grid, report.diffs)
    )
    summary = cfg.metadata("equivalence", preset)
    summary.update({"order": str(cfg.order), **report.as_dict()})
    _write_json(cfg.out_path("equivalence_summary.json"), summary)
    return {"csv": csv_path, "summary": summary}


def cmd_probe(cfg, preset=None):
    """Stability probe of the original system from the canonical history."""
    delay = cfg.delay()
    sys_ = cfg.system()
    t_end = float(cfg.t_end if cfg.t_end is not None else (cfg.horizon or 200.0))
    verdict = stability_probe(sys_, delay=delay, t_end=t_end, step=cfg.step)
    summary = cfg.metadata("probe", preset)
    summary.update(verdict.as_dict())
    path = cfg.out_path("probe.json")
    _write_json(path, summary)
    return {"json": path, "summary": summary}


def cmd_pie_export(cfg, preset=None):
    """Assemble and export the PIE operator data as schema-valid JSON."""
    delay = cfg.delay()
    tau_star = cfg.resolved_tau_star()
    sys_ = cfg.system()
    order = 2 if str(cfg.order) == "exact" else int(cfg.order)
    tt = perturbative_transform(delay, tau_star, order=order)
    bounds = compute_hdot_bounds(tt)
    data = assemble_pie(sys_, bounds, tau_star)
    path = cfg.out_path("pie.json")
    export_pie_json(data, path)
    summary = cfg.metadata("pie-export", preset)
    summary.update({"order": order, **bounds.as_dict()})
    _write_json(cfg.out_path("pie_summary.json"), summary)
    return {"json": path, "summary": summary}


_COMMANDS = {
    "approx": cmd_approx,
    "error-sweep": cmd_error_sweep,
    "equivalence": cmd_equivalence,
    "probe": cmd_probe,
    "pie-export": cmd_pie_export,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="delaywarp",
        description="Time-transformations for constant-plus-periodic delays",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="JSON or TOML run configuration")
        p.add_argument("--preset", help=f"named parameter set: {', '.join(sorted(PRESETS))}")
        p.add_argument("--order", choices=["1", "2", "exact"], default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--tau0", type=float, default=None)
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--tau-star", dest="tau_star", type=float, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--step", type=float, default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        result = _COMMANDS[args.command](cfg, preset=args.preset)
    except (DelayWarpError, ValueError, OSError) as exc:
        error = {
            "error": {
                "type": type(exc).__name__,
                "message": str(exc),
                "command": args.command,
            }
        }
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps(result["summary"], sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
