"""Command-line entry point: ``inna-lab {bounds,classify,run,reproduce}``.

Exit codes: 0 success (``run``: gradient tolerance reached), 2 usage or
configuration error, 3 ``run`` hit the iteration cap, 4 ``run`` diverged.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import harness, reporting
from .dynamics import (
    DEFAULT_ALPHA_CAP,
    PhaseState,
    Termination,
    din_integrate,
    gd_run,
    inna_run,
    inna_run_vanishing,
)
from .landscape import BUILTIN_NAMES, NotCriticalError, builtin, classify_critical
from .spectrum import (
    HyperParams,
    classify_stationary,
    gamma_convergence_bound,
    gamma_diffeo_bound,
    spiral_interval,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MAXITER = 3
EXIT_DIVERGED = 4

ALGORITHMS = ("inna", "din", "gd", "inna_vanishing")
EXPERIMENTS = ("spiral", "escape_figure", "table1")


class ConfigError(ValueError):
    pass


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


@dataclass
class RunConfig:
    landscape: str = "quad2"
    eigenvalues: Optional[list] = None
    alpha: float = 2.0
    beta: float = 0.1
    gamma: Optional[float] = None
    theta0: list = field(default_factory=lambda: [1.0, 1.0])
    psi0: object = "auto"
    algorithm: str = "inna"
    max_iter: int = 1_000_000
    grad_tol: float = 1e-8
    out: str = "inna_out"
    seed: int = 0
    h: float = 1e-3
    t_end: float = 50.0
    c: float = 2.0
    alpha_cap: float = DEFAULT_ALPHA_CAP

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        try:
            cfg.normalize()
        except TypeError as exc:
            raise ConfigError(f"bad value type in config: {exc}") from exc
        return cfg

    def normalize(self) -> None:
        if self.landscape not in BUILTIN_NAMES:
            raise ConfigError(f"unknown landscape {self.landscape!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        self.theta0 = [float(x) for x in self.theta0]
        if self.psi0 != "auto":
            self.psi0 = [float(x) for x in self.psi0]
            if len(self.psi0) != len(self.theta0):
                raise ConfigError("psi0 and theta0 lengths differ")
        if self.eigenvalues is not None:
            self.eigenvalues = [float(x) for x in self.eigenvalues]
        for name in ("alpha", "beta", "grad_tol", "h", "t_end", "c", "alpha_cap"):
            setattr(self, name, float(getattr(self, name)))
        if self.gamma is not None:
            self.gamma = float(self.gamma)
        self.max_iter = int(self.max_iter)
        self.seed = int(self.seed)

    def dumps(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_hp_flags(p, required=False):
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--beta", type=float, required=required)
    p.add_argument("--gamma", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inna-lab", description="Inertial Newton dynamics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="step-size bounds and spiral interval")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--lipschitz", type=float, required=True)

    p = sub.add_parser("classify", help="regime report at a critical point")
    p.add_argument("--landscape", default="quad2", choices=BUILTIN_NAMES)
    p.add_argument("--eigenvalues", type=_floats, help="diag_quadratic eigenvalues")
    p.add_argument("--theta0", type=_floats, help="the critical point (default: origin)")
    _add_hp_flags(p, required=True)
    p.add_argument("--text", action="store_true", help="human-readable output")

    p = sub.add_parser("run", help="run one algorithm and write a trajectory")
    p.add_argument("--config", help="JSON RunConfig; flags override its values")
    p.add_argument("--landscape", choices=BUILTIN_NAMES)
    p.add_argument("--eigenvalues", type=_floats)
    _add_hp_flags(p)
    p.add_argument("--lipschitz", type=float, help="override the landscape's gradient Lipschitz constant")
    p.add_argument("--theta0", type=_floats)
    p.add_argument("--psi0", help="comma-separated vector or 'auto'")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--grad-tol", type=float, dest="grad_tol")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--h", type=float, help="din integrator step")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--c", type=float, help="inna_vanishing damping numerator")
    p.add_argument("--alpha-cap", type=float, dest="alpha_cap")

    p = sub.add_parser("reproduce", help="regenerate an experiment's data")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="inna_reproduce")
    p.add_argument("--n-runs", type=int, default=1000, dest="n_runs")
    return parser


# -- subcommands -----------------------------------------------------------------


def cmd_bounds(args) -> int:
    try:
        interval = spiral_interval(args.alpha, args.beta)
        out = {
            "alpha": args.alpha,
            "beta": args.beta,
            "lipschitz": args.lipschitz,
            "gamma_diffeo": gamma_diffeo_bound(args.alpha, args.beta, args.lipschitz),
            "gamma_convergence": gamma_convergence_bound(args.alpha, args.beta, args.lipschitz),
            "spiral_interval": interval.as_list(),
        }
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        L = builtin(args.landscape, args.eigenvalues)
        theta = args.theta0 if args.theta0 is not None else [0.0] * L.dimension
        if len(theta) != L.dimension:
            raise ValueError(f"theta0 has {len(theta)} entries, landscape needs {L.dimension}")
        rep = harness.run_regime_report(L, theta, HyperParams(args.alpha, args.beta, args.gamma))
    except (ValueError, NotCriticalError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    if args.text:
        print(harness.format_regime_report(rep))
    else:
        print(json.dumps(rep, indent=2, sort_keys=True))
    return EXIT_OK


def _run_config_from_args(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.loads(text)
    else:
        cfg = RunConfig()
    for name in ("landscape", "eigenvalues", "alpha", "beta", "gamma", "theta0", "algorithm",
                 "max_iter", "grad_tol", "seed", "out", "h", "t_end", "c", "alpha_cap"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if args.psi0 is not None:
        cfg.psi0 = "auto" if args.psi0 == "auto" else _floats(args.psi0)
    cfg.normalize()
    return cfg


def _default_gamma(cfg: RunConfig, L) -> float:
    if L.lipschitz_grad is None:
        raise ConfigError("--gamma is required for landscapes without a Lipschitz constant")
    if cfg.algorithm == "gd" or cfg.alpha <= 0:
        return 1.0 / L.lipschitz_grad
    return 0.8 * min(
        gamma_diffeo_bound(cfg.alpha, cfg.beta, L.lipschitz_grad),
        gamma_convergence_bound(cfg.alpha, cfg.beta, L.lipschitz_grad),
    )


def cmd_run(args) -> int:
    try:
        cfg = _run_config_from_args(args)
        L = builtin(cfg.landscape, cfg.eigenvalues)
        if args.lipschitz is not None:
            if not args.lipschitz > 0:
                raise ConfigError(f"--lipschitz must be positive, got {args.lipschitz}")
            L.lipschitz_grad = args.lipschitz
        if len(cfg.theta0) != L.dimension:
            raise ConfigError(f"theta0 has {len(cfg.theta0)} entries, landscape needs {L.dimension}")
        theta0 = np.array(cfg.theta0)
        if cfg.psi0 == "auto":
            s0 = PhaseState.auto(theta0, cfg.alpha, cfg.beta)
        else:
            s0 = PhaseState(theta0, np.array(cfg.psi0))
        gamma = cfg.gamma if cfg.gamma is not None else (None if cfg.algorithm == "din" else _default_gamma(cfg, L))
        hp = HyperParams(cfg.alpha, cfg.beta, gamma)
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE

    if cfg.algorithm in ("inna", "gd") and L.lipschitz_grad is not None:
        if cfg.algorithm == "inna" and cfg.alpha > 0:
            diffeo = gamma_diffeo_bound(cfg.alpha, cfg.beta, L.lipschitz_grad)
            conv = gamma_convergence_bound(cfg.alpha, cfg.beta, L.lipschitz_grad)
            if gamma >= diffeo and gamma >= conv:
                _err(f"warning: gamma = {gamma:g} exceeds both step bounds "
                     f"(diffeo {diffeo:.6g}, convergence {conv:.6g}); running anyway")
        elif cfg.algorithm == "gd" and gamma >= 2.0 / L.lipschitz_grad:
            _err(f"warning: gamma = {gamma:g} is not below 2/L = {2.0 / L.lipschitz_grad:.6g}; running anyway")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if cfg.algorithm == "inna":
            traj = inna_run(L, s0, hp, cfg.max_iter, cfg.grad_tol)
        elif cfg.algorithm == "gd":
            traj = gd_run(L, theta0, gamma, cfg.max_iter, cfg.grad_tol)
        elif cfg.algorithm == "inna_vanishing":
            traj = inna_run_vanishing(L, s0, cfg.beta, cfg.c, gamma, cfg.max_iter, cfg.grad_tol, cfg.alpha_cap)
        else:
            traj = din_integrate(L, s0, cfg.alpha, cfg.beta, cfg.h, cfg.t_end, cfg.grad_tol)

    final = traj.thetas[-1]
    summary = {
        "config": asdict(cfg),
        "gamma": gamma,
        "terminated_by": traj.terminated_by.value,
        "iterations": traj.step_count,
        "final_theta": final.tolist(),
        "final_psi": traj.psis[-1].tolist(),
        "final_loss": float(traj.losses[-1]),
        "final_grad_norm": float(traj.grad_norms[-1]),
    }
    if traj.terminated_by is not Termination.Diverged and np.all(np.isfinite(final)):
        summary["stationary"] = classify_stationary(L, final, hp).to_dict()
        try:
            summary["critical_class"] = classify_critical(L, final).label.value
        except NotCriticalError:
            summary["critical_class"] = None
    else:
        _err(f"diverged after {traj.step_count} steps: iterate left the region |theta| <= 1e8 "
             "or became non-finite")

    out = Path(cfg.out)
    try:
        reporting.emit_csv(traj, out / "trajectory.csv")
        reporting.emit_json(summary, out / "summary.json")
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    print(json.dumps({k: summary[k] for k in ("terminated_by", "iterations", "final_theta", "final_loss")}, sort_keys=True))

    return {Termination.GradTol: EXIT_OK, Termination.MaxIter: EXIT_MAXITER,
            Termination.Diverged: EXIT_DIVERGED}[traj.terminated_by]


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    try:
        if args.experiment == "spiral":
            summaries = harness.run_spiral_experiment(out_dir=out)
            for s in summaries:
                _err(f"{s.run.label}: {s.sign_changes_before} sign changes before |theta| < 1e-3, "
                     f"{s.sign_changes} total, final loss {s.final_loss:.3g}")
        elif args.experiment == "escape_figure":
            harness.run_escape_figure(out_dir=out)
        else:
            reports = harness.run_table1(seed=args.seed, out_dir=out, n_runs=args.n_runs)
            for name, rep in reports.items():
                _err(f"{name}: {rep.fractions}")
    except (OSError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"bounds": cmd_bounds, "classify": cmd_classify, "run": cmd_run, "reproduce": cmd_reproduce}
    try:
        return handler[args.command](args)
    except (ValueError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
