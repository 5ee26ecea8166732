"""Desk-scale reproductions: the spiral study on ``quad2``, saddle-escape
trajectories on ``doublewell`` and the Monte Carlo escape statistics.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import reporting
from .dynamics import (
    PhaseState,
    Termination,
    Trajectory,
    inna_run,
    inna_run_vanishing,
    run_batch,
)
from .landscape import Landscape, builtin, classify_critical
from .spectrum import (
    HyperParams,
    classify_stationary,
    din_block_eigs,
    gamma_convergence_bound,
    gamma_diffeo_bound,
    inna_block_eigs,
    spiral_interval,
)

THREADS_ENV = "INNA_LAB_THREADS"
BASIN_LABELS = ("minus_sqrt2", "plus_sqrt2", "saddle", "unresolved")
CHUNK_SIZE = 500


def worker_count(requested: Optional[int] = None) -> int:
    """Worker threads for Monte Carlo chunks, capped by ``INNA_LAB_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def sign_changes(x) -> int:
    """Number of sign flips along ``x``, ignoring exact zeros."""
    s = np.sign(np.asarray(x, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


# -- spiral study --------------------------------------------------------------


@dataclass(frozen=True)
class SpiralRun:
    """One configuration of the spiral study.

    With ``vanishing=True`` the viscous damping is ``c / t`` and ``alpha`` is
    ignored.
    """

    label: str
    alpha: float
    beta: float
    gamma: float
    vanishing: bool = False
    c: float = 2.0


# Fixed damping at gamma = 0.15 (inside the convergence bound 0.2 / 0.25 for
# L = 4). The vanishing runs need gamma < beta once alpha -> 0.
DEFAULT_SPIRAL_RUNS = (
    SpiralRun("alpha=2,beta=0.1", 2.0, 0.1, 0.15),
    SpiralRun("alpha=2,beta=1", 2.0, 1.0, 0.15),
    SpiralRun("alpha=2/t,beta=0.1", 0.0, 0.1, 0.05, vanishing=True),
    SpiralRun("alpha=2/t,beta=1", 0.0, 1.0, 0.05, vanishing=True),
)


@dataclass
class SpiralSummary:
    run: SpiralRun
    trajectory: Trajectory
    sign_changes: int
    sign_changes_before: int
    final_distance: float
    final_loss: float

    def row(self) -> dict:
        return {
            "label": self.run.label,
            "alpha": "2/t" if self.run.vanishing else self.run.alpha,
            "beta": self.run.beta,
            "gamma": self.run.gamma,
            "iterations": self.trajectory.step_count,
            "terminated_by": self.trajectory.terminated_by.value,
            "sign_changes_theta1": self.sign_changes,
            "sign_changes_before_radius": self.sign_changes_before,
            "final_loss": self.final_loss,
            "final_distance": self.final_distance,
        }


def _slug(label: str) -> str:
    return label.replace("=", "").replace(",", "_").replace("/", "over").replace(".", "p")


def run_spiral_experiment(
    runs: Sequence[SpiralRun] = DEFAULT_SPIRAL_RUNS,
    theta0=(1.0, 1.0),
    psi0=None,
    out_dir=None,
    max_iter: int = 200_000,
    grad_tol: float = 1e-8,
    radius: float = 1e-3,
) -> list:
    """Run INNA on ``quad2`` for each configuration and summarize the oscillations.

    ``psi0`` defaults to ``theta0``. ``sign_changes_before`` counts flips of
    ``theta_1`` up to the first iterate with ``|theta| < radius``. With
    ``out_dir`` set, writes one trajectory CSV per run, ``spiral_summary.csv``
    and three SVG plots.
    """
    L = builtin("quad2")
    theta0 = np.asarray(theta0, dtype=float)
    psi0 = theta0.copy() if psi0 is None else np.asarray(psi0, dtype=float)
    s0 = PhaseState(theta0, psi0)
    out = []
    for r in runs:
        if r.vanishing:
            traj = inna_run_vanishing(L, s0, r.beta, r.c, r.gamma, max_iter=max_iter, grad_tol=grad_tol)
        else:
            traj = inna_run(L, s0, HyperParams(r.alpha, r.beta, r.gamma), max_iter=max_iter, grad_tol=grad_tol)
        dist = np.linalg.norm(traj.thetas, axis=1)
        inside = np.flatnonzero(dist < radius)
        stop = int(inside[0]) if inside.size else len(dist) - 1
        out.append(
            SpiralSummary(
                run=r,
                trajectory=traj,
                sign_changes=sign_changes(traj.thetas[:, 0]),
                sign_changes_before=sign_changes(traj.thetas[: stop + 1, 0]),
                final_distance=float(dist[-1]),
                final_loss=float(traj.losses[-1]),
            )
        )

    if out_dir is not None:
        out_dir = Path(out_dir)
        for s in out:
            reporting.emit_csv(s.trajectory, out_dir / f"spiral_{_slug(s.run.label)}.csv")
        reporting.emit_rows_csv([s.row() for s in out], out_dir / "spiral_summary.csv")
        reporting.emit_svg_lineplot(
            {s.run.label: (s.trajectory.thetas[:, 0], s.trajectory.thetas[:, 1]) for s in out},
            out_dir / "spiral_paths.svg", title="INNA iterates on quad2", xlabel="theta_1", ylabel="theta_2",
        )
        reporting.emit_svg_lineplot(
            {s.run.label: (np.arange(len(s.trajectory)), np.log10(np.maximum(s.trajectory.losses, 1e-300))) for s in out},
            out_dir / "spiral_loss.svg", title="loss", xlabel="iteration", ylabel="log10 J",
        )
        reporting.emit_svg_lineplot(
            {
                s.run.label: (np.arange(len(s.trajectory)), np.log10(np.maximum(np.linalg.norm(s.trajectory.thetas, axis=1), 1e-300)))
                for s in out
            },
            out_dir / "spiral_distance.svg", title="distance to (0,0)", xlabel="iteration", ylabel="log10 |theta|",
        )
    return out


# -- escape trajectories (single runs) ----------------------------------------


def doublewell_gamma(hp: HyperParams, L: Optional[float] = None, safety: float = 0.8) -> float:
    """``safety * min(diffeo bound, convergence bound)`` at the double-well's boxed L."""
    L = builtin("doublewell").lipschitz_grad if L is None else L
    return safety * min(gamma_diffeo_bound(hp.alpha, hp.beta, L), gamma_convergence_bound(hp.alpha, hp.beta, L))


def run_escape_figure(out_dir=None, hps: Sequence[HyperParams] = None, max_iter: int = 200_000) -> dict:
    """INNA on ``doublewell`` from an on-manifold start ``(0, 1.5)`` and an
    off-manifold start ``(0.01, 1.5)`` for each hyper-parameter pair."""
    L = builtin("doublewell")
    if hps is None:
        hps = [HyperParams(2.0, 0.1), HyperParams(2.0, 1.0)]
    starts = {"on_manifold": (0.0, 1.5), "off_manifold": (0.01, 1.5)}
    results = {}
    for hp in hps:
        hp = hp if hp.gamma is not None else hp.with_gamma(doublewell_gamma(hp))
        for kind, th0 in starts.items():
            traj = inna_run(L, PhaseState.auto(th0, hp.alpha, hp.beta), hp, max_iter=max_iter)
            results[(kind, hp.alpha, hp.beta)] = traj
    if out_dir is not None:
        out_dir = Path(out_dir)
        series = {}
        for (kind, a, b), traj in results.items():
            name = f"escape_{kind}_alpha{a:g}_beta{b:g}".replace(".", "p")
            reporting.emit_csv(traj, out_dir / f"{name}.csv")
            series[f"{kind} a={a:g} b={b:g}"] = (traj.thetas[:, 0], traj.thetas[:, 1])
        reporting.emit_svg_lineplot(series, out_dir / "escape_paths.svg",
                                    title="INNA on the double well", xlabel="theta_1", ylabel="theta_2")
    return results


# -- Monte Carlo escape statistics --------------------------------------------


@dataclass(frozen=True)
class OffManifoldGaussian:
    sigma: float = 1e-12

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class OnManifold:
    range: float = 1.0

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("range must be positive")


InitMode = Union[OffManifoldGaussian, OnManifold]


@dataclass(frozen=True)
class MonteCarloConfig:
    n_runs: int
    init_mode: InitMode
    hp: HyperParams
    max_iter: int = 10_000
    basin_tol: float = 0.1
    escape_radius: float = 0.5
    seed: int = 0
    # Starts 1e-12 from the saddle already have |grad| ~ 1e-11, so runs use the
    # whole budget by default.
    grad_tol: float = 0.0

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be positive")
        if not (self.escape_radius > self.basin_tol > 0):
            raise ValueError("need escape_radius > basin_tol > 0")
        self.hp.require_gamma()

    def to_dict(self, algorithm: str) -> dict:
        if isinstance(self.init_mode, OffManifoldGaussian):
            init = {"mode": "OffManifoldGaussian", "sigma": self.init_mode.sigma}
        else:
            init = {"mode": "OnManifold", "range": self.init_mode.range}
        hp = {"gamma": self.hp.gamma} if algorithm == "gd" else asdict(self.hp)
        return {
            "n_runs": self.n_runs,
            "init_mode": init,
            "hp": hp,
            "max_iter": self.max_iter,
            "basin_tol": self.basin_tol,
            "escape_radius": self.escape_radius,
            "grad_tol": self.grad_tol,
            "seed": self.seed,
        }


@dataclass
class MonteCarloReport:
    algorithm: str
    n_runs: int
    seed: int
    counts: dict
    fractions: dict
    mean_escape_iters: Optional[float]
    config: dict
    labels: list = field(default_factory=list, repr=False)
    escape_iters: np.ndarray = field(default=None, repr=False)

    @property
    def unresolved_dominant(self) -> bool:
        return self.counts["unresolved"] == self.n_runs

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "counts": dict(self.counts),
            "fractions": dict(self.fractions),
            "mean_escape_iters": self.mean_escape_iters,
            "unresolved_dominant": self.unresolved_dominant,
            "config": self.config,
        }


def sample_initial_points(cfg: MonteCarloConfig) -> np.ndarray:
    """One independent stream per run, spawned from ``cfg.seed``."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_runs)
    pts = np.empty((cfg.n_runs, 2))
    for i, ss in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(ss))
        if isinstance(cfg.init_mode, OffManifoldGaussian):
            pts[i] = rng.normal(0.0, cfg.init_mode.sigma, size=2)
        else:
            pts[i] = (0.0, rng.uniform(-cfg.init_mode.range, cfg.init_mode.range))
    return pts


def _classify_terminal(L: Landscape, thetas: np.ndarray, status, basin_tol: float) -> list:
    names = [name for name, _ in L.critical_points]
    pts = np.array([p for _, p in L.critical_points])
    d = np.linalg.norm(thetas[:, None, :] - pts[None, :, :], axis=-1)
    nearest = np.argmin(d, axis=1)
    labels = []
    for i in range(len(thetas)):
        if status[i] is Termination.Diverged or not d[i, nearest[i]] <= basin_tol:
            labels.append("unresolved")
        else:
            labels.append(names[nearest[i]])
    return labels


def run_escape_montecarlo(
    cfg: MonteCarloConfig,
    algorithm: str = "inna",
    theta0: Optional[np.ndarray] = None,
    threads: Optional[int] = None,
) -> MonteCarloReport:
    """Escape statistics of INNA or gradient descent started near the double-well saddle.

    Runs are simulated in fixed-size chunks, so the report does not depend on
    the number of worker threads. ``theta0`` overrides the sampled starts.
    INNA starts from ``psi0 = (1 - alpha beta) theta0``.
    """
    if algorithm not in ("inna", "gd"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    L = builtin("doublewell")
    th0 = sample_initial_points(cfg) if theta0 is None else np.asarray(theta0, dtype=float)
    if th0.shape != (cfg.n_runs, 2):
        raise ValueError(f"expected initial points of shape ({cfg.n_runs}, 2), got {th0.shape}")
    hp = cfg.hp
    psi0 = (1.0 - hp.alpha * hp.beta) * th0 if algorithm == "inna" else None

    def work(lo):
        hi = min(lo + CHUNK_SIZE, cfg.n_runs)
        return run_batch(
            L, th0[lo:hi], None if psi0 is None else psi0[lo:hi], algorithm,
            hp.alpha, hp.beta, hp.gamma, cfg.max_iter, cfg.grad_tol, escape_radius=cfg.escape_radius,
        )

    starts = range(0, cfg.n_runs, CHUNK_SIZE)
    n_workers = worker_count(threads)
    if n_workers == 1:
        chunks = [work(lo) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(work, starts))

    thetas = np.concatenate([c.thetas for c in chunks])
    status = [s for c in chunks for s in c.terminated_by]
    escape = np.concatenate([c.escape_iters for c in chunks])
    labels = _classify_terminal(L, thetas, status, cfg.basin_tol)

    counts = {k: 0 for k in BASIN_LABELS}
    for lab in labels:
        counts[lab] += 1
    fractions = {k: counts[k] / cfg.n_runs for k in BASIN_LABELS}
    escaped = [int(escape[i]) for i, lab in enumerate(labels)
               if lab in ("minus_sqrt2", "plus_sqrt2") and escape[i] >= 0]
    mean_escape = float(np.mean(escaped)) if escaped else None

    return MonteCarloReport(
        algorithm=algorithm.upper(),
        n_runs=cfg.n_runs,
        seed=cfg.seed,
        counts=counts,
        fractions=fractions,
        mean_escape_iters=mean_escape,
        config=cfg.to_dict(algorithm),
        labels=labels,
        escape_iters=escape,
    )


def table1_configs(seed: int = 7, n_runs: int = 1000) -> list:
    """``(name, algorithm, MonteCarloConfig)`` for the six Monte Carlo settings.

    INNA uses ``0.8 * min`` of both step bounds at the boxed L = 100; gradient
    descent uses ``gamma = 1 / L``.
    """
    L = builtin("doublewell").lipschitz_grad
    inna_lo = HyperParams(2.0, 0.1)
    inna_hi = HyperParams(2.0, 1.0)
    algos = [
        ("inna_ab_lt1", "inna", inna_lo.with_gamma(doublewell_gamma(inna_lo, L))),
        ("inna_ab_gt1", "inna", inna_hi.with_gamma(doublewell_gamma(inna_hi, L))),
        ("gd", "gd", HyperParams(0.0, 1.0, 1.0 / L)),
    ]
    modes = [("off_manifold", OffManifoldGaussian(1e-12)), ("on_manifold", OnManifold(1.0))]
    out = []
    for mode_name, mode in modes:
        for algo_name, algo, hp in algos:
            cfg = MonteCarloConfig(n_runs=n_runs, init_mode=mode, hp=hp, seed=seed)
            out.append((f"table1_{algo_name}_{mode_name}", algo, cfg))
    return out


def run_table1(seed: int = 7, out_dir=None, n_runs: int = 1000, threads: Optional[int] = None) -> dict:
    reports = {}
    for name, algo, cfg in table1_configs(seed, n_runs):
        rep = run_escape_montecarlo(cfg, algo, threads=threads)
        reports[name] = rep
        if out_dir is not None:
            reporting.emit_json(rep.to_json(), Path(out_dir) / f"{name}.json")
    return reports


# -- regime report ---------------------------------------------------------------


def _cplx(z: complex) -> list:
    return [z.real, z.imag]


def run_regime_report(L: Landscape, theta_star, hp: HyperParams) -> dict:
    """Critical-point class, stationary classification, per-eigenvalue block
    spectra and both step bounds at ``theta_star``."""
    theta_star = np.asarray(theta_star, dtype=float)
    crit = classify_critical(L, theta_star)
    stat = classify_stationary(L, theta_star, hp)
    interval = spiral_interval(hp.alpha, hp.beta)
    blocks = []
    for lam in crit.eigenvalues:
        b = din_block_eigs(hp.alpha, hp.beta, lam)
        entry = {
            "lambda": lam,
            "discriminant": b.discriminant,
            "regime": b.regime.value,
            "omega": b.omega,
            "in_spiral_interval": lam in interval,
            "sigma_plus": _cplx(b.sigma_plus),
            "sigma_minus": _cplx(b.sigma_minus),
        }
        if hp.gamma is not None:
            d = inna_block_eigs(hp, lam)
            entry["discrete"] = {
                "eigenvalues": [_cplx(z) for z in d.eigenvalues],
                "magnitudes": list(d.magnitudes),
                "determinant": d.determinant,
                "stable": d.stable,
            }
        blocks.append(entry)
    bounds = None
    if L.lipschitz_grad is not None and hp.alpha > 0:
        bounds = {
            "lipschitz": L.lipschitz_grad,
            "gamma_diffeo": gamma_diffeo_bound(hp.alpha, hp.beta, L.lipschitz_grad),
            "gamma_convergence": gamma_convergence_bound(hp.alpha, hp.beta, L.lipschitz_grad),
        }
    return {
        "landscape": L.name,
        "theta": theta_star.tolist(),
        "hyperparams": asdict(hp),
        "critical": {"label": crit.label.value, "eigenvalues": list(crit.eigenvalues)},
        "stationary": stat.to_dict(),
        "spiral_interval": interval.as_list(),
        "blocks": blocks,
        "bounds": bounds,
    }


def format_regime_report(rep: dict) -> str:
    lines = [
        f"landscape {rep['landscape']} at theta = {rep['theta']}",
        f"  class: {rep['critical']['label']}  eigenvalues: {rep['critical']['eigenvalues']}",
        f"  spiral interval: {rep['spiral_interval'] if rep['spiral_interval'] else 'empty'}",
        f"  unstable dims: continuous {rep['stationary']['unstable_dim_continuous']}, "
        f"discrete {rep['stationary']['unstable_dim_discrete']}",
    ]
    for b in rep["blocks"]:
        lines.append(f"  lambda {b['lambda']:.6g}: {b['regime']}, omega {b['omega']:.6g}")
    if rep["bounds"]:
        lines.append(
            f"  gamma bounds (L={rep['bounds']['lipschitz']:g}): diffeo {rep['bounds']['gamma_diffeo']:.6g}, "
            f"convergence {rep['bounds']['gamma_convergence']:.6g}"
        )
    return "\n".join(lines)
